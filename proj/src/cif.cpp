#include "xtal/cif.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xtal/elements.hpp"
#include "xtal/errors.hpp"

namespace xtal {
namespace {

// Token stream over CIF text: handles comments, quoted values and
// semicolon-delimited text blocks. Tags keep their leading underscore.
std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string line;
  bool in_text_block = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (in_text_block) {
      if (!line.empty() && line[0] == ';') in_text_block = false;
      continue;  // text block content is never needed here
    }
    if (!line.empty() && line[0] == ';') {
      in_text_block = true;
      tokens.push_back(";");  // placeholder value
      continue;
    }
    size_t i = 0;
    while (i < line.size()) {
      if (std::isspace(static_cast<unsigned char>(line[i]))) {
        ++i;
        continue;
      }
      if (line[i] == '#') break;  // comment to end of line
      if (line[i] == '\'' || line[i] == '"') {
        char quote = line[i];
        size_t end = line.find(quote, i + 1);
        if (end == std::string::npos) end = line.size();
        tokens.push_back(line.substr(i + 1, end - i - 1));
        i = (end < line.size()) ? end + 1 : end;
      } else {
        size_t end = i;
        while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end])))
          ++end;
        tokens.push_back(line.substr(i, end - i));
        i = end;
      }
    }
  }
  return tokens;
}

bool is_tag(const std::string& t) { return !t.empty() && t[0] == '_'; }
bool is_data(const std::string& t) { return t.rfind("data_", 0) == 0; }
bool is_loop(const std::string& t) { return t == "loop_"; }

double parse_number(const std::string& tok, const std::string& context) {
  std::string s = tok;
  auto paren = s.find('(');  // strip uncertainty suffix "1.234(5)"
  if (paren != std::string::npos) s.resize(paren);
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw_data("parse_error", "bad numeric value '" + tok + "' for " + context);
  }
}

// "Fe2+" / "Na1" / "O2-" -> element symbol prefix.
int species_from_symbol(const std::string& raw) {
  std::string sym;
  for (char ch : raw) {
    if (std::isalpha(static_cast<unsigned char>(ch)))
      sym.push_back(ch);
    else
      break;
  }
  auto z = element_from_symbol(sym);
  if (!z)
    throw_data("unknown_element", "unrecognized element symbol '" + raw + "'");
  return *z;
}

}  // namespace

ParsedCrystal parse_cif(const std::string& text) {
  auto tokens = tokenize(text);
  ParsedCrystal out;
  bool cell_seen[6] = {};
  bool sites_seen = false;
  int data_blocks = 0;

  size_t i = 0;
  while (i < tokens.size()) {
    const std::string& tok = tokens[i];
    if (is_data(tok)) {
      if (++data_blocks > 1) break;  // only the first block
      ++i;
      continue;
    }
    if (is_loop(tok)) {
      ++i;
      std::vector<std::string> cols;
      while (i < tokens.size() && is_tag(tokens[i])) cols.push_back(tokens[i++]);
      std::vector<std::string> values;
      while (i < tokens.size() && !is_tag(tokens[i]) && !is_loop(tokens[i]) &&
             !is_data(tokens[i]))
        values.push_back(tokens[i++]);
      if (cols.empty())
        throw_data("parse_error", "loop_ without column tags");

      auto col_of = [&](const char* name) -> int {
        for (size_t c = 0; c < cols.size(); ++c)
          if (cols[c] == name) return static_cast<int>(c);
        return -1;
      };
      int c_sym = col_of("_atom_site_type_symbol");
      if (c_sym < 0) c_sym = col_of("_atom_site_label");
      int c_x = col_of("_atom_site_fract_x");
      int c_y = col_of("_atom_site_fract_y");
      int c_z = col_of("_atom_site_fract_z");
      bool is_site_loop = c_x >= 0 || c_y >= 0 || c_z >= 0 || c_sym >= 0;
      if (!is_site_loop) continue;  // some other loop (symmetry ops etc.)
      if (c_sym < 0 || c_x < 0 || c_y < 0 || c_z < 0)
        throw_data("parse_error", "atom site loop missing symbol or coordinate columns");
      if (values.size() % cols.size() != 0)
        throw_data("parse_error", "atom site loop has a ragged row");
      size_t nrows = values.size() / cols.size();
      for (size_t r = 0; r < nrows; ++r) {
        const auto v = [&](int c) -> const std::string& { return values[r * cols.size() + c]; };
        out.species.push_back(species_from_symbol(v(c_sym)));
        out.frac_coords.push_back({parse_number(v(c_x), "_atom_site_fract_x"),
                                   parse_number(v(c_y), "_atom_site_fract_y"),
                                   parse_number(v(c_z), "_atom_site_fract_z")});
      }
      sites_seen = sites_seen || nrows > 0;
      continue;
    }
    if (is_tag(tok)) {
      if (i + 1 >= tokens.size())
        throw_data("parse_error", "tag '" + tok + "' has no value");
      const std::string& val = tokens[i + 1];
      auto set = [&](double& field, int idx) {
        field = parse_number(val, tok);
        cell_seen[idx] = true;
      };
      if (tok == "_cell_length_a") set(out.params.a, 0);
      else if (tok == "_cell_length_b") set(out.params.b, 1);
      else if (tok == "_cell_length_c") set(out.params.c, 2);
      else if (tok == "_cell_angle_alpha") set(out.params.alpha, 3);
      else if (tok == "_cell_angle_beta") set(out.params.beta, 4);
      else if (tok == "_cell_angle_gamma") set(out.params.gamma, 5);
      i += 2;
      continue;
    }
    ++i;  // stray value outside any construct
  }

  for (bool seen : cell_seen)
    if (!seen) throw_data("parse_error", "missing _cell_* tag");
  (void)sites_seen;  // zero-site files are legal (dropped samples)
  return out;
}

CrystalStructure read_cif(const std::string& text) {
  ParsedCrystal p = parse_cif(text);
  CrystalStructure s;
  s.lattice = lattice_from_params(p.params);
  s.species = p.species;
  s.frac_coords.reserve(p.frac_coords.size());
  for (const auto& fc : p.frac_coords) s.frac_coords.push_back(wrap_frac(fc));
  return s;
}

std::string write_cif(const CrystalStructure& s, const std::string& block_name,
                      const std::vector<std::string>& comments) {
  LatticeParams p = lattice_params(s.lattice);
  char buf[128];
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "data_" << block_name << "\n";
  auto tag = [&](const char* name, double v) {
    std::snprintf(buf, sizeof(buf), "%s %.6f\n", name, v);
    out << buf;
  };
  tag("_cell_length_a", p.a);
  tag("_cell_length_b", p.b);
  tag("_cell_length_c", p.c);
  tag("_cell_angle_alpha", p.alpha);
  tag("_cell_angle_beta", p.beta);
  tag("_cell_angle_gamma", p.gamma);
  out << "loop_\n"
      << " _atom_site_type_symbol\n"
      << " _atom_site_fract_x\n"
      << " _atom_site_fract_y\n"
      << " _atom_site_fract_z\n";
  for (int i = 0; i < s.num_sites(); ++i) {
    const Vec3& fc = s.frac_coords[i];
    std::snprintf(buf, sizeof(buf), " %s %.6f %.6f %.6f\n",
                  element_info(s.species[i]).symbol.c_str(), fc.x(), fc.y(), fc.z());
    out << buf;
  }
  return out.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw_data("io_error", "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad())
    throw_data("io_error", "read failure on '" + path + "'");
  return ss.str();
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw_data("io_error", "cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out)
      throw_data("io_error", "write failure on '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec)
    throw_data("io_error", "rename to '" + path + "' failed: " + ec.message());
}

}  // namespace xtal
