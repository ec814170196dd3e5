#include "xtal/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xtal/cif.hpp"
#include "xtal/errors.hpp"

namespace xtal {
namespace fs = std::filesystem;

std::string IngestReport::summary() const {
  std::ostringstream out;
  out << "sources = " << n_sources << "\nencoded = " << n_encoded << "\n";
  for (const auto& [reason, count] : skip_counts)
    out << "skipped." << reason << " = " << count << "\n";
  return out.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < text.size()) {
    char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
        } else {
          quoted = false;
          ++i;
        }
      } else {
        field.push_back(ch);
        ++i;
      }
    } else if (ch == '"') {
      quoted = true;
      ++i;
    } else if (ch == ',') {
      end_field();
      ++i;
    } else if (ch == '\r') {
      ++i;  // swallow; \n ends the row
    } else if (ch == '\n') {
      end_row();
      ++i;
    } else {
      field.push_back(ch);
      ++i;
    }
  }
  if (quoted)
    throw_data("parse_error", "unterminated quoted CSV field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

namespace {

std::vector<SourceRecord> load_from_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".cif")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::vector<SourceRecord> records;
  records.reserve(files.size());
  for (const auto& f : files) {
    SourceRecord rec;
    rec.source = f.filename().string();
    try {
      rec.structure = read_cif(read_text_file(f.string()));
    } catch (const Error& e) {
      rec.skip_reason = e.code();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<SourceRecord> load_from_csv(const fs::path& file) {
  auto rows = parse_csv(read_text_file(file.string()));
  if (rows.empty())
    throw_data("parse_error", "CSV file '" + file.string() + "' is empty");
  const auto& header = rows[0];
  int cif_col = -1, id_col = -1;
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "cif") cif_col = static_cast<int>(c);
    if (header[c] == "material_id") id_col = static_cast<int>(c);
  }
  if (cif_col < 0)
    throw_data("parse_error", "CSV file '" + file.string() + "' has no 'cif' column");

  std::vector<SourceRecord> records;
  records.reserve(rows.size() - 1);
  for (size_t r = 1; r < rows.size(); ++r) {
    SourceRecord rec;
    rec.source = "row " + std::to_string(r);
    if (id_col >= 0 && id_col < static_cast<int>(rows[r].size()))
      rec.source += " (" + rows[r][id_col] + ")";
    if (cif_col >= static_cast<int>(rows[r].size())) {
      rec.skip_reason = "parse_error";
    } else {
      try {
        rec.structure = read_cif(rows[r][cif_col]);
      } catch (const Error& e) {
        rec.skip_reason = e.code();
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<SourceRecord> load_structure_records(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) return load_from_dir(p);
  if (fs::is_regular_file(p)) return load_from_csv(p);
  throw_data("io_error", "'" + path + "' is neither a directory nor a file");
}

std::pair<std::vector<CrystalTensor>, IngestReport> load_dataset(const std::string& path,
                                                                 AtomMode mode) {
  auto records = load_structure_records(path);
  std::vector<CrystalTensor> tensors;
  IngestReport report;
  report.n_sources = static_cast<int>(records.size());
  for (const auto& rec : records) {
    if (!rec.structure) {
      ++report.skip_counts[rec.skip_reason];
      continue;
    }
    try {
      tensors.push_back(to_tensor(*rec.structure, mode));
      ++report.n_encoded;
    } catch (const Error& e) {
      ++report.skip_counts[e.code()];
    }
  }
  if (tensors.empty())
    throw_data("empty_dataset", "no encodable structures found in '" + path + "'");
  return {std::move(tensors), report};
}

namespace {
constexpr char kCacheMagic[8] = {'X', 'T', 'A', 'L', 'T', 'E', 'N', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw_data("parse_error", "tensor cache truncated");
  return v;
}
}  // namespace

void write_tensor_cache(const std::string& path, const std::vector<CrystalTensor>& tensors,
                        const std::string& metadata) {
  if (tensors.empty())
    throw_data("empty_dataset", "refusing to write an empty tensor cache");
  std::ostringstream out(std::ios::binary);
  out.write(kCacheMagic, sizeof(kCacheMagic));
  put<std::uint32_t>(out, tensors[0].mode == AtomMode::TwoD ? 2 : 1);
  put<std::uint64_t>(out, metadata.size());
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  put<std::uint64_t>(out, tensors.size());
  const int f = feature_dim(tensors[0].mode);
  for (const auto& t : tensors) {
    if (t.mode != tensors[0].mode)
      throw_data("shape_mismatch", "mixed atom modes in tensor cache");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) put<double>(out, t.lattice(r, c));
    for (int r = 0; r < kMaxAtoms; ++r)
      for (int c = 0; c < f; ++c) put<double>(out, t.atoms(r, c));
  }
  write_text_atomic(path, out.str());
}

std::pair<std::vector<CrystalTensor>, std::string> read_tensor_cache(const std::string& path) {
  std::istringstream in(read_text_file(path), std::ios::binary);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
    throw_data("parse_error", "'" + path + "' is not a tensor cache");
  auto mode_tag = get<std::uint32_t>(in);
  if (mode_tag != 1 && mode_tag != 2)
    throw_data("parse_error", "tensor cache has unknown atom mode");
  AtomMode mode = (mode_tag == 2) ? AtomMode::TwoD : AtomMode::OneD;
  auto meta_len = get<std::uint64_t>(in);
  std::string metadata(meta_len, '\0');
  in.read(metadata.data(), static_cast<std::streamsize>(meta_len));
  auto count = get<std::uint64_t>(in);
  std::vector<CrystalTensor> tensors;
  tensors.reserve(count);
  const int f = feature_dim(mode);
  for (std::uint64_t i = 0; i < count; ++i) {
    CrystalTensor t = CrystalTensor::zeros(mode);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.lattice(r, c) = get<double>(in);
    for (int r = 0; r < kMaxAtoms; ++r)
      for (int c = 0; c < f; ++c) t.atoms(r, c) = get<double>(in);
    tensors.push_back(std::move(t));
  }
  return {std::move(tensors), metadata};
}

}  // namespace xtal
