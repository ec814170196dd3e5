#include "xtal/elements.hpp"

#include <charconv>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "xtal/errors.hpp"

#include "elements_data.inc"

namespace xtal {
namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<ElementDescriptor> parse_table() {
  std::vector<ElementDescriptor> table(kMaxZ + 1);  // index by z, [0] unused
  std::istringstream in(kElementTableText);
  std::string line;
  bool header_seen = false;
  int lanth_idx = 0, act_idx = 0;
  int count = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 8)
      throw_data("element_table", "bad element row: " + line);
    ElementDescriptor e;
    e.z = std::stoi(cols[0]);
    e.symbol = cols[1];
    e.period = std::stoi(cols[2]);
    if (cols[3] == "f") {
      e.f_block = true;
      int& idx = (e.period == 6) ? lanth_idx : act_idx;
      e.group = 3.0 + static_cast<double>(idx) / 15.0;
      ++idx;
    } else {
      e.group = std::stoi(cols[3]);
    }
    e.atomic_mass = std::stod(cols[4]);
    if (cols[5] != "-") e.electronegativity = std::stod(cols[5]);
    if (cols[6] != "-") {
      for (const auto& tok : split(cols[6], ','))
        e.oxidation_states.push_back(std::stoi(tok));
    }
    e.is_metal = cols[7] == "1";
    if (e.z < 1 || e.z > kMaxZ)
      throw_data("element_table", "z out of range in table: " + cols[0]);
    table[e.z] = e;
    ++count;
  }
  if (count != kMaxZ)
    throw_data("element_table", "expected " + std::to_string(kMaxZ) +
                                    " elements, parsed " + std::to_string(count));
  return table;
}

const std::vector<ElementDescriptor>& table() {
  static const std::vector<ElementDescriptor> t = parse_table();
  return t;
}

const std::unordered_map<std::string, int>& symbol_index() {
  static const std::unordered_map<std::string, int> idx = [] {
    std::unordered_map<std::string, int> m;
    for (int z = 1; z <= kMaxZ; ++z) m[table()[z].symbol] = z;
    return m;
  }();
  return idx;
}

}  // namespace

const ElementDescriptor& element_info(int z) {
  if (z < 1 || z > kMaxZ)
    throw_data("out_of_range",
               "atomic number " + std::to_string(z) + " outside 1.." + std::to_string(kMaxZ));
  return table()[z];
}

std::optional<int> element_from_symbol(std::string_view symbol) {
  auto it = symbol_index().find(std::string(symbol));
  if (it == symbol_index().end()) return std::nullopt;
  return it->second;
}

}  // namespace xtal
