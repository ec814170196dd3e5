#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xtal {

inline constexpr int kMaxZ = 103;  // highest tabulated element

struct ElementDescriptor {
  int z = 0;
  std::string symbol;
  int period = 0;
  double group = 0.0;  // fractional (3 + i/15) for the f-block
  double atomic_mass = 0.0;
  std::optional<double> electronegativity;  // Pauling; absent for some noble gases
  std::vector<int> oxidation_states;        // common states; may be empty
  bool is_metal = false;
  bool f_block = false;
};

// Table lookup by atomic number, 1..kMaxZ. Throws Error(out_of_range) outside
// that range. The table is parsed once from the embedded TSV.
const ElementDescriptor& element_info(int z);

// Symbol -> atomic number ("Fe" -> 26); case-sensitive on the canonical
// capitalization. Returns nullopt for unknown symbols.
std::optional<int> element_from_symbol(std::string_view symbol);

}  // namespace xtal
