#pragma once

#include <string>
#include <vector>

#include "xtal/lattice.hpp"
#include "xtal/structure.hpp"

namespace xtal {

// The raw content of a CIF before any geometry is built: cell parameters plus
// per-site species and fractional coordinates. Kept separate from
// CrystalStructure so candidate screening can reject bad cells before
// constructing a lattice.
struct ParsedCrystal {
  LatticeParams params;
  std::vector<int> species;
  std::vector<Vec3> frac_coords;
};

// Parse the subset of CIF this pipeline emits and the reference corpus uses:
// one data block, the six _cell_* tags, and an atom-site loop carrying
// _atom_site_type_symbol and _atom_site_fract_{x,y,z}. Unknown tags, extra
// loop columns and comments are skipped. Throws Error(parse_error) on
// malformed input and Error(unknown_element) for unrecognized symbols.
ParsedCrystal parse_cif(const std::string& text);

// parse_cif + lattice construction + coordinate wrapping.
CrystalStructure read_cif(const std::string& text);

// Emit the same subset: data block, cell tags, one loop with symbol and
// fractional coordinates at six decimals. `comments` go first as '#' lines
// (provenance: command line, config hash, seed).
std::string write_cif(const CrystalStructure& s, const std::string& block_name = "crystal",
                      const std::vector<std::string>& comments = {});

// File helpers. read_* throw Error(io_error) when the file cannot be read;
// write_text_atomic writes to a temp file in the target directory and renames.
std::string read_text_file(const std::string& path);
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace xtal
