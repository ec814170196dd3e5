#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xtal/structure.hpp"

namespace xtal {

// Deterministic toy crystals for tests and smoke pipelines: rocksalt, CsCl
// and perovskite cells with randomized compatible species and lattice
// constants in [3, 8] Angstrom. Every structure fits in 20 sites, uses
// species encodable in both atom modes, and is built to pass the generation
// prefilter and the interatomic-distance validity check. Ionic templates are
// charge balanced and the binary alloys lean on the all-metal rule, so
// compositional validity holds by construction.
std::vector<CrystalStructure> make_synthetic_dataset(int n, std::uint64_t seed);

// Emitters producing the two ingestible layouts: a directory of
// zero-padded .cif files, or a single CSV with material_id and cif columns.
// `comments` are embedded at the top of each CIF (provenance lines).
void write_cif_directory(const std::string& dir,
                         const std::vector<CrystalStructure>& structures,
                         const std::vector<std::string>& comments = {});
void write_dataset_csv(const std::string& path,
                       const std::vector<CrystalStructure>& structures,
                       const std::vector<std::string>& comments = {});

}  // namespace xtal
