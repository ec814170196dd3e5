#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xtal/structure.hpp"
#include "xtal/tensor.hpp"

namespace xtal {

// One input structure with its origin ("file.cif" or "row 17 (mp-1234)").
// Records that failed to parse carry a reason instead of a structure.
struct SourceRecord {
  std::string source;
  std::optional<CrystalStructure> structure;
  std::string skip_reason;  // empty when structure is set
};

struct IngestReport {
  int n_sources = 0;
  int n_encoded = 0;
  std::map<std::string, int> skip_counts;  // reason -> count

  std::string summary() const;
};

// Load raw structures from either a directory of .cif files (sorted by name)
// or a CSV file with a `cif` column (RFC 4180 quoting, multiline fields).
// Throws Error(io_error) when the path is neither.
std::vector<SourceRecord> load_structure_records(const std::string& path);

// Records -> tensors. Structures that cannot be encoded (too many atoms,
// species outside the 1D cap, parse failures upstream) are counted and
// skipped, never dropped silently. Throws Error(empty_dataset) when nothing
// survives.
std::pair<std::vector<CrystalTensor>, IngestReport> load_dataset(const std::string& path,
                                                                 AtomMode mode);

// Binary tensor cache: magic + mode + count + raw float64 payload plus a
// free-form metadata string (config hash etc.). Round-trips exactly.
void write_tensor_cache(const std::string& path, const std::vector<CrystalTensor>& tensors,
                        const std::string& metadata);
std::pair<std::vector<CrystalTensor>, std::string> read_tensor_cache(const std::string& path);

// Minimal RFC 4180 CSV reader (quoted fields, escaped quotes, embedded
// newlines). Exposed for the ingest CLI and tests.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace xtal
