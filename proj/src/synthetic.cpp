#include "xtal/synthetic.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "xtal/cif.hpp"
#include "xtal/errors.hpp"
#include "xtal/rng.hpp"

namespace xtal {
namespace {

namespace fs = std::filesystem;

struct Pair { int a, b; };
struct Triple { int a, b, c; };

// Rocksalt AB, conventional cubic cell, 4 formula units.
constexpr std::array<Pair, 8> kRocksaltPairs = {{
    {11, 17},  // Na Cl
    {3, 9},    // Li F
    {19, 35},  // K Br
    {37, 53},  // Rb I
    {12, 8},   // Mg O
    {20, 8},   // Ca O
    {38, 16},  // Sr S
    {56, 34},  // Ba Se
}};

// CsCl-type AB: four ionic pairs plus B2-ordered metal alloys.
constexpr std::array<Pair, 10> kCsClPairs = {{
    {55, 17},  // Cs Cl
    {55, 35},  // Cs Br
    {55, 53},  // Cs I
    {81, 17},  // Tl Cl
    {26, 28},  // Fe Ni
    {29, 30},  // Cu Zn
    {28, 13},  // Ni Al
    {22, 26},  // Ti Fe
    {29, 46},  // Cu Pd
    {27, 26},  // Co Fe
}};

// Cubic ABO3 perovskites with A(+1)B(+5) or A(+2)B(+4) cations.
constexpr std::array<Triple, 8> kPerovskites = {{
    {20, 22, 8},  // Ca Ti O
    {38, 22, 8},  // Sr Ti O
    {56, 22, 8},  // Ba Ti O
    {20, 40, 8},  // Ca Zr O
    {38, 40, 8},  // Sr Zr O
    {19, 41, 8},  // K Nb O
    {11, 41, 8},  // Na Nb O
    {19, 73, 8},  // K Ta O
}};

CrystalStructure cubic(double a) {
  CrystalStructure s;
  s.lattice = Mat3::Identity() * a;
  return s;
}

CrystalStructure make_rocksalt(Rng& rng) {
  const auto& p = kRocksaltPairs[static_cast<size_t>(rng.uniform_int(0, kRocksaltPairs.size() - 1))];
  double a = 4.0 + 2.5 * rng.uniform();
  CrystalStructure s = cubic(a);
  const Vec3 fcc[4] = {{0, 0, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}};
  for (const auto& f : fcc) {
    s.species.push_back(p.a);
    s.frac_coords.push_back(f);
  }
  for (const auto& f : fcc) {
    s.species.push_back(p.b);
    s.frac_coords.push_back(wrap_frac(Vec3(f + Vec3(0.5, 0.5, 0.5))));
  }
  return s;
}

CrystalStructure make_cscl(Rng& rng) {
  const auto& p = kCsClPairs[static_cast<size_t>(rng.uniform_int(0, kCsClPairs.size() - 1))];
  double a = 3.0 + 1.5 * rng.uniform();
  CrystalStructure s = cubic(a);
  s.species = {p.a, p.b};
  s.frac_coords = {{0, 0, 0}, {0.5, 0.5, 0.5}};
  return s;
}

CrystalStructure make_perovskite(Rng& rng) {
  const auto& t = kPerovskites[static_cast<size_t>(rng.uniform_int(0, kPerovskites.size() - 1))];
  double a = 3.5 + 1.0 * rng.uniform();
  CrystalStructure s = cubic(a);
  s.species = {t.a, t.b, t.c, t.c, t.c};
  s.frac_coords = {{0, 0, 0},
                   {0.5, 0.5, 0.5},
                   {0.5, 0.5, 0},
                   {0.5, 0, 0.5},
                   {0, 0.5, 0.5}};
  return s;
}

}  // namespace

std::vector<CrystalStructure> make_synthetic_dataset(int n, std::uint64_t seed) {
  if (n < 1) throw_usage("invalid_count", "synthetic dataset size must be >= 1");
  std::vector<CrystalStructure> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(i)));
    switch (rng.uniform_int(0, 2)) {
      case 0: out.push_back(make_rocksalt(rng)); break;
      case 1: out.push_back(make_cscl(rng)); break;
      default: out.push_back(make_perovskite(rng)); break;
    }
  }
  return out;
}

void write_cif_directory(const std::string& dir,
                         const std::vector<CrystalStructure>& structures,
                         const std::vector<std::string>& comments) {
  fs::create_directories(dir);
  for (size_t i = 0; i < structures.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "crystal_%05zu", i);
    fs::path file = fs::path(dir) / (std::string(name) + ".cif");
    write_text_atomic(file.string(), write_cif(structures[i], name, comments));
  }
}

void write_dataset_csv(const std::string& path,
                       const std::vector<CrystalStructure>& structures,
                       const std::vector<std::string>& comments) {
  std::ostringstream csv;
  csv << "material_id,cif\n";
  for (size_t i = 0; i < structures.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "crystal_%05zu", i);
    std::string cif = write_cif(structures[i], name, comments);
    std::string quoted;
    quoted.reserve(cif.size() + 2);
    quoted += '"';
    for (char c : cif) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    quoted += '"';
    csv << name << ',' << quoted << '\n';
  }
  write_text_atomic(path, csv.str());
}

}  // namespace xtal
