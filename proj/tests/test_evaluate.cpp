#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "xtal/cif.hpp"
#include "xtal/elements.hpp"
#include "xtal/errors.hpp"
#include "xtal/lattice.hpp"
#include "xtal/metrics.hpp"
#include "xtal/rng.hpp"

using namespace xtal;

namespace {

CrystalStructure cubic(double a, std::vector<int> species, std::vector<Vec3> coords) {
  CrystalStructure s;
  s.lattice = a * Mat3::Identity();
  s.species = std::move(species);
  s.frac_coords = std::move(coords);
  return s;
}

CrystalStructure rocksalt(int cation, int anion, double a) {
  return cubic(a, {cation, cation, cation, cation, anion, anion, anion, anion},
               {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0), Vec3(0.5, 0, 0.5), Vec3(0, 0.5, 0.5),
                Vec3(0.5, 0, 0), Vec3(0, 0.5, 0), Vec3(0, 0, 0.5), Vec3(0.5, 0.5, 0.5)});
}

CrystalStructure composition_only(const std::vector<int>& species) {
  std::vector<Vec3> coords;
  for (size_t i = 0; i < species.size(); ++i)
    coords.emplace_back(0.05 * static_cast<double>(i), 0.11 * static_cast<double>(i),
                        0.17 * static_cast<double>(i));
  return cubic(12.0, species, coords);
}

ParsedCrystal candidate(LatticeParams p, std::vector<int> species, std::vector<Vec3> coords) {
  return ParsedCrystal{p, std::move(species), std::move(coords)};
}

}  // namespace

TEST_CASE("prefilter accepts a normal candidate") {
  auto out = prefilter(candidate({4, 4, 4, 90, 90, 90}, {11, 17},
                                 {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5)}));
  REQUIRE(out.passed());
  CHECK(out.reason.empty());
  CHECK(out.structure->num_sites() == 2);
  CHECK(out.structure->lattice(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("prefilter reject reasons fire in a fixed order") {
  auto bad_z = prefilter(candidate({-1, 4, 4, 90, 90, 90}, {200}, {Vec3(0, 0, 0)}));
  CHECK(!bad_z.passed());
  CHECK(bad_z.reason == "atomic_number_range");

  CHECK(prefilter(candidate({4, 4, 4, 90, 90, 90}, {0}, {Vec3(0, 0, 0)})).reason ==
        "atomic_number_range");
  CHECK(prefilter(candidate({4, 4, 4, 90, 90, 90}, {104}, {Vec3(0, 0, 0)})).passed());
  CHECK(prefilter(candidate({4, 4, 4, 90, 90, 90}, {105}, {Vec3(0, 0, 0)})).reason ==
        "atomic_number_range");

  double nan = std::numeric_limits<double>::quiet_NaN();
  auto neg_len = prefilter(candidate({-2, 4, 4, 90, 90, 90}, {26}, {Vec3(nan, 0, 0)}));
  CHECK(neg_len.reason == "lattice_length");

  auto nan_angle = prefilter(candidate({4, 4, 4, nan, 90, 90}, {26}, {Vec3(0, 0, 0)}));
  CHECK(nan_angle.reason == "non_finite");
  CHECK(prefilter(candidate({4, 4, 4, 90, 90, 90}, {26}, {Vec3(nan, 0, 0)})).reason ==
        "non_finite");

  auto impossible = prefilter(candidate({4, 4, 4, 179, 179, 179}, {26}, {Vec3(0, 0, 0)}));
  CHECK(impossible.reason == "not_constructible");

  auto tiny = prefilter(candidate({0.05, 0.05, 0.05, 90, 90, 90}, {26}, {Vec3(0, 0, 0)}));
  CHECK(tiny.reason == "min_volume");
}

TEST_CASE("zero-site candidates pass prefilter vacuously") {
  auto out = prefilter(candidate({4, 4, 4, 90, 90, 90}, {}, {}));
  REQUIRE(out.passed());
  CHECK(out.structure->num_sites() == 0);
  CHECK(!structural_validity(*out.structure));
  CHECK(!compositional_validity(*out.structure));
}

TEST_CASE("structural validity hinges on the minimum periodic distance") {
  CHECK(structural_validity(cubic(3.0, {26}, {Vec3(0, 0, 0)})));
  CHECK(!structural_validity(cubic(0.45, {26}, {Vec3(0, 0, 0)})));
  CHECK(!structural_validity(cubic(10.0, {11, 17}, {Vec3(0, 0, 0), Vec3(0.049, 0, 0)})));
  CHECK(structural_validity(cubic(10.0, {11, 17}, {Vec3(0, 0, 0), Vec3(0.051, 0, 0)})));
  CHECK(structural_validity(rocksalt(11, 17, 5.64)));
}

TEST_CASE("compositional validity hand cases") {
  CHECK(compositional_validity(composition_only({11, 17})));            // rock salt
  CHECK(compositional_validity(composition_only({1, 1, 8})));           // water-like
  CHECK(compositional_validity(composition_only({20, 22, 8, 8, 8})));   // perovskite
  CHECK(!compositional_validity(composition_only({11, 17, 17})));
  CHECK(compositional_validity(composition_only({26, 26, 28})));        // all metal
  CHECK(!compositional_validity(composition_only({})));

  // A tiny budget starves the search but not the all-metal shortcut.
  CHECK(!compositional_validity(composition_only({11, 17}), 1));
  CHECK(compositional_validity(composition_only({26, 26, 28}), 1));
}

TEST_CASE("compositional validity agrees with exhaustive enumeration") {
  const std::vector<int> pool{1, 3, 7, 8, 9, 11, 12, 13, 16, 17, 19, 20, 22, 26, 29, 34};
  Rng rng(404);
  for (int trial = 0; trial < 60; ++trial) {
    int n_elems = static_cast<int>(rng.uniform_int(1, 3));
    std::vector<int> zs;
    std::vector<oracle::OracleElement> oracle_elems;
    std::vector<int> chosen;
    for (int e = 0; e < n_elems; ++e) {
      int z;
      do {
        z = pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
      } while (std::find(chosen.begin(), chosen.end(), z) != chosen.end());
      chosen.push_back(z);
      int count = static_cast<int>(rng.uniform_int(1, 3));
      for (int k = 0; k < count; ++k) zs.push_back(z);
      const auto& info = element_info(z);
      oracle_elems.push_back({count, info.oxidation_states,
                              info.electronegativity.value_or(
                                  std::numeric_limits<double>::infinity()),
                              info.is_metal});
    }
    CAPTURE(trial);
    bool got = compositional_validity(composition_only(zs));
    bool want = oracle::charge_neutral_exhaustive(oracle_elems);
    CHECK(got == want);
  }
}

TEST_CASE("wasserstein distance examples and properties") {
  std::vector<double> a{0.0}, b{1.0};
  CHECK(wasserstein_1d(a, b) == 1.0);

  std::vector<double> c{0.0, 1.0}, d{0.0, 3.0};
  CHECK(wasserstein_1d(c, d) == 1.0);

  Rng rng(11);
  std::vector<double> u, v;
  for (int i = 0; i < 9; ++i) u.push_back(5.0 * rng.uniform());
  for (int i = 0; i < 9; ++i) v.push_back(5.0 * rng.uniform());
  auto su = u, sv = v;
  std::sort(su.begin(), su.end());
  std::sort(sv.begin(), sv.end());
  double by_hand = 0.0;
  for (int i = 0; i < 9; ++i) by_hand += std::abs(su[i] - sv[i]);
  by_hand /= 9.0;
  CHECK(wasserstein_1d(u, v) == by_hand);

  std::vector<double> w;
  for (int i = 0; i < 13; ++i) w.push_back(5.0 * rng.uniform());
  CHECK(wasserstein_1d(u, w) == doctest::Approx(oracle::w1_cdf_area(u, w)).epsilon(1e-12));
  CHECK(wasserstein_1d(u, w) == wasserstein_1d(w, u));

  auto shifted_u = u, shifted_w = w;
  for (auto& x : shifted_u) x += 2.5;
  for (auto& x : shifted_w) x += 2.5;
  CHECK(wasserstein_1d(shifted_u, shifted_w) ==
        doctest::Approx(wasserstein_1d(u, w)).epsilon(1e-12));

  std::vector<double> empty;
  CHECK_THROWS_AS(wasserstein_1d(empty, b), Error);
  CHECK_THROWS_AS(wasserstein_1d(a, empty), Error);
}

TEST_CASE("distribution distances") {
  CrystalStructure nacl = rocksalt(11, 17, 5.64);
  CrystalStructure kcl = rocksalt(19, 17, 6.29);
  std::vector<const CrystalStructure*> gen{&nacl, &kcl};
  auto same = distribution_distances(gen, gen, 3);
  CHECK(same.d_rho == 0.0);
  CHECK(same.d_elem == 0.0);

  CrystalStructure h = cubic(3.0, {1}, {Vec3(0, 0, 0)});
  CrystalStructure he = cubic(3.0, {2}, {Vec3(0, 0, 0)});
  std::vector<const CrystalStructure*> gh{&h}, ghe{&he};
  auto hz = distribution_distances(gh, ghe, 3);
  CHECK(hz.d_elem == 1.0);
  CHECK(hz.d_rho > 0.0);

  auto r1 = distribution_distances(gen, ghe, 17);
  auto r2 = distribution_distances(gen, ghe, 17);
  CHECK(r1.d_rho == r2.d_rho);
  CHECK(r1.d_elem == r2.d_elem);

  std::vector<const CrystalStructure*> none;
  CHECK_THROWS_AS(distribution_distances(none, gen, 1), Error);
  CHECK_THROWS_AS(distribution_distances(gen, none, 1), Error);
}

TEST_CASE("structure matching") {
  CrystalStructure base = rocksalt(11, 17, 5.64);
  CHECK(structures_match(base, base));
  CHECK(chemical_system(base) == "Cl-Na");

  // Rigid translation plus site permutation.
  CrystalStructure moved = base;
  for (auto& f : moved.frac_coords)
    f = Vec3(wrap_frac(f(0) + 0.13), wrap_frac(f(1) + 0.27), wrap_frac(f(2) + 0.41));
  std::reverse(moved.frac_coords.begin(), moved.frac_coords.end());
  std::reverse(moved.species.begin(), moved.species.end());
  CHECK(structures_match(base, moved));
  CHECK(structures_match(moved, base));

  // Small jitter stays within the site tolerance.
  CrystalStructure jittered = base;
  Rng rng(5);
  for (auto& f : jittered.frac_coords)
    for (int k = 0; k < 3; ++k) f(k) = wrap_frac(f(k) + 0.02 * (rng.uniform() - 0.5));
  CHECK(structures_match(base, jittered));

  CrystalStructure scaled = base;
  scaled.lattice *= 1.5;
  CHECK(!structures_match(base, scaled));

  // Doubling the cell changes the site count; no supercell search happens.
  CrystalStructure doubled = base;
  doubled.lattice.row(2) *= 2.0;
  doubled.species.clear();
  doubled.frac_coords.clear();
  for (size_t i = 0; i < base.species.size(); ++i) {
    const Vec3& f = base.frac_coords[i];
    doubled.species.push_back(base.species[i]);
    doubled.frac_coords.emplace_back(f(0), f(1), f(2) / 2.0);
    doubled.species.push_back(base.species[i]);
    doubled.frac_coords.emplace_back(f(0), f(1), f(2) / 2.0 + 0.5);
  }
  CHECK(!structures_match(base, doubled));

  CHECK(!structures_match(base, rocksalt(19, 17, 5.64)));

  CrystalStructure ortho, skew;
  ortho.lattice = lattice_from_params({5, 5, 5, 90, 90, 90});
  skew.lattice = lattice_from_params({5, 5, 5, 90, 90, 86});
  ortho.species = skew.species = {11, 17};
  ortho.frac_coords = skew.frac_coords = {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5)};
  CHECK(structures_match(ortho, skew));  // 4 degrees, inside the angle gate
  skew.lattice = lattice_from_params({5, 5, 5, 90, 90, 84});
  CHECK(!structures_match(ortho, skew));  // 6 degrees, outside
}

TEST_CASE("uniqueness and novelty bookkeeping") {
  CrystalStructure nacl = rocksalt(11, 17, 5.64);
  CrystalStructure nacl_moved = nacl;
  for (auto& f : nacl_moved.frac_coords)
    f = Vec3(wrap_frac(f(0) + 0.2), f(1), f(2));
  CrystalStructure kcl = rocksalt(19, 17, 6.29);
  CrystalStructure lif = rocksalt(3, 9, 4.03);
  CrystalStructure iron = cubic(2.87, {26, 26}, {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5)});

  std::vector<const CrystalStructure*> gen{&nacl, &nacl_moved, &kcl, &lif, &iron};
  CrystalStructure kcl_jittered = kcl;
  for (auto& f : kcl_jittered.frac_coords)
    f = Vec3(wrap_frac(f(0) + 0.01), f(1), f(2));
  std::vector<const CrystalStructure*> train{&kcl_jittered};

  auto un = uniqueness_novelty(gen, train);
  REQUIRE(un.flags.size() == 5);
  CHECK(!un.flags[0].unique);  // duplicate pair: both lose uniqueness
  CHECK(!un.flags[1].unique);
  CHECK(un.flags[2].unique);
  CHECK(un.flags[3].unique);
  CHECK(un.flags[0].novel);
  CHECK(!un.flags[2].novel);  // matches the training set
  CHECK(un.flags[3].novel);
  CHECK(un.flags[4].excluded);  // single element, outside the accounting
  CHECK(!un.flags[4].unique);
  CHECK(un.n_unique == 2);
  CHECK(un.n_novel == 3);
  CHECK(un.n_unique_and_novel == 1);  // only LiF

  auto brute = uniqueness_novelty(gen, train, {}, false);
  CHECK(brute.n_unique == un.n_unique);
  CHECK(brute.n_novel == un.n_novel);
  CHECK(brute.n_unique_and_novel == un.n_unique_and_novel);
  for (size_t i = 0; i < un.flags.size(); ++i) {
    CHECK(brute.flags[i].unique == un.flags[i].unique);
    CHECK(brute.flags[i].novel == un.flags[i].novel);
    CHECK(brute.flags[i].excluded == un.flags[i].excluded);
  }
}

TEST_CASE("report serialization round trips") {
  MetricsReport m;
  m.n_total = 128;
  m.n_prefilter_pass = 120;
  m.structural_valid_pct = 93.75;
  m.chemical_valid_pct = 81.25;
  m.d_rho = 0.12345678901234567;
  m.d_elem = 3.25;
  m.unique_pct = 90.625;
  m.novel_pct = 85.9375;
  m.un_rate = 0.78125;
  m.skip_counts["parse_error"] = 5;
  m.skip_counts["min_volume"] = 3;
  m.stable_in_un = 0.35;

  std::string text = serialize_report(m);
  MetricsReport back = parse_report(text);
  CHECK(back.n_total == m.n_total);
  CHECK(back.n_prefilter_pass == m.n_prefilter_pass);
  CHECK(back.structural_valid_pct == m.structural_valid_pct);
  CHECK(back.chemical_valid_pct == m.chemical_valid_pct);
  CHECK(back.d_rho == m.d_rho);
  CHECK(back.d_elem == m.d_elem);
  CHECK(back.unique_pct == m.unique_pct);
  CHECK(back.novel_pct == m.novel_pct);
  CHECK(back.un_rate == m.un_rate);
  CHECK(back.skip_counts == m.skip_counts);
  CHECK(back.stable_in_un == m.stable_in_un);
  CHECK(!back.metastable_in_un.has_value());
  CHECK(!back.sun.has_value());

  MetricsReport nan_case;
  nan_case.n_total = 4;
  std::string nt = serialize_report(nan_case);
  CHECK(nt.find("d_rho = nan") != std::string::npos);
  MetricsReport nan_back = parse_report(nt);
  CHECK(std::isnan(nan_back.d_rho));
  CHECK(std::isnan(nan_back.d_elem));

  CHECK_THROWS_AS(parse_report("bogus_key = 3\n"), Error);
}

TEST_CASE("batch evaluation over a generated directory") {
  oracle::TempDir gen("eval_gen");
  oracle::TempDir train("eval_train");

  CrystalStructure nacl = rocksalt(11, 17, 5.64);
  CrystalStructure kcl = rocksalt(19, 17, 6.29);
  CrystalStructure iron = cubic(2.87, {26, 26}, {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5)});
  write_text_atomic((gen.path() / "s0.cif").string(), write_cif(nacl, "s0"));
  write_text_atomic((gen.path() / "s1.cif").string(), write_cif(kcl, "s1"));
  write_text_atomic((gen.path() / "s2.cif").string(), write_cif(iron, "s2"));
  write_text_atomic((train.path() / "t0.cif").string(),
                    write_cif(rocksalt(3, 9, 4.03), "t0"));

  // Self-referential evaluation: distances collapse, nothing is novel.
  MetricsReport self = evaluate_batch(gen.str(), gen.str(), gen.str(), 9);
  CHECK(self.n_total == 3);
  CHECK(self.n_prefilter_pass == 3);
  CHECK(self.structural_valid_pct == 100.0);
  CHECK(self.chemical_valid_pct == 100.0);
  CHECK(self.d_rho == 0.0);
  CHECK(self.d_elem == 0.0);
  CHECK(self.novel_pct == 0.0);
  CHECK(self.un_rate == 0.0);
  CHECK(self.skip_counts.empty());

  // Against a disjoint training set everything (multi-element) is novel.
  MetricsReport vs = evaluate_batch(gen.str(), gen.str(), train.str(), 9);
  CHECK(vs.unique_pct == doctest::Approx(100.0 * 2 / 3));
  CHECK(vs.novel_pct == doctest::Approx(100.0 * 2 / 3));
  CHECK(vs.un_rate == doctest::Approx(2.0 / 3));

  // A dropped-sample placeholder counts in every denominator.
  write_text_atomic((gen.path() / "s3.cif").string(), write_cif(CrystalStructure{}, "s3"));
  MetricsReport with_placeholder = evaluate_batch(gen.str(), gen.str(), train.str(), 9);
  CHECK(with_placeholder.n_total == 4);
  CHECK(with_placeholder.n_prefilter_pass == 4);
  CHECK(with_placeholder.structural_valid_pct == 75.0);
  CHECK(with_placeholder.chemical_valid_pct == 75.0);
  CHECK(with_placeholder.un_rate == doctest::Approx(0.5));

  // Unreadable files land in the skip histogram but stay in n_total.
  write_text_atomic((gen.path() / "s4.cif").string(), "not a cif at all");
  MetricsReport with_bad = evaluate_batch(gen.str(), gen.str(), train.str(), 9);
  CHECK(with_bad.n_total == 5);
  CHECK(with_bad.n_prefilter_pass == 4);
  CHECK(with_bad.skip_counts.at("parse_error") == 1);

  oracle::TempDir empty("eval_empty");
  MetricsReport none = evaluate_batch(empty.str(), gen.str(), train.str(), 9);
  CHECK(none.n_total == 0);
  CHECK(std::isnan(none.d_rho));

  CHECK_THROWS_AS(evaluate_batch((empty.path() / "nope").string(), gen.str(), train.str(), 9),
                  Error);
}
