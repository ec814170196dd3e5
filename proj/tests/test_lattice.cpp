#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "xtal/elements.hpp"
#include "xtal/errors.hpp"
#include "xtal/lattice.hpp"
#include "xtal/rng.hpp"

using namespace xtal;

namespace {

Mat3 cubic(double a) { return Mat3::Identity() * a; }

Mat3 random_lattice(Rng& rng) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = 10.0 * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("lattice normalization") {
  CHECK((normalize_lattice(cubic(46.7425)) - Mat3::Identity()).norm() == 0.0);
  CHECK(normalize_lattice(Mat3::Zero()).norm() == 0.0);
  CHECK(normalize_lattice(Mat3::Identity())(0, 0) ==
        doctest::Approx(0.0213938).epsilon(1e-5));

  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Mat3 m = random_lattice(rng);
    CHECK((denormalize_lattice(normalize_lattice(m)) - m).cwiseAbs().maxCoeff() < 1e-12);
  }

  Mat3 bad = Mat3::Identity();
  bad(1, 2) = std::nan("");
  CHECK_THROWS_AS(normalize_lattice(bad), Error);
}

TEST_CASE("cell volume") {
  CHECK(cell_volume(cubic(2.0)) == doctest::Approx(8.0));
  CHECK(cell_volume(Mat3::Identity()) == doctest::Approx(1.0));
  Mat3 singular;
  singular << 1, 0, 0, 1, 0, 0, 0, 0, 1;
  CHECK(cell_volume(singular) == doctest::Approx(0.0));
  // |det| is orientation-free: swapping rows keeps the volume.
  Mat3 swapped;
  swapped << 0, 1, 0, 1, 0, 0, 0, 0, 1;
  CHECK(cell_volume(swapped) == doctest::Approx(1.0));
}

TEST_CASE("lattice params round trip") {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    LatticeParams p;
    p.a = 2.0 + 8.0 * rng.uniform();
    p.b = 2.0 + 8.0 * rng.uniform();
    p.c = 2.0 + 8.0 * rng.uniform();
    p.alpha = 60.0 + 60.0 * rng.uniform();
    p.beta = 60.0 + 60.0 * rng.uniform();
    p.gamma = 60.0 + 60.0 * rng.uniform();
    Mat3 L;
    try {
      L = lattice_from_params(p);
    } catch (const Error&) {
      continue;  // inconsistent random triple, legitimately rejected
    }
    LatticeParams q = lattice_params(L);
    CHECK(q.a == doctest::Approx(p.a).epsilon(1e-9));
    CHECK(q.b == doctest::Approx(p.b).epsilon(1e-9));
    CHECK(q.c == doctest::Approx(p.c).epsilon(1e-9));
    CHECK(q.alpha == doctest::Approx(p.alpha).epsilon(1e-9));
    CHECK(q.beta == doctest::Approx(p.beta).epsilon(1e-9));
    CHECK(q.gamma == doctest::Approx(p.gamma).epsilon(1e-9));
  }
}

TEST_CASE("impossible cells are rejected") {
  CHECK_THROWS_AS(lattice_from_params({0.0, 1, 1, 90, 90, 90}), Error);
  CHECK_THROWS_AS(lattice_from_params({1, 1, 1, 0.0, 90, 90}), Error);
  CHECK_THROWS_AS(lattice_from_params({1, 1, 1, 185.0, 90, 90}), Error);
  CHECK_THROWS_AS(lattice_from_params({1, 1, 1, 170, 170, 170}), Error);  // angle sum > 360
}

TEST_CASE("minimum periodic distance") {
  std::vector<Vec3> one = {{0, 0, 0}};
  CHECK(min_periodic_distance(cubic(3.0), one) == doctest::Approx(3.0));

  std::vector<Vec3> pair = {{0, 0, 0}, {0.5, 0.5, 0.5}};
  CHECK(min_periodic_distance(cubic(1.0), pair) == doctest::Approx(std::sqrt(0.75)));

  std::vector<Vec3> close = {{0, 0, 0}, {0.049, 0, 0}};
  CHECK(min_periodic_distance(cubic(10.0), close) == doctest::Approx(0.49));

  CHECK_THROWS_AS(min_periodic_distance(Mat3::Zero(), one), Error);
  CHECK_THROWS_AS(min_periodic_distance(cubic(3.0), std::vector<Vec3>{}), Error);
}

TEST_CASE("periodic distance is translation-invariant") {
  Rng rng(17);
  Mat3 L;
  L << 4.2, 0.3, 0, -0.5, 5.0, 0.2, 0.1, 0.4, 6.1;
  std::vector<Vec3> sites;
  for (int i = 0; i < 6; ++i)
    sites.push_back(wrap_frac(Vec3(rng.uniform(), rng.uniform(), rng.uniform())));
  double base = min_periodic_distance(L, sites);
  for (int trial = 0; trial < 10; ++trial) {
    Vec3 shift(rng.uniform(), rng.uniform(), rng.uniform());
    std::vector<Vec3> moved;
    for (const auto& s : sites) moved.push_back(wrap_frac(Vec3(s + shift)));
    CHECK(min_periodic_distance(L, moved) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("mass density") {
  CrystalStructure nacl;
  nacl.lattice = cubic(5.64);
  for (int i = 0; i < 4; ++i) nacl.species.push_back(11);
  for (int i = 0; i < 4; ++i) nacl.species.push_back(17);
  nacl.frac_coords.assign(8, Vec3::Zero());  // density ignores positions

  double mass = 4.0 * element_info(11).atomic_mass + 4.0 * element_info(17).atomic_mass;
  double expected = mass * 1.66053906660e-24 / (5.64 * 5.64 * 5.64 * 1e-24);
  CHECK(mass_density(nacl) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(mass_density(nacl) == doctest::Approx(2.165).epsilon(0.005));

  CrystalStructure h;
  h.lattice = cubic(10.0);
  h.species = {1};
  h.frac_coords = {{0, 0, 0}};
  CHECK(mass_density(h) == doctest::Approx(0.001674).epsilon(1e-3));

  CrystalStructure doubled = nacl;
  doubled.lattice = cubic(11.28);
  CHECK(mass_density(doubled) == doctest::Approx(mass_density(nacl) / 8.0).epsilon(1e-12));

  CrystalStructure degenerate = nacl;
  degenerate.lattice = Mat3::Zero();
  CHECK_THROWS_AS(mass_density(degenerate), Error);
}
