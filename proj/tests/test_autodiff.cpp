#include <doctest.h>

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "oracles.hpp"
#include "xtal/errors.hpp"
#include "xtal/rng.hpp"
#include "xtal/tape.hpp"

using xtal::Rng;
using xtal::ad::Mat;
using xtal::ad::Tape;

namespace {

Mat randn(Rng& rng, int rows, int cols) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

using Builder = std::function<int(Tape&, const std::vector<int>&)>;

// Checks the tape gradient of a scalar-valued graph against central
// differences on every entry of every input.
void fd_check(const std::vector<Mat>& inputs, const Builder& build, double tol = 2e-6) {
  Tape tape;
  std::vector<int> handles;
  for (const auto& m : inputs) handles.push_back(tape.leaf(m, true));
  int out = build(tape, handles);
  REQUIRE(tape.value(out).rows() == 1);
  REQUIRE(tape.value(out).cols() == 1);
  tape.backward(out);

  auto eval = [&](const std::vector<Mat>& xs) {
    Tape t;
    std::vector<int> hs;
    for (const auto& m : xs) hs.push_back(t.leaf(m, false));
    return t.value(build(t, hs))(0, 0);
  };

  const double h = 1e-6;
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (int i = 0; i < inputs[k].rows(); ++i)
      for (int j = 0; j < inputs[k].cols(); ++j) {
        auto plus = inputs, minus = inputs;
        plus[k](i, j) += h;
        minus[k](i, j) -= h;
        double fd = (eval(plus) - eval(minus)) / (2.0 * h);
        double an = tape.grad(handles[k])(i, j);
        CAPTURE(k);
        CAPTURE(i);
        CAPTURE(j);
        CHECK(oracle::rel_err(fd, an) < tol);
      }
  }
}

// Weighting the op output before summing gives every entry a distinct
// adjoint, which catches layout and transposition mistakes that a plain
// sum would mask.
Builder weighted(Mat w, const std::function<int(Tape&, const std::vector<int>&)>& op) {
  return [w = std::move(w), op](Tape& t, const std::vector<int>& in) {
    return t.sum_all(t.mul(op(t, in), t.constant(w)));
  };
}

}  // namespace

TEST_CASE("finite differences validate every op") {
  Rng rng(31415);
  Mat a = randn(rng, 3, 4);
  Mat b = randn(rng, 3, 4);
  Mat w34 = randn(rng, 3, 4);

  fd_check({a, b}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.add(in[0], in[1]);
           }));
  fd_check({a, b}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.sub(in[0], in[1]);
           }));
  fd_check({a, b}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.mul(in[0], in[1]);
           }));
  fd_check({a}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.add_scalar(in[0], 2.5);
           }));
  fd_check({a}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.scale(in[0], -1.7);
           }));

  Mat m = randn(rng, 4, 5);
  Mat w35 = randn(rng, 3, 5);
  fd_check({a, m}, weighted(w35, [](Tape& t, const std::vector<int>& in) {
             return t.matmul(in[0], in[1]);
           }));

  Mat w43 = randn(rng, 4, 3);
  fd_check({a}, weighted(w43, [](Tape& t, const std::vector<int>& in) {
             return t.transpose(in[0]);
           }));

  Mat r = randn(rng, 1, 4);
  fd_check({a, r}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.add_rowvec(in[0], in[1]);
           }));
  fd_check({a, r}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.mul_rowvec(in[0], in[1]);
           }));

  fd_check({a}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.layer_norm(in[0], 1e-5);
           }));
  fd_check({a}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.gelu(in[0]);
           }));
  fd_check({a}, weighted(w34, [](Tape& t, const std::vector<int>& in) {
             return t.softmax_rows(in[0]);
           }));

  Mat big = randn(rng, 5, 6);
  Mat w23 = randn(rng, 2, 3);
  fd_check({big}, weighted(w23, [](Tape& t, const std::vector<int>& in) {
             return t.block(in[0], 1, 2, 2, 3);
           }));

  Mat w38 = randn(rng, 3, 8);
  fd_check({a, b}, weighted(w38, [](Tape& t, const std::vector<int>& in) {
             return t.hcat(in[0], in[1]);
           }));
  Mat w64 = randn(rng, 6, 4);
  fd_check({a, b}, weighted(w64, [](Tape& t, const std::vector<int>& in) {
             return t.vcat(in[0], in[1]);
           }));

  fd_check({a}, [](Tape& t, const std::vector<int>& in) { return t.sum_all(in[0]); });
}

TEST_CASE("a composite expression differentiates correctly") {
  Rng rng(99);
  Mat x = randn(rng, 4, 6);
  Mat w = randn(rng, 6, 6);
  Mat bias = randn(rng, 1, 6);
  Mat mix = randn(rng, 4, 6);
  fd_check({x, w, bias}, weighted(mix, [](Tape& t, const std::vector<int>& in) {
             int h = t.add_rowvec(t.matmul(in[0], in[1]), in[2]);
             int g = t.gelu(t.layer_norm(h, 1e-5));
             return t.softmax_rows(g);
           }));
}

TEST_CASE("sum_all gradient is exactly ones") {
  Rng rng(5);
  Tape tape;
  int x = tape.leaf(randn(rng, 3, 7), true);
  tape.backward(tape.sum_all(x));
  CHECK((tape.grad(x) - Mat::Ones(3, 7)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fan-out accumulates gradients") {
  Rng rng(6);
  Mat xv = randn(rng, 2, 3);
  Tape tape;
  int x = tape.leaf(xv, true);
  int f = tape.sum_all(tape.add(tape.mul(x, x), tape.scale(x, 3.0)));
  tape.backward(f);
  Mat want = 2.0 * xv.array() + 3.0;
  CHECK((tape.grad(x) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward can be replayed without drift") {
  Rng rng(7);
  Tape tape;
  int x = tape.leaf(randn(rng, 3, 3), true);
  int f = tape.sum_all(tape.gelu(tape.mul(x, x)));
  tape.backward(f);
  Mat first = tape.grad(x);
  tape.backward(f);
  CHECK((tape.grad(x) - first).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shape mismatches are rejected") {
  Rng rng(8);
  Tape tape;
  int a = tape.leaf(randn(rng, 2, 3), true);
  int b = tape.leaf(randn(rng, 3, 2), true);
  CHECK_THROWS_AS(tape.add(a, b), xtal::Error);
  CHECK_THROWS_AS(tape.mul(a, b), xtal::Error);
  CHECK_THROWS_AS(tape.matmul(a, a), xtal::Error);
  CHECK_THROWS_AS(tape.backward(a), xtal::Error);
}
