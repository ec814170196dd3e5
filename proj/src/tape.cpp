#include "xtal/tape.hpp"

#include <cmath>

#include "xtal/errors.hpp"

namespace xtal::ad {
namespace {

void require(bool cond, const char* what) {
  if (!cond) throw_data("shape_mismatch", what);
}

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x / M_SQRT2)); }

}  // namespace

int Tape::push(Mat value, bool needs_grad, std::function<void()> backprop) {
  Node n;
  n.grad = Mat::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Mat value, bool needs_grad) { return push(std::move(value), needs_grad, {}); }

int Tape::add(int a, int b) {
  require(v(a).rows() == v(b).rows() && v(a).cols() == v(b).cols(), "add: shape mismatch");
  int out = push(v(a) + v(b), ng(a) || ng(b), {});
  nodes_.back().backprop = [this, a, b, out] {
    if (ng(a)) g(a) += g(out);
    if (ng(b)) g(b) += g(out);
  };
  return out;
}

int Tape::sub(int a, int b) {
  require(v(a).rows() == v(b).rows() && v(a).cols() == v(b).cols(), "sub: shape mismatch");
  int out = push(v(a) - v(b), ng(a) || ng(b), {});
  nodes_.back().backprop = [this, a, b, out] {
    if (ng(a)) g(a) += g(out);
    if (ng(b)) g(b) -= g(out);
  };
  return out;
}

int Tape::mul(int a, int b) {
  require(v(a).rows() == v(b).rows() && v(a).cols() == v(b).cols(), "mul: shape mismatch");
  int out = push(v(a).cwiseProduct(v(b)), ng(a) || ng(b), {});
  nodes_.back().backprop = [this, a, b, out] {
    if (ng(a)) g(a) += g(out).cwiseProduct(v(b));
    if (ng(b)) g(b) += g(out).cwiseProduct(v(a));
  };
  return out;
}

int Tape::add_scalar(int a, double c) {
  int out = push(v(a).array() + c, ng(a), {});
  nodes_.back().backprop = [this, a, out] {
    if (ng(a)) g(a) += g(out);
  };
  return out;
}

int Tape::scale(int a, double c) {
  int out = push(v(a) * c, ng(a), {});
  nodes_.back().backprop = [this, a, out, c] {
    if (ng(a)) g(a) += c * g(out);
  };
  return out;
}

int Tape::matmul(int a, int b) {
  require(v(a).cols() == v(b).rows(), "matmul: inner dimension mismatch");
  int out = push(v(a) * v(b), ng(a) || ng(b), {});
  nodes_.back().backprop = [this, a, b, out] {
    if (ng(a)) g(a) += g(out) * v(b).transpose();
    if (ng(b)) g(b) += v(a).transpose() * g(out);
  };
  return out;
}

int Tape::transpose(int a) {
  int out = push(v(a).transpose(), ng(a), {});
  nodes_.back().backprop = [this, a, out] {
    if (ng(a)) g(a) += g(out).transpose();
  };
  return out;
}

int Tape::add_rowvec(int a, int r) {
  require(v(r).rows() == 1 && v(r).cols() == v(a).cols(), "add_rowvec: bad row vector");
  int out = push(v(a).rowwise() + v(r).row(0), ng(a) || ng(r), {});
  nodes_.back().backprop = [this, a, r, out] {
    if (ng(a)) g(a) += g(out);
    if (ng(r)) g(r) += g(out).colwise().sum();
  };
  return out;
}

int Tape::mul_rowvec(int a, int r) {
  require(v(r).rows() == 1 && v(r).cols() == v(a).cols(), "mul_rowvec: bad row vector");
  Mat val = v(a).array().rowwise() * v(r).row(0).array();
  int out = push(std::move(val), ng(a) || ng(r), {});
  nodes_.back().backprop = [this, a, r, out] {
    if (ng(a)) g(a) += (g(out).array().rowwise() * v(r).row(0).array()).matrix();
    if (ng(r)) g(r) += g(out).cwiseProduct(v(a)).colwise().sum();
  };
  return out;
}

int Tape::layer_norm(int a, double eps) {
  const Mat& x = v(a);
  const double d = static_cast<double>(x.cols());
  Eigen::VectorXd mean = x.rowwise().mean();
  Mat centered = x.colwise() - mean;
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / d) + eps).sqrt().inverse();
  Mat y = centered.array().colwise() * inv_std.array();
  int out = push(std::move(y), ng(a), {});
  nodes_.back().backprop = [this, a, out, inv_std, d] {
    if (!ng(a)) return;
    const Mat& y = v(out);
    const Mat& go = g(out);
    Eigen::VectorXd gmean = go.rowwise().mean();
    Eigen::VectorXd gy_mean = go.cwiseProduct(y).rowwise().sum() / d;
    Mat dx = go.colwise() - gmean;
    dx -= (y.array().colwise() * gy_mean.array()).matrix();
    g(a) += (dx.array().colwise() * inv_std.array()).matrix();
  };
  return out;
}

int Tape::gelu(int a) {
  const Mat& x = v(a);
  Mat y = x.unaryExpr([](double t) { return t * norm_cdf(t); });
  int out = push(std::move(y), ng(a), {});
  nodes_.back().backprop = [this, a, out] {
    if (!ng(a)) return;
    Mat d = v(a).unaryExpr([](double t) { return norm_cdf(t) + t * norm_pdf(t); });
    g(a) += g(out).cwiseProduct(d);
  };
  return out;
}

int Tape::softmax_rows(int a) {
  const Mat& x = v(a);
  Mat y(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    Eigen::RowVectorXd row = x.row(i);
    double m = row.maxCoeff();
    Eigen::RowVectorXd e = (row.array() - m).exp();
    y.row(i) = e / e.sum();
  }
  int out = push(std::move(y), ng(a), {});
  nodes_.back().backprop = [this, a, out] {
    if (!ng(a)) return;
    const Mat& y = v(out);
    const Mat& go = g(out);
    Eigen::VectorXd dot = go.cwiseProduct(y).rowwise().sum();
    Mat dx = go.colwise() - dot;
    g(a) += y.cwiseProduct(dx);
  };
  return out;
}

int Tape::block(int a, int row0, int col0, int rows, int cols) {
  require(row0 >= 0 && col0 >= 0 && row0 + rows <= v(a).rows() && col0 + cols <= v(a).cols(),
          "block: out of bounds");
  int out = push(v(a).block(row0, col0, rows, cols), ng(a), {});
  nodes_.back().backprop = [this, a, out, row0, col0, rows, cols] {
    if (ng(a)) g(a).block(row0, col0, rows, cols) += g(out);
  };
  return out;
}

int Tape::hcat(int a, int b) {
  require(v(a).rows() == v(b).rows(), "hcat: row mismatch");
  Mat val(v(a).rows(), v(a).cols() + v(b).cols());
  val << v(a), v(b);
  int out = push(std::move(val), ng(a) || ng(b), {});
  nodes_.back().backprop = [this, a, b, out] {
    int ca = static_cast<int>(v(a).cols());
    if (ng(a)) g(a) += g(out).leftCols(ca);
    if (ng(b)) g(b) += g(out).rightCols(g(out).cols() - ca);
  };
  return out;
}

int Tape::vcat(int a, int b) {
  require(v(a).cols() == v(b).cols(), "vcat: column mismatch");
  Mat val(v(a).rows() + v(b).rows(), v(a).cols());
  val << v(a), v(b);
  int out = push(std::move(val), ng(a) || ng(b), {});
  nodes_.back().backprop = [this, a, b, out] {
    int ra = static_cast<int>(v(a).rows());
    if (ng(a)) g(a) += g(out).topRows(ra);
    if (ng(b)) g(b) += g(out).bottomRows(g(out).rows() - ra);
  };
  return out;
}

int Tape::sum_all(int a) {
  Mat val(1, 1);
  val(0, 0) = v(a).sum();
  int out = push(std::move(val), ng(a), {});
  nodes_.back().backprop = [this, a, out] {
    if (ng(a)) g(a).array() += g(out)(0, 0);
  };
  return out;
}

void Tape::backward(int node) {
  require(v(node).rows() == 1 && v(node).cols() == 1, "backward: target must be scalar");
  for (auto& n : nodes_) n.grad.setZero();
  g(node)(0, 0) = 1.0;
  for (int i = node; i >= 0; --i) {
    auto& n = nodes_[static_cast<size_t>(i)];
    if (n.backprop && n.needs_grad) n.backprop();
  }
}

}  // namespace xtal::ad
