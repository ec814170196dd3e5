#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace xtal::ad {

using Mat = Eigen::MatrixXd;

// Reverse-mode autodiff over dense matrices. Nodes are created in topological
// order by construction; backward() replays the recorded closures in reverse.
// Handles are plain ints into the tape. The op set is exactly what the
// transformer needs; every op has an analytically exact adjoint, so gradients
// are exact up to floating point roundoff.
class Tape {
 public:
  int leaf(Mat value, bool needs_grad);
  int constant(Mat value) { return leaf(std::move(value), false); }

  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);  // elementwise
  int add_scalar(int a, double c);
  int scale(int a, double c);
  int matmul(int a, int b);
  int transpose(int a);
  int add_rowvec(int a, int r);  // r is [1, cols], broadcast over rows
  int mul_rowvec(int a, int r);
  int layer_norm(int a, double eps);  // rowwise, no affine
  int gelu(int a);                    // exact erf form
  int softmax_rows(int a);
  int block(int a, int row0, int col0, int rows, int cols);
  int hcat(int a, int b);
  int vcat(int a, int b);
  int sum_all(int a);  // [1,1]

  const Mat& value(int n) const { return nodes_[static_cast<size_t>(n)].value; }
  const Mat& grad(int n) const { return nodes_[static_cast<size_t>(n)].grad; }

  // Seeds d(node)/d(node) = 1 (node must be [1,1]) and accumulates gradients
  // into every needs_grad node reachable from it.
  void backward(int node);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> backprop;  // empty for leaves
    bool needs_grad = false;
  };

  int push(Mat value, bool needs_grad, std::function<void()> backprop);
  bool ng(int n) const { return nodes_[static_cast<size_t>(n)].needs_grad; }
  Mat& g(int n) { return nodes_[static_cast<size_t>(n)].grad; }
  const Mat& v(int n) const { return nodes_[static_cast<size_t>(n)].value; }

  std::vector<Node> nodes_;
};

}  // namespace xtal::ad
