#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices. A Tape
// records one forward pass; backward() walks it in reverse and accumulates
// gradients into parameters (and into inputs created with Tape::input).

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace elsa::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Var {
  std::size_t index = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  // With track_parameters = false, parameters behave as constants; the tape
  // then never writes to shared model state.
  explicit Tape(bool track_parameters = true) : track_parameters_(track_parameters) {}

  Var constant(Matrix value);
  Var input(Matrix value);
  // Gradients flow into p.grad only when this tape tracks parameters; a
  // non-tracking tape never writes to p, so const models are safe to use.
  Var parameter(const Parameter& p);

  const Matrix& value(Var v) const;
  // Gradient of the last backward() root w.r.t. v (zeros if unreached).
  Matrix gradient(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void backward(Var root);

  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Matrix value, const std::vector<Var>& parents, BackwardFn fn);
  // Storage to accumulate v's gradient into, or nullptr when v needs none.
  Matrix* grad_target(Var v);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };
  bool track_parameters_;
  std::vector<Node> nodes_;
};

// --- operations --------------------------------------------------------------

Var matmul(Tape& t, Var a, Var b);
// a * b^T
Var matmul_nt(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
// Adds a 1 x n row to every row of a.
Var add_row(Tape& t, Var a, Var row);
Var scale(Tape& t, Var a, double s);
Var relu(Tape& t, Var a);
Var gelu(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var softmax_rows(Tape& t, Var a);
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);
Var gather_rows(Tape& t, Var table, std::span<const int> rows);
Var slice_cols(Tape& t, Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
// 1 x n column-wise maximum over rows; ties resolve to the first row.
Var max_rows(Tape& t, Var a);
// Row p holds rows p..p+k-1 of x side by side; rows past the end read as zero.
Var unfold(Tape& t, Var x, Eigen::Index k, Eigen::Index windows);

// --- initialization ----------------------------------------------------------

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
Matrix normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

}  // namespace elsa::nn
