#pragma once

// Softmax cross-entropy over an N x C logit matrix:
//   L = -(1/N) * sum_n log( exp(z[n, y_n]) / sum_c exp(z[n, c]) )
// Rows are shifted by their maximum before exponentiation, which also makes
// the value invariant under adding a constant to a row.

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "elsa/nn/tape.hpp"

namespace elsa::nn {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

template <typename Scalar>
void check_loss_args(const MatrixT<Scalar>& logits, std::span<const int> gold) {
  if (logits.rows() < 1) throw std::invalid_argument("cross entropy: need at least one row");
  if (logits.cols() < 2) throw std::invalid_argument("cross entropy: need at least two classes");
  if (static_cast<std::size_t>(logits.rows()) != gold.size())
    throw std::invalid_argument("cross entropy: " + std::to_string(logits.rows()) +
                                " logit rows but " + std::to_string(gold.size()) + " gold labels");
  for (int g : gold) {
    if (g < 0 || g >= logits.cols())
      throw std::out_of_range("cross entropy: gold index " + std::to_string(g) +
                              " outside [0, " + std::to_string(logits.cols()) + ")");
  }
}

}  // namespace detail

template <typename Scalar>
Scalar cross_entropy_loss(const MatrixT<Scalar>& logits, std::span<const int> gold) {
  detail::check_loss_args(logits, gold);
  using std::exp;
  using std::log;
  Scalar total = 0;
  for (Eigen::Index n = 0; n < logits.rows(); ++n) {
    const Scalar m = logits.row(n).maxCoeff();
    Scalar sum = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += exp(logits(n, c) - m);
    total += log(sum) - (logits(n, gold[static_cast<std::size_t>(n)]) - m);
  }
  return total / static_cast<Scalar>(logits.rows());
}

// d L / d logits = (softmax(logits) - onehot(gold)) / N
template <typename Scalar>
MatrixT<Scalar> loss_gradient(const MatrixT<Scalar>& logits, std::span<const int> gold) {
  detail::check_loss_args(logits, gold);
  using std::exp;
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(logits.rows());
  MatrixT<Scalar> g(logits.rows(), logits.cols());
  for (Eigen::Index n = 0; n < logits.rows(); ++n) {
    const Scalar m = logits.row(n).maxCoeff();
    Scalar sum = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      g(n, c) = exp(logits(n, c) - m);
      sum += g(n, c);
    }
    for (Eigen::Index c = 0; c < logits.cols(); ++c) g(n, c) = g(n, c) / sum * inv_n;
    g(n, gold[static_cast<std::size_t>(n)]) -= inv_n;
  }
  return g;
}

// Tape node for the mean cross-entropy of the rows of logits.
Var cross_entropy(Tape& t, Var logits, std::span<const int> gold);

}  // namespace elsa::nn
