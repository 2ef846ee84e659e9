#include "elsa/nn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace elsa::nn {

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::input(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(const Parameter& p) {
  Node n;
  n.param = const_cast<Parameter*>(&p);
  n.requires_grad = track_parameters_ && p.trainable;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v.index];
  return n.param ? n.param->value : n.value;
}

Matrix Tape::gradient(Var v) const {
  const Node& n = nodes_[v.index];
  if (n.param) return n.param->grad;
  if (n.grad.size() == 0) return Matrix::Zero(value(v).rows(), value(v).cols());
  return n.grad;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(parents), std::move(fn));
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (auto p : parents) n.requires_grad = n.requires_grad || nodes_[p.index].requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Matrix* Tape::grad_target(Var v) {
  Node& n = nodes_[v.index];
  if (!n.requires_grad) return nullptr;
  if (n.param) return &n.param->grad;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return &n.grad;
}

void Tape::backward(Var root) {
  const Matrix& rv = value(root);
  if (rv.rows() != 1 || rv.cols() != 1) throw std::invalid_argument("backward root must be 1x1");
  for (auto& n : nodes_) {
    if (!n.param) n.grad.resize(0, 0);
  }
  if (Matrix* g = grad_target(root)) (*g)(0, 0) += 1.0;
  for (std::size_t i = root.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

// --- operations --------------------------------------------------------------

Var matmul(Tape& t, Var a, Var b) {
  Matrix out = t.value(a) * t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) ga->noalias() += g * t.value(b).transpose();
    if (Matrix* gb = t.grad_target(b)) gb->noalias() += t.value(a).transpose() * g;
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  Matrix out = t.value(a) * t.value(b).transpose();
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) ga->noalias() += g * t.value(b);
    if (Matrix* gb = t.grad_target(b)) gb->noalias() += g.transpose() * t.value(a);
  });
}

Var add(Tape& t, Var a, Var b) {
  if (t.value(a).rows() != t.value(b).rows() || t.value(a).cols() != t.value(b).cols())
    throw std::invalid_argument("add: shape mismatch");
  Matrix out = t.value(a) + t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) *ga += g;
    if (Matrix* gb = t.grad_target(b)) *gb += g;
  });
}

Var add_row(Tape& t, Var a, Var row) {
  const Matrix& r = t.value(row);
  if (r.rows() != 1 || r.cols() != t.value(a).cols())
    throw std::invalid_argument("add_row: shape mismatch");
  Matrix out = t.value(a).rowwise() + r.row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) *ga += g;
    if (Matrix* gr = t.grad_target(row)) *gr += g.colwise().sum();
  });
}

Var scale(Tape& t, Var a, double s) {
  Matrix out = t.value(a) * s;
  return t.record(std::move(out), {a}, [a, s](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) *ga += g * s;
  });
}

Var relu(Tape& t, Var a) {
  Matrix out = t.value(a).cwiseMax(0.0);
  return t.record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a))
      *ga += (t.value(a).array() > 0.0).select(g, 0.0).matrix();
  });
}

Var gelu(Tape& t, Var a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  const Matrix& x = t.value(a);
  Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  return t.record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) {
      Matrix d = t.value(a).unaryExpr([](double v) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
      *ga += g.cwiseProduct(d);
    }
  });
}

Var tanh(Tape& t, Var a) {
  Matrix out = t.value(a).array().tanh().matrix();
  Matrix y = out;
  return t.record(std::move(out), {a}, [a, y = std::move(y)](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) *ga += g.cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

Var softmax_rows(Tape& t, Var a) {
  const Matrix& x = t.value(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  Matrix ycopy = y;
  return t.record(std::move(y), {a}, [a, ycopy = std::move(ycopy)](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) {
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        double dot = g.row(r).dot(ycopy.row(r));
        ga->row(r) += (ycopy.row(r).array() * (g.row(r).array() - dot)).matrix();
      }
    }
  });
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  const Matrix& xv = t.value(x);
  const Matrix& gv = t.value(gamma);
  const Matrix& bv = t.value(beta);
  const Eigen::Index n = xv.cols();
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    double mu = xv.row(r).mean();
    double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = ((xv.row(r).array() - mu) * inv_std(r)).matrix();
  }
  Matrix out = (xhat.array().rowwise() * gv.row(0).array()).matrix();
  out.rowwise() += bv.row(0);
  return t.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n](
                      Tape& t, const Matrix& g) {
                    if (Matrix* gg = t.grad_target(gamma))
                      *gg += g.cwiseProduct(xhat).colwise().sum();
                    if (Matrix* gb = t.grad_target(beta)) *gb += g.colwise().sum();
                    if (Matrix* gx = t.grad_target(x)) {
                      const Matrix& gv = t.value(gamma);
                      for (Eigen::Index r = 0; r < g.rows(); ++r) {
                        Eigen::RowVectorXd dxhat = g.row(r).cwiseProduct(gv.row(0));
                        double mean_d = dxhat.mean();
                        double mean_dx = dxhat.dot(xhat.row(r)) / static_cast<double>(n);
                        gx->row(r) += inv_std(r) * (dxhat.array() - mean_d -
                                                    xhat.row(r).array() * mean_dx)
                                                       .matrix();
                      }
                    }
                  });
}

Var gather_rows(Tape& t, Var table, std::span<const int> rows) {
  const Matrix& tv = t.value(table);
  Matrix out(static_cast<Eigen::Index>(rows.size()), tv.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= tv.rows()) throw std::out_of_range("gather_rows: bad row index");
    out.row(static_cast<Eigen::Index>(r)) = tv.row(rows[r]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return t.record(std::move(out), {table}, [table, idx = std::move(idx)](Tape& t, const Matrix& g) {
    if (Matrix* gt = t.grad_target(table)) {
      for (std::size_t r = 0; r < idx.size(); ++r)
        gt->row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
    }
  });
}

Var slice_cols(Tape& t, Var a, Eigen::Index start, Eigen::Index count) {
  Matrix out = t.value(a).middleCols(start, count);
  return t.record(std::move(out), {a}, [a, start, count](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) ga->middleCols(start, count) += g;
  });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Eigen::Index rows = t.value(parts.front()).rows();
  Eigen::Index cols = 0;
  for (auto p : parts) {
    if (t.value(p).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += t.value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (auto p : parts) {
    out.middleCols(c, t.value(p).cols()) = t.value(p);
    c += t.value(p).cols();
  }
  return t.record(std::move(out), parts, [parts](Tape& t, const Matrix& g) {
    Eigen::Index c = 0;
    for (auto p : parts) {
      Eigen::Index w = t.value(p).cols();
      if (Matrix* gp = t.grad_target(p)) *gp += g.middleCols(c, w);
      c += w;
    }
  });
}

Var max_rows(Tape& t, Var a) {
  const Matrix& x = t.value(a);
  if (x.rows() == 0) throw std::invalid_argument("max_rows: empty input");
  Matrix out(1, x.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < x.rows(); ++r)
      if (x(r, c) > x(best, c)) best = r;
    arg[static_cast<std::size_t>(c)] = best;
    out(0, c) = x(best, c);
  }
  return t.record(std::move(out), {a}, [a, arg = std::move(arg)](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_target(a)) {
      for (std::size_t c = 0; c < arg.size(); ++c)
        (*ga)(arg[c], static_cast<Eigen::Index>(c)) += g(0, static_cast<Eigen::Index>(c));
    }
  });
}

Var unfold(Tape& t, Var x, Eigen::Index k, Eigen::Index windows) {
  const Matrix& xv = t.value(x);
  const Eigen::Index d = xv.cols();
  Matrix out = Matrix::Zero(windows, k * d);
  for (Eigen::Index p = 0; p < windows; ++p)
    for (Eigen::Index j = 0; j < k && p + j < xv.rows(); ++j)
      out.block(p, j * d, 1, d) = xv.row(p + j);
  return t.record(std::move(out), {x}, [x, k, windows, d](Tape& t, const Matrix& g) {
    if (Matrix* gx = t.grad_target(x)) {
      for (Eigen::Index p = 0; p < windows; ++p)
        for (Eigen::Index j = 0; j < k && p + j < gx->rows(); ++j)
          gx->row(p + j) += g.block(p, j * d, 1, d);
    }
  });
}

// --- initialization ----------------------------------------------------------

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace elsa::nn
