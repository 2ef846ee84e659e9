#include "elsa/nn/optim.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "elsa/error.hpp"
#include "elsa/nn/loss.hpp"

namespace elsa::nn {

Var cross_entropy(Tape& t, Var logits, std::span<const int> gold) {
  const Matrix& z = t.value(logits);
  double loss = cross_entropy_loss<double>(z, gold);
  if (!std::isfinite(loss)) throw NumericError("non-finite cross-entropy loss");
  Matrix grad = loss_gradient<double>(z, gold);
  Matrix out(1, 1);
  out(0, 0) = loss;
  return t.record(std::move(out), {logits}, [logits, grad = std::move(grad)](Tape& t, const Matrix& g) {
    if (Matrix* gl = t.grad_target(logits)) *gl += grad * g(0, 0);
  });
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    p->zero_grad();
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
  double sq = 0.0;
  for (auto* p : params_) {
    if (p->trainable) sq += p->grad.squaredNorm();
  }
  last_norm_ = std::sqrt(sq);
  if (!std::isfinite(last_norm_)) throw NumericError("non-finite gradient norm");
  const double clip =
      (config_.clip_norm > 0.0 && last_norm_ > config_.clip_norm) ? config_.clip_norm / last_norm_ : 1.0;

  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.trainable) continue;
    Matrix g = p.grad * clip;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    if (config_.weight_decay > 0.0) p.value *= (1.0 - lr * config_.weight_decay);
    p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.epsilon);
  }
  zero_grad();
}

std::vector<Matrix> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (auto* p : params) out.push_back(p->value);
  return out;
}

void restore(const std::vector<Parameter*>& params, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

namespace {

constexpr char kMagic[8] = {'E', 'L', 'S', 'A', 'P', 'R', 'M', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated parameter archive");
  return v;
}

}  // namespace

void save_parameters(const std::filesystem::path& path, const std::vector<const Parameter*>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint64_t>(out, params.size());
  for (const auto* p : params) {
    write_pod<std::uint64_t>(out, p->name.size());
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * p->value.size()));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void load_parameters(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("'" + path.string() + "' is not a parameter archive");
  auto count = read_pod<std::uint64_t>(in);
  if (count != params.size())
    throw IoError("'" + path.string() + "' holds " + std::to_string(count) + " tensors, expected " +
                  std::to_string(params.size()));
  for (auto* p : params) {
    auto len = read_pod<std::uint64_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    auto rows = read_pod<std::uint64_t>(in);
    auto cols = read_pod<std::uint64_t>(in);
    if (name != p->name || static_cast<Eigen::Index>(rows) != p->value.rows() ||
        static_cast<Eigen::Index>(cols) != p->value.cols())
      throw IoError("parameter mismatch in '" + path.string() + "': found " + name + " " +
                    std::to_string(rows) + "x" + std::to_string(cols) + ", expected " + p->name);
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    if (!in) throw IoError("truncated parameter archive '" + path.string() + "'");
    p->zero_grad();
  }
}

}  // namespace elsa::nn
