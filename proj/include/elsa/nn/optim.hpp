#pragma once

#include <filesystem>
#include <vector>

#include "elsa/nn/tape.hpp"

namespace elsa::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled
  double clip_norm = 1.0;     // global gradient norm; <= 0 disables
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  // Applies one update from the accumulated gradients, then zeroes them.
  void step();
  void zero_grad();
  double last_grad_norm() const { return last_norm_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamConfig config_;
  long steps_ = 0;
  double last_norm_ = 0.0;
};

std::vector<Matrix> snapshot(const std::vector<Parameter*>& params);
void restore(const std::vector<Parameter*>& params, const std::vector<Matrix>& values);

// Binary archive of named matrices. Loading checks names and shapes against
// the destination parameters.
void save_parameters(const std::filesystem::path& path, const std::vector<const Parameter*>& params);
void load_parameters(const std::filesystem::path& path, const std::vector<Parameter*>& params);

}  // namespace elsa::nn
