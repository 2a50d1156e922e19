#pragma once

#include <cstdint>

#include "arvrm/params.hpp"

namespace arvrm {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled-weight-decay Adam over a ParamStore. Frozen groups are skipped
/// entirely, so their tensors stay bit-identical across any number of steps.
/// Throws TrainError naming the tensor when a gradient is non-finite.
class AdamW {
 public:
  AdamW(ParamStore& store, AdamWConfig config);

  void step();
  std::int64_t step_count() const { return step_; }
  AdamWConfig& config() { return config_; }

 private:
  ParamStore& store_;
  AdamWConfig config_;
  std::int64_t step_ = 0;
};

}  // namespace arvrm
