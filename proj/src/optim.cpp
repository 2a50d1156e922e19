#include "arvrm/optim.hpp"

#include <cmath>

#include "arvrm/errors.hpp"

namespace arvrm {

AdamW::AdamW(ParamStore& store, AdamWConfig config)
    : store_(store), config_(config) {}

void AdamW::step() {
  ++step_;
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t gi = 0; gi < store_.group_count(); ++gi) {
    auto& group = store_.group(static_cast<int>(gi));
    if (group.frozen) continue;
    for (auto& p : group.params) {
      if (p.adam_m.data.empty()) {
        p.adam_m = Tensor::zeros(p.value.shape);
        p.adam_v = Tensor::zeros(p.value.shape);
      }
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad.data[i];
        if (!std::isfinite(g)) {
          throw TrainError("adamw: non-finite gradient in '" + group.name + "/" + p.name + "'");
        }
        double& m = p.adam_m.data[i];
        double& v = p.adam_v.data[i];
        m = config_.beta1 * m + (1.0 - config_.beta1) * g;
        v = config_.beta2 * v + (1.0 - config_.beta2) * g * g;
        const double m_hat = m / bias1;
        const double v_hat = v / bias2;
        p.value.data[i] -= config_.lr * (m_hat / (std::sqrt(v_hat) + config_.eps) +
                                         config_.weight_decay * p.value.data[i]);
      }
    }
  }
}

}  // namespace arvrm
