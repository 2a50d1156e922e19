#include "arvrm/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace arvrm::kernels {

namespace {

std::atomic<const Ops*> g_active{nullptr};

const Ops* resolve(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return &scalar_ops();
    case Backend::kAvx2: {
      const Ops* table = avx2_ops();
      return table ? table : &scalar_ops();
    }
    case Backend::kAuto:
    default: {
      const Ops* table = avx2_ops();
      return table ? table : &scalar_ops();
    }
  }
}

Backend env_backend() {
  const char* env = std::getenv("ARVRM_KERNEL_BACKEND");
  if (env == nullptr) return Backend::kAuto;
  if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
  if (std::strcmp(env, "avx2") == 0) return Backend::kAvx2;
  return Backend::kAuto;
}

const Ops* init_active() {
  const Ops* table = resolve(env_backend());
  g_active.store(table, std::memory_order_relaxed);
  return table;
}

}  // namespace

const Ops& active() {
  const Ops* table = g_active.load(std::memory_order_relaxed);
  if (table == nullptr) table = init_active();
  return *table;
}

void set_backend(Backend backend) {
  g_active.store(resolve(backend), std::memory_order_relaxed);
}

Backend detected_backend() {
  return avx2_ops() != nullptr ? Backend::kAvx2 : Backend::kScalar;
}

std::string backend_name() {
  return active().name;
}

}  // namespace arvrm::kernels
