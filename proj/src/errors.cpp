#include "arvrm/errors.hpp"

#include <iostream>
#include <mutex>

namespace arvrm {

void log_warn(const std::string& message) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[warn] " << message << '\n';
}

}  // namespace arvrm
