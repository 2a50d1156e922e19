#include "arvrm/params.hpp"

#include "arvrm/errors.hpp"
#include "arvrm/kernels.hpp"

namespace arvrm {

int ParamStore::add_group(const std::string& name, bool frozen) {
  for (const auto& g : groups_) {
    if (g.name == name) {
      throw ConfigError("ParamStore: duplicate group name '" + name + "'");
    }
  }
  groups_.push_back(ParamGroup{name, frozen, {}});
  return static_cast<int>(groups_.size()) - 1;
}

ParamRef ParamStore::add_param(const std::string& group, const std::string& name,
                               Tensor init) {
  const int gi = group_index(group);
  auto& g = groups_[gi];
  for (const auto& p : g.params) {
    if (p.name == name) {
      throw ConfigError("ParamStore: duplicate param '" + group + "/" + name + "'");
    }
  }
  NamedParam p;
  p.name = name;
  p.grad = Tensor::zeros(init.shape);
  p.value = std::move(init);
  g.params.push_back(std::move(p));
  return ParamRef{gi, static_cast<int>(g.params.size()) - 1};
}

bool ParamStore::has_group(const std::string& name) const {
  for (const auto& g : groups_) {
    if (g.name == name) return true;
  }
  return false;
}

int ParamStore::group_index(const std::string& name) const {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].name == name) return static_cast<int>(i);
  }
  throw ConfigError("ParamStore: unknown group '" + name + "'");
}

ParamRef ParamStore::find(const std::string& group, const std::string& name) const {
  const int gi = group_index(group);
  const auto& g = groups_[gi];
  for (std::size_t i = 0; i < g.params.size(); ++i) {
    if (g.params[i].name == name) return ParamRef{gi, static_cast<int>(i)};
  }
  throw ConfigError("ParamStore: unknown param '" + group + "/" + name + "'");
}

void ParamStore::set_frozen(const std::string& group, bool frozen) {
  groups_[group_index(group)].frozen = frozen;
}

void ParamStore::zero_grads() {
  for (auto& g : groups_) {
    for (auto& p : g.params) p.grad.fill(0.0);
  }
}

std::size_t ParamStore::param_element_count(bool trainable_only) const {
  std::size_t total = 0;
  for (const auto& g : groups_) {
    if (trainable_only && g.frozen) continue;
    for (const auto& p : g.params) total += p.value.size();
  }
  return total;
}

std::uint64_t ParamStore::group_hash(const std::string& name) const {
  const auto& g = groups_[group_index(name)];
  std::uint64_t hash = fnv1a(name);
  for (const auto& p : g.params) {
    hash = fnv1a_bytes(p.name.data(), p.name.size(), hash);
    hash = fnv1a_bytes(p.value.data.data(), p.value.data.size() * sizeof(double), hash);
  }
  return hash;
}

std::uint64_t ParamStore::hash_groups(const std::vector<std::string>& names) const {
  std::uint64_t hash = 1469598103934665603ull;
  for (const auto& n : names) hash ^= group_hash(n) + 0x9e3779b97f4a7c15ull + (hash << 6);
  return hash;
}

GradBuffer::GradBuffer(const ParamStore& store) {
  grads_.resize(store.group_count());
  for (std::size_t gi = 0; gi < store.group_count(); ++gi) {
    const auto& g = store.group(static_cast<int>(gi));
    grads_[gi].reserve(g.params.size());
    for (const auto& p : g.params) grads_[gi].push_back(Tensor::zeros(p.value.shape));
  }
}

void GradBuffer::add_into(ParamStore& store) const {
  const auto& ops = kernels::active();
  for (std::size_t gi = 0; gi < grads_.size(); ++gi) {
    if (store.frozen(static_cast<int>(gi))) continue;
    auto& g = store.group(static_cast<int>(gi));
    for (std::size_t ti = 0; ti < grads_[gi].size(); ++ti) {
      const Tensor& src = grads_[gi][ti];
      Tensor& dst = g.params[ti].grad;
      ops.axpy(1.0, src.ptr(), dst.ptr(), src.size());
    }
  }
}

void GradBuffer::clear() {
  for (auto& group : grads_) {
    for (auto& t : group) t.fill(0.0);
  }
}

}  // namespace arvrm
