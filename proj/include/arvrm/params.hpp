#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arvrm/tensor.hpp"

namespace arvrm {

/// Address of one parameter tensor inside a ParamStore.
struct ParamRef {
  int group = -1;
  int tensor = -1;
  bool valid() const { return group >= 0 && tensor >= 0; }
};

struct NamedParam {
  std::string name;
  Tensor value;
  Tensor grad;    // same shape, zeroed between steps
  Tensor adam_m;  // optimizer state, lazily sized by AdamW
  Tensor adam_v;
};

struct ParamGroup {
  std::string name;
  bool frozen = false;
  std::vector<NamedParam> params;
};

/// Named parameter tensors organized in groups with a freeze flag per group.
/// A frozen group receives no gradient accumulation and no optimizer updates;
/// gradients still flow THROUGH its tensors to earlier nodes.
class ParamStore {
 public:
  int add_group(const std::string& name, bool frozen = false);
  ParamRef add_param(const std::string& group, const std::string& name, Tensor init);

  bool has_group(const std::string& name) const;
  int group_index(const std::string& name) const;  // throws ConfigError if absent
  ParamRef find(const std::string& group, const std::string& name) const;

  ParamGroup& group(int index) { return groups_[index]; }
  const ParamGroup& group(int index) const { return groups_[index]; }
  std::size_t group_count() const { return groups_.size(); }

  NamedParam& param(ParamRef ref) { return groups_[ref.group].params[ref.tensor]; }
  const NamedParam& param(ParamRef ref) const { return groups_[ref.group].params[ref.tensor]; }
  Tensor& value(ParamRef ref) { return param(ref).value; }
  const Tensor& value(ParamRef ref) const { return param(ref).value; }

  bool frozen(int group_index) const { return groups_[group_index].frozen; }
  void set_frozen(const std::string& group, bool frozen);

  void zero_grads();
  std::size_t param_element_count(bool trainable_only = false) const;

  /// FNV hash of the raw value bytes of one group; used by freeze audits and
  /// encoder fingerprints.
  std::uint64_t group_hash(const std::string& name) const;
  std::uint64_t hash_groups(const std::vector<std::string>& names) const;

 private:
  std::vector<ParamGroup> groups_;
};

/// Per-parameter gradient buffer mirroring a ParamStore layout. Workers
/// accumulate into private buffers; the trainer folds them back in a fixed
/// order so results do not depend on thread count.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamStore& store);
  Tensor& grad(ParamRef ref) { return grads_[ref.group][ref.tensor]; }
  void add_into(ParamStore& store) const;  // skips frozen groups
  void clear();

 private:
  std::vector<std::vector<Tensor>> grads_;
};

}  // namespace arvrm
