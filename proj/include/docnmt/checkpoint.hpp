#pragma once

#include <map>
#include <string>
#include <vector>

#include "docnmt/tensor.hpp"

namespace docnmt {

/// Named parameter collection. Iteration order is the lexicographic order of
/// names, which makes serialization and averaging deterministic.
class ParameterSet {
 public:
  void add(const std::string& name, Tensor tensor);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  void set_requires_grad(bool flag);
  /// Deep copy of values; the copy's leaves keep this set's requires_grad flags.
  ParameterSet clone() const;

 private:
  std::map<std::string, Tensor> params_;
};

/// A saved parameter set plus free-form metadata (model kind, config fingerprint).
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  ParameterSet params;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary container, little-endian throughout:
//   "DNMTCKPT" u32 version
//   u32 n_meta  { u32 len, key bytes, u32 len, value bytes }*
//   u64 n_params { u32 len, name bytes, u32 rank, u64 dims[rank], f64 values[] }*
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

/// Copies values from `source` into `target`; names and shapes must match exactly.
void assign_parameters(ParameterSet& target, const ParameterSet& source);

}  // namespace docnmt
