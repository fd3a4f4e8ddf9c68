#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgx/tensor.hpp"

namespace kgx {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Named learnable tensors with per-parameter Adam moments. Updates are lazy
// at row granularity: a row whose gradient is entirely zero is left bitwise
// untouched (moments included), so a step only moves parameters reachable
// from the tasks that produced the gradients.
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor init);

  std::size_t count() const { return params_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& value(std::size_t i) const { return params_[i]; }
  Tensor& value(std::size_t i) { return params_[i]; }
  const Tensor& value(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  std::uint64_t step() const { return step_; }

  // One Adam step with bias correction. grads is aligned with parameter
  // indices; an empty tensor means "no gradient". Throws on non-finite
  // gradients, naming the parameter. clip_norm <= 0 disables clipping.
  void adam_step(const std::vector<Tensor>& grads, const AdamConfig& cfg,
                 double clip_norm = 0.0);

  void save(std::ostream& out, const std::string& meta) const;
  // Returns the stored meta block; parameters and moments reload bit-exact.
  static ParameterStore load(std::istream& in, std::string* meta);

  bool bitwise_equal(const ParameterStore& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::vector<Tensor> moment1_;
  std::vector<Tensor> moment2_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::uint64_t step_ = 0;
};

}  // namespace kgx
