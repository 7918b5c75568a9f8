#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lptgnn/rng.hpp"
#include "lptgnn/tape.hpp"
#include "lptgnn/tensor.hpp"

namespace lptgnn {

// Named parameter tensors with gradient slots and Adam moments, plus
// non-trainable buffers (for running statistics). std::map keeps iteration
// order stable so updates and serialization are deterministic.
class ParamStore {
public:
  Tensor& create(const std::string& name, Tensor init);
  Tensor& create_buffer(const std::string& name, Tensor init);

  bool has(const std::string& name) const { return params_.count(name) > 0; }
  bool has_buffer(const std::string& name) const { return buffers_.count(name) > 0; }

  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  Tensor& buffer(const std::string& name);
  const Tensor& buffer(const std::string& name) const;

  std::vector<std::string> names() const;
  std::vector<std::string> buffer_names() const;
  std::size_t size() const { return params_.size(); }
  std::int64_t scalar_count() const;

  void zero_grads();
  // Bias-corrected Adam update over all parameters; zeroes gradient slots.
  // A non-finite gradient aborts with the offending parameter name.
  void adam_step(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                 double epsilon = 1e-8);
  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t s) { step_ = s; }

private:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
  };
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  std::map<std::string, Entry> params_;
  std::map<std::string, Tensor> buffers_;
  std::int64_t step_ = 0;
};

// Per-tape binding of every parameter as a gradient-tracked leaf. After
// backward(), harvest() copies tape gradients into the store's slots;
// parameters the loss never reached keep zero gradient.
class BoundParams {
public:
  BoundParams(Tape& tape, ParamStore& store);

  Var operator[](const std::string& name) const;
  std::vector<Var> collect(const std::string& prefix,
                           const std::vector<std::string>& suffixes) const;
  void harvest();

private:
  Tape* tape_;
  ParamStore* store_;
  std::map<std::string, Var> vars_;
};

double glorot_std(std::int64_t fan_in, std::int64_t fan_out);
Tensor normal_tensor(Shape shape, double stddev, SplitRng& rng);

}  // namespace lptgnn
