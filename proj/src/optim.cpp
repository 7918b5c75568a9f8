#include "lptgnn/optim.hpp"

#include <cmath>

#include "lptgnn/errors.hpp"

namespace lptgnn {

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("unknown parameter: " + name);
  return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParamStore::create(const std::string& name, Tensor init) {
  if (params_.count(name)) throw ShapeError("parameter already exists: " + name);
  Entry e;
  e.grad = Tensor::zeros_like(init);
  e.m = Tensor::zeros_like(init);
  e.v = Tensor::zeros_like(init);
  e.value = std::move(init);
  return params_.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParamStore::create_buffer(const std::string& name, Tensor init) {
  if (buffers_.count(name)) throw ShapeError("buffer already exists: " + name);
  return buffers_.emplace(name, std::move(init)).first->second;
}

Tensor& ParamStore::value(const std::string& name) { return entry(name).value; }
const Tensor& ParamStore::value(const std::string& name) const { return entry(name).value; }
Tensor& ParamStore::grad(const std::string& name) { return entry(name).grad; }

Tensor& ParamStore::buffer(const std::string& name) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw ShapeError("unknown buffer: " + name);
  return it->second;
}

const Tensor& ParamStore::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw ShapeError("unknown buffer: " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, e] : params_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamStore::buffer_names() const {
  std::vector<std::string> out;
  out.reserve(buffers_.size());
  for (const auto& [name, t] : buffers_) out.push_back(name);
  return out;
}

std::int64_t ParamStore::scalar_count() const {
  std::int64_t total = 0;
  for (const auto& [name, e] : params_) total += e.value.numel();
  return total;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : params_) e.grad.fill(0.0);
}

void ParamStore::adam_step(double learning_rate, double beta1, double beta2, double epsilon) {
  for (auto& [name, e] : params_)
    if (!e.grad.all_finite())
      throw TrainingError("non-finite gradient for parameter " + name);
  ++step_;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (auto& [name, e] : params_) {
    for (std::int64_t i = 0; i < e.value.numel(); ++i) {
      double g = e.grad[i];
      e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * g;
      e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * g * g;
      double mhat = e.m[i] / bc1;
      double vhat = e.v[i] / bc2;
      e.value[i] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
    }
    e.grad.fill(0.0);
  }
}

BoundParams::BoundParams(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {
  for (const std::string& name : store.names())
    vars_.emplace(name, tape.leaf(store.value(name), true));
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ShapeError("parameter not bound: " + name);
  return it->second;
}

std::vector<Var> BoundParams::collect(const std::string& prefix,
                                      const std::vector<std::string>& suffixes) const {
  std::vector<Var> out;
  out.reserve(suffixes.size());
  for (const std::string& s : suffixes) out.push_back((*this)[prefix + s]);
  return out;
}

void BoundParams::harvest() {
  for (const auto& [name, var] : vars_)
    if (tape_->has_grad(var)) store_->grad(name).add_(tape_->grad(var));
}

double glorot_std(std::int64_t fan_in, std::int64_t fan_out) {
  return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
}

Tensor normal_tensor(Shape shape, double stddev, SplitRng& rng) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

}  // namespace lptgnn
