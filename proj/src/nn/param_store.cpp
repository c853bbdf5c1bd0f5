#include "arm3d/nn/param_store.hpp"

#include <cstring>

namespace arm3d::nn {

Parameter& ParamStore::add(const std::string& name, Matrix init) {
  if (contains(name)) throw UsageError("parameter already registered: " + name);
  Parameter p;
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.first_moment = Matrix::Zero(init.rows(), init.cols());
  p.second_moment = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  return entries_.emplace(name, std::move(p)).first->second;
}

Matrix& ParamStore::add_buffer(const std::string& name, Matrix init) {
  if (contains_buffer(name)) throw UsageError("buffer already registered: " + name);
  return buffers_.emplace(name, std::move(init)).first->second;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

Matrix& ParamStore::buffer(const std::string& name) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw UsageError("unknown buffer: " + name);
  return it->second;
}

const Matrix& ParamStore::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw UsageError("unknown buffer: " + name);
  return it->second;
}

void ParamStore::set_value(const std::string& name, const Matrix& value) {
  Parameter& p = at(name);
  require_shape(value, p.value.rows(), p.value.cols(), "set_value(" + name + ")");
  p.value = value;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : entries_) p.grad.setZero();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, p] : entries_) out.push_back(name);
  return out;
}

Index ParamStore::scalar_count() const {
  Index n = 0;
  for (const auto& [name, p] : entries_) n += p.value.size();
  return n;
}

namespace {

bool same_bits(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return a.size() == 0 ||
         std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

bool bitwise_equal(const ParamStore& a, const ParamStore& b) {
  if (a.entries().size() != b.entries().size() || a.buffers().size() != b.buffers().size()) {
    return false;
  }
  for (const auto& [name, p] : a.entries()) {
    if (!b.contains(name) || !same_bits(p.value, b.at(name).value)) return false;
  }
  for (const auto& [name, m] : a.buffers()) {
    if (!b.contains_buffer(name) || !same_bits(m, b.buffer(name))) return false;
  }
  return a.step_count() == b.step_count();
}

}  // namespace arm3d::nn
