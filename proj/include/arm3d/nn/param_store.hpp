#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arm3d/core.hpp"

namespace arm3d::nn {

/// A learnable tensor with its gradient slot and Adam moments.
struct Parameter {
  Matrix value;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;
};

/// Named collection of learnable matrices plus non-learnable buffers
/// (batchnorm running statistics). Names are dotted paths such as
/// "arm3d.objectness.h1.weight". Iteration order is lexicographic.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Matrix init);
  Matrix& add_buffer(const std::string& name, Matrix init);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  bool contains_buffer(const std::string& name) const { return buffers_.count(name) != 0; }

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  Matrix& buffer(const std::string& name);
  const Matrix& buffer(const std::string& name) const;

  void set_value(const std::string& name, const Matrix& value);
  void zero_grad();

  std::map<std::string, Parameter>& entries() { return entries_; }
  const std::map<std::string, Parameter>& entries() const { return entries_; }
  const std::map<std::string, Matrix>& buffers() const { return buffers_; }
  std::map<std::string, Matrix>& buffers() { return buffers_; }

  std::vector<std::string> names() const;
  Index scalar_count() const;

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }

 private:
  std::map<std::string, Parameter> entries_;
  std::map<std::string, Matrix> buffers_;
  std::int64_t step_count_ = 0;
};

/// True when both stores hold the same names, shapes and bit-identical
/// values (parameters and buffers).
bool bitwise_equal(const ParamStore& a, const ParamStore& b);

}  // namespace arm3d::nn
