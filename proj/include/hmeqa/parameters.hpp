#pragma once

#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>

#include "hmeqa/random.hpp"
#include "hmeqa/tensor.hpp"

namespace hmeqa {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Named trainable tensors in registration order. References handed out by
/// add() stay valid for the lifetime of the set.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  /// Registers a zero-initialized parameter; duplicate names are an error.
  Parameter<T>& add(const std::string& name, Shape shape);

  Parameter<T>* find(std::string_view name);
  const Parameter<T>* find(std::string_view name) const;
  Parameter<T>& at(std::string_view name);
  const Parameter<T>& at(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

  /// Copies values from a set with identical names and shapes.
  void assign_values(const ParameterSet& other);

 private:
  std::deque<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
template <typename T>
void init_glorot_uniform(Tensor<T>& tensor, std::size_t fan_in, std::size_t fan_out, Rng& rng);

template <typename T>
void init_uniform(Tensor<T>& tensor, double lo, double hi, Rng& rng);

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace hmeqa
