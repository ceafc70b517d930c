#include "hmeqa/parameters.hpp"

#include <cmath>

#include "hmeqa/errors.hpp"

namespace hmeqa {

template <typename T>
Parameter<T>& ParameterSet<T>::add(const std::string& name, Shape shape) {
  if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
  index_.emplace(name, params_.size());
  Tensor<T> value(shape);
  Tensor<T> grad(std::move(shape));
  return params_.emplace_back(Parameter<T>{name, std::move(value), std::move(grad)});
}

template <typename T>
Parameter<T>* ParameterSet<T>::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

template <typename T>
Parameter<T>& ParameterSet<T>::at(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw ContractError("unknown parameter " + std::string(name));
}

template <typename T>
const Parameter<T>& ParameterSet<T>::at(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw ContractError("unknown parameter " + std::string(name));
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p.grad.fill(T{0});
}

template <typename T>
void ParameterSet<T>::assign_values(const ParameterSet& other) {
  if (other.size() != size()) throw ContractError("parameter sets differ in size");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& dst = params_[i];
    const auto& src = other.params_[i];
    if (dst.name != src.name || dst.value.shape() != src.value.shape()) {
      throw ContractError("parameter mismatch: " + dst.name + " vs " + src.name);
    }
    dst.value = src.value;
  }
}

template <typename T>
void init_uniform(Tensor<T>& tensor, double lo, double hi, Rng& rng) {
  for (auto& x : tensor.data()) x = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
void init_glorot_uniform(Tensor<T>& tensor, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  init_uniform(tensor, -limit, limit, rng);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template void init_uniform(Tensor<float>&, double, double, Rng&);
template void init_uniform(Tensor<double>&, double, double, Rng&);
template void init_glorot_uniform(Tensor<float>&, std::size_t, std::size_t, Rng&);
template void init_glorot_uniform(Tensor<double>&, std::size_t, std::size_t, Rng&);

}  // namespace hmeqa
