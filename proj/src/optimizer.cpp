#include "hmeqa/optimizer.hpp"

#include <cmath>

#include "hmeqa/errors.hpp"

namespace hmeqa {

template <typename T>
Adam<T>::Adam(const ParameterSet<T>& params, Settings settings) : settings_(settings) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

template <typename T>
void Adam<T>::step(ParameterSet<T>& params) {
  if (params.size() != m_.size()) throw DimensionError("optimizer state does not match the parameter set");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(settings_.beta1, t);
  const double correction2 = 1.0 - std::pow(settings_.beta2, t);
  std::size_t k = 0;
  for (auto& p : params) {
    auto& m = m_[k];
    auto& v = v_[k];
    ++k;
    if (p.grad.shape() != p.value.shape() || m.shape() != p.value.shape()) {
      throw DimensionError("gradient of '" + p.name + "' has shape " + shape_string(p.grad.shape()) +
                           ", parameter has " + shape_string(p.value.shape()));
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      const double mi = settings_.beta1 * m[i] + (1.0 - settings_.beta1) * g;
      const double vi = settings_.beta2 * v[i] + (1.0 - settings_.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = settings_.learning_rate * (mi / correction1) / (std::sqrt(vi / correction2) + settings_.epsilon);
      p.value[i] = static_cast<T>(p.value[i] - update);
    }
  }
}

template <typename T>
double gradient_norm(const ParameterSet<T>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    for (T g : p.grad.data()) sq += static_cast<double>(g) * g;
  return std::sqrt(sq);
}

template <typename T>
double clip_gradients(ParameterSet<T>& params, double max_norm) {
  const double norm = gradient_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params)
      for (auto& g : p.grad.data()) g = static_cast<T>(g * factor);
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double gradient_norm(const ParameterSet<float>&);
template double gradient_norm(const ParameterSet<double>&);
template double clip_gradients(ParameterSet<float>&, double);
template double clip_gradients(ParameterSet<double>&, double);

}  // namespace hmeqa
