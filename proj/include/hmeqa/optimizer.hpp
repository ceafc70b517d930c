#pragma once

#include <cstdint>
#include <vector>

#include "hmeqa/parameters.hpp"

namespace hmeqa {

/// Bias-corrected Adam over a whole parameter set.
template <typename T>
class Adam {
 public:
  struct Settings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam(const ParameterSet<T>& params, Settings settings);

  /// θ ← θ − lr·m̂/(√v̂ + eps) using the gradients held in `params`.
  void step(ParameterSet<T>& params);

  std::uint64_t steps() const { return steps_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  Settings settings_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t steps_ = 0;
};

/// Global L2 norm of all gradients.
template <typename T>
double gradient_norm(const ParameterSet<T>& params);

/// Rescales every gradient so the global norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_gradients(ParameterSet<T>& params, double max_norm);

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace hmeqa
