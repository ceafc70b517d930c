#pragma once

#include <span>
#include <string>
#include <vector>

#include "hmeqa/graph.hpp"

namespace hmeqa {

/// Open-ended classifier: logits = W·s + b. Parameters <prefix>.{W,b}.
template <typename T>
class OpenHead {
 public:
  OpenHead(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim, std::size_t classes,
           Rng& rng);

  Var<T> logits(Var<T> representation) const;
  Var<T> probs(Var<T> representation) const { return softmax(logits(representation)); }
  /// −log p_y from the logits via log-sum-exp.
  Var<T> loss(Var<T> logits, std::size_t target) const;
  std::size_t classes() const { return classes_; }

 private:
  std::size_t classes_;
  Parameter<T>* W_;
  Parameter<T>* b_;
};

/// Multiple-choice scorer: score = wᵀ·s + b (shape [1]). Parameters <prefix>.{w,b}.
template <typename T>
class ChoiceHead {
 public:
  ChoiceHead(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim, Rng& rng);

  Var<T> score(Var<T> representation) const;

 private:
  Parameter<T>* w_;
  Parameter<T>* b_;
};

/// Σ_{i≠p} max(0, margin − (s_p − s_i)) over a [K] score vector, in index order.
template <typename T>
Var<T> mc_loss(Var<T> scores, std::size_t positive, T margin);

/// Index of the largest entry; ties go to the lowest index.
std::size_t predict(std::span<const double> scores);

extern template class OpenHead<float>;
extern template class OpenHead<double>;
extern template class ChoiceHead<float>;
extern template class ChoiceHead<double>;

}  // namespace hmeqa
