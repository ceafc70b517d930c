#include "hmeqa/answer_heads.hpp"

#include "hmeqa/errors.hpp"
#include "hmeqa/layers.hpp"

namespace hmeqa {

template <typename T>
OpenHead<T>::OpenHead(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
                      std::size_t classes, Rng& rng)
    : classes_(classes) {
  W_ = make_weight(params, prefix + ".W", classes, input_dim, rng);
  b_ = make_bias(params, prefix + ".b", classes);
}

template <typename T>
Var<T> OpenHead<T>::logits(Var<T> representation) const {
  return linear_sum(*representation.graph(), {{W_, representation}}, b_);
}

template <typename T>
Var<T> OpenHead<T>::loss(Var<T> logits, std::size_t target) const {
  if (target >= classes_) {
    throw ContractError("answer class " + std::to_string(target) + " outside " + std::to_string(classes_) +
                        " classes");
  }
  return softmax_cross_entropy(logits, target);
}

template <typename T>
ChoiceHead<T>::ChoiceHead(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim, Rng& rng) {
  w_ = make_score_vector(params, prefix + ".w", input_dim, rng);
  b_ = make_bias(params, prefix + ".b", 1);
}

template <typename T>
Var<T> ChoiceHead<T>::score(Var<T> representation) const {
  auto& g = *representation.graph();
  return add(sum(mul(bind(g, w_), representation)), bind(g, b_));
}

template <typename T>
Var<T> mc_loss(Var<T> scores, std::size_t positive, T margin) {
  const std::size_t k = scores.size();
  if (k < 2) throw ContractError("multiple-choice loss needs at least two candidates");
  if (positive >= k) {
    throw ContractError("positive index " + std::to_string(positive) + " outside " + std::to_string(k) +
                        " candidates");
  }
  if (!(margin > T{0})) throw ConfigError("margin must be positive");
  auto s_p = element(scores, positive);
  std::vector<Var<T>> terms;
  for (std::size_t i = 0; i < k; ++i) {
    if (i == positive) continue;
    terms.push_back(relu(affine(sub(s_p, element(scores, i)), T{-1}, margin)));
  }
  return sum(concat(terms));
}

std::size_t predict(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("cannot predict from an empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

template class OpenHead<float>;
template class OpenHead<double>;
template class ChoiceHead<float>;
template class ChoiceHead<double>;
template Var<float> mc_loss(Var<float>, std::size_t, float);
template Var<double> mc_loss(Var<double>, std::size_t, double);

}  // namespace hmeqa
