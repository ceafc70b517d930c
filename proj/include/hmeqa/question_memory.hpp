#pragma once

#include <string>
#include <vector>

#include "hmeqa/encoders.hpp"
#include "hmeqa/graph.hpp"

namespace hmeqa {

template <typename T>
struct QuestionMemoryState {
  Var<T> memory;  // [S×D]
  Var<T> hidden;  // h^q [D]
};

struct QuestionStepTrace {
  std::vector<double> alpha;
  std::vector<double> beta;
};

/// Question memory: per-slot convex write followed by an attentional read.
///
///   c   = σ(W_oc·o + W_hc·h + b_c)
///   α_i ∝ exp(v_aᵀ·tanh(W_ca·c + W_ha·h + b_a + U_a·m_i))
///   m_i ← α_i·c + (1 − α_i)·m_i
///   β_i ∝ exp(v_bᵀ·tanh(W_cb·c + W_hb·h + b_b + U_b·m_i))     (post-write M)
///   r   = Σ β_i·m_i
///   h   = σ(W_oh·o + W_rh·r + W_hh·h + b_h)
///
/// Parameter names: <prefix>.{W_oc,W_hc,b_c,W_ca,W_ha,b_a,v_a,U_a,W_cb,W_hb,
/// b_b,v_b,U_b,W_oh,W_rh,W_hh,b_h}.
template <typename T>
class QuestionMemory {
 public:
  struct Options {
    bool strict_eq = false;
  };

  struct Write {
    Var<T> weights;  // α
    Var<T> memory;
  };

  struct Read {
    Var<T> weights;  // β
    Var<T> content;  // r
  };

  struct Step {
    QuestionMemoryState<T> state;
    Var<T> alpha, beta;
  };

  struct Output {
    Var<T> question_features;  // [N×D], zero past valid_len
    std::size_t valid_len = 0;
    std::vector<QuestionStepTrace> trace;
    QuestionMemoryState<T> final_state;
  };

  QuestionMemory(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
                 std::size_t memory_dim, std::size_t slots, Rng& rng, Options options = {});

  std::size_t memory_dim() const { return memory_dim_; }
  std::size_t slots() const { return slots_; }
  Options& options() { return options_; }

  QuestionMemoryState<T> initial_state(Graph<T>& g) const;

  Var<T> content(Var<T> encoded, Var<T> h_prev) const;
  Var<T> write_weights(Var<T> content, Var<T> h_prev, Var<T> memory) const;
  /// m_i ← α_i·c + (1 − α_i)·m_i.
  Var<T> blend(Var<T> memory, Var<T> alpha, Var<T> content) const;
  Write write(Var<T> memory, Var<T> content, Var<T> h_prev) const;
  Read read(Var<T> memory, Var<T> content, Var<T> h_prev) const;
  Var<T> hidden_update(Var<T> encoded, Var<T> read_content, Var<T> h_prev) const;

  Step step(const QuestionMemoryState<T>& prev, Var<T> encoded) const;
  Output process(const EncodedSequence<T>& question) const;

 private:
  std::size_t memory_dim_;
  std::size_t slots_;
  Options options_;
  Parameter<T>* W_oc_;
  Parameter<T>* W_hc_;
  Parameter<T>* b_c_;
  Parameter<T>* W_ca_;
  Parameter<T>* W_ha_;
  Parameter<T>* b_a_;
  Parameter<T>* v_a_;
  Parameter<T>* U_a_;
  Parameter<T>* W_cb_;
  Parameter<T>* W_hb_;
  Parameter<T>* b_b_;
  Parameter<T>* v_b_;
  Parameter<T>* U_b_;
  Parameter<T>* W_oh_;
  Parameter<T>* W_rh_;
  Parameter<T>* W_hh_;
  Parameter<T>* b_h_;
};

extern template class QuestionMemory<float>;
extern template class QuestionMemory<double>;

}  // namespace hmeqa
