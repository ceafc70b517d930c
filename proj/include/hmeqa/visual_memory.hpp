#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hmeqa/encoders.hpp"
#include "hmeqa/graph.hpp"

namespace hmeqa {

enum class Stream { kMotion = 0, kAppearance = 1 };

template <typename T>
struct VisualMemoryState {
  Var<T> memory;  // [S×D]
  Var<T> h_motion;
  Var<T> h_appearance;
  Var<T> h_video;
};

/// Attention distributions of one visual memory step.
struct VisualStepTrace {
  std::vector<double> alpha_motion;
  std::vector<double> alpha_appearance;
  std::vector<double> epsilon;  // motion, appearance, retain
  std::vector<double> beta;
};

/// Heterogeneous external memory jointly written by the motion and appearance
/// streams.
///
/// Per step t, for each stream k ∈ {m, a}:
///   c^k   = σ(W_oc^k·o^k + W_hc^k·h^k + b_c^k)
///   α^k_i ∝ exp(v_a^kᵀ·tanh(W_ca^k·c^k + W_ha^k·h^k + b_a^k + U_a^k·m_i))
/// then, shared across streams,
///   ε     = softmax(V_e·tanh(W_he·h^v + W_me·c^m + W_ae·c^a + b_e))       (3 heads)
///   M     = ε₁·(α^m ⊗ c^m) + ε₂·(α^a ⊗ c^a) + ε₃·M
///   β_i   ∝ exp(v_bᵀ·tanh(W_hb·h^v + W_mb·c^m + W_ab·c^a + b_b + U_b·m_i))
///   r     = Σ β_i·m_i
///   h^k   = σ(W_hh^k·h^k + W_oh^k·o^k + W_rh^k·r + b_h^k)
///   h^v   = σ(W_hh^v·h^v + W_rh^v·r + b_h^v)
/// With strict_eq the U·m_i slot terms are dropped, which makes α and β
/// uniform. The write heads see the memory before the update, the read head
/// after it.
///
/// Parameter names: <prefix>.<motion|appearance>.{W_oc,W_hc,b_c,W_ca,W_ha,b_a,
/// v_a,U_a,W_hh,W_oh,W_rh,b_h}, <prefix>.{W_he,W_me,W_ae,b_e,V_e,W_hb,W_mb,
/// W_ab,b_b,v_b,U_b}, <prefix>.video.{W_hh,W_rh,b_h}. V_e is [3×D].
template <typename T>
class VisualMemory {
 public:
  struct Options {
    bool strict_eq = false;
    /// Replaces the learned modality weights with a constant distribution.
    std::optional<std::array<double, 3>> forced_modality_weights;
  };

  struct StreamBank {
    Parameter<T>* W_oc;
    Parameter<T>* W_hc;
    Parameter<T>* b_c;
    Parameter<T>* W_ca;
    Parameter<T>* W_ha;
    Parameter<T>* b_a;
    Parameter<T>* v_a;
    Parameter<T>* U_a;
    Parameter<T>* W_hh;
    Parameter<T>* W_oh;
    Parameter<T>* W_rh;
    Parameter<T>* b_h;
  };

  struct Read {
    Var<T> weights;  // β [S]
    Var<T> content;  // r [D]
  };

  struct Hidden {
    Var<T> motion;
    Var<T> appearance;
    Var<T> video;
  };

  struct Step {
    VisualMemoryState<T> state;
    Var<T> alpha_motion, alpha_appearance, epsilon, beta;
  };

  struct Output {
    Var<T> video_features;  // h^v per frame [N×D], zero past valid_len
    std::size_t valid_len = 0;
    std::vector<VisualStepTrace> trace;
    VisualMemoryState<T> final_state;
  };

  VisualMemory(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim,
               std::size_t memory_dim, std::size_t slots, Rng& rng, Options options = {});

  std::size_t memory_dim() const { return memory_dim_; }
  std::size_t slots() const { return slots_; }
  Options& options() { return options_; }

  VisualMemoryState<T> initial_state(Graph<T>& g) const;

  Var<T> content(Var<T> encoded, Var<T> h_prev, Stream stream) const;
  Var<T> write_weights(Var<T> content, Var<T> h_prev, Var<T> memory, Stream stream) const;
  Var<T> modality_weights(Var<T> h_video, Var<T> content_motion, Var<T> content_appearance) const;
  Var<T> update(Var<T> memory, Var<T> alpha_motion, Var<T> alpha_appearance, Var<T> content_motion,
                Var<T> content_appearance, Var<T> epsilon) const;
  Read read(Var<T> memory, Var<T> h_video, Var<T> content_motion, Var<T> content_appearance) const;
  Hidden hidden_update(const VisualMemoryState<T>& prev, Var<T> encoded_motion, Var<T> encoded_appearance,
                       Var<T> read_content) const;

  /// content → write weights → modality weights → update → read → hidden.
  Step step(const VisualMemoryState<T>& prev, Var<T> encoded_motion, Var<T> encoded_appearance) const;

  /// Runs one step per valid frame from a zero state. Both streams must share
  /// the same valid length.
  Output process(const EncodedSequence<T>& motion, const EncodedSequence<T>& appearance) const;

 private:
  const StreamBank& bank(Stream s) const { return banks_[static_cast<int>(s)]; }

  std::size_t memory_dim_;
  std::size_t slots_;
  Options options_;
  std::array<StreamBank, 2> banks_;
  Parameter<T>* W_he_;
  Parameter<T>* W_me_;
  Parameter<T>* W_ae_;
  Parameter<T>* b_e_;
  Parameter<T>* V_e_;
  Parameter<T>* W_hb_;
  Parameter<T>* W_mb_;
  Parameter<T>* W_ab_;
  Parameter<T>* b_b_;
  Parameter<T>* v_b_;
  Parameter<T>* U_b_;
  Parameter<T>* W_hh_video_;
  Parameter<T>* W_rh_video_;
  Parameter<T>* b_h_video_;
};

extern template class VisualMemory<float>;
extern template class VisualMemory<double>;

}  // namespace hmeqa
