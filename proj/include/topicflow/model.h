#pragma once

#include <string>
#include <vector>

#include "topicflow/checkpoint.h"
#include "topicflow/rng.h"
#include "topicflow/tensor.h"

namespace topicflow {

struct TransformerConfig {
  int v_tok = 0;
  int t_topics = 0;  // topic mixture width feeding the gates
  int layers_enc = 2;
  int layers_dec = 2;
  int d_model = 128;
  int heads = 4;
  int ffn_dim = 256;
  int max_positions = 512;
  double dropout = 0.1;
  bool tied_output = true;
};

// How the contextualized gates run. kOn computes the gates; kOff bypasses the
// topic path entirely; kForceZero and kForceOne run the full blending formula
// with the gate pinned, which keeps the parameter set (and gradient shapes)
// identical to kOn while reproducing the bypassed (resp. fully topical) values.
enum class GatingMode { kOn, kOff, kForceZero, kForceOne };

GatingMode gating_mode_from_string(const std::string& name);
std::string to_string(GatingMode mode);

struct AttentionParams {
  Parameter wq, wk, wv, wo;  // each {d, d}
};

struct EncoderLayer {
  Parameter ln1_g, ln1_b;
  AttentionParams self_attn;
  Parameter ln2_g, ln2_b;
  Parameter ff1_w, ff1_b, ff2_w, ff2_b;
};

struct DecoderLayer {
  Parameter ln1_g, ln1_b;
  AttentionParams self_attn;
  Parameter ln2_g, ln2_b;
  AttentionParams cross_attn;
  Parameter ln3_g, ln3_b;
  Parameter ff1_w, ff1_b, ff2_w, ff2_b;
};

struct GateParams {
  Parameter we, be;          // encoder gate from h_cls: {d,d}, {1,d}
  Parameter w1d, w2d, bd;    // decoder gate from h'_cls and s_cls
  Parameter enc_topic_w, enc_topic_b;  // {d+T, d}, {1,d}, tanh
  Parameter dec_topic_w, dec_topic_b;
};

// Encoder output with the CLS state carried separately from the token rows.
// cross_mask keeps the 0/1 validity of each token row for cross-attention.
struct EncoderStates {
  Tensor h_cls;               // {1, d}
  Tensor tokens;              // {N-1, d}
  std::vector<double> cross_mask;  // length N-1, 1.0 real / 0.0 pad
};

// Optional per-forward context: dropout is applied only when an rng is given.
struct ForwardCtx {
  Rng* dropout_rng = nullptr;
};

// Pre-norm transformer encoder-decoder with CLS-prefixed inputs on both
// sides, sinusoidal positions, and topic gates blending each hidden state
// with a topic-conditioned transform of itself.
struct SummarizerModel {
  TransformerConfig cfg;

  Parameter embed;    // {V_tok, d}
  Parameter out_w;    // {d, V_tok}; used only when tied_output is false
  Parameter out_b;    // {1, V_tok}
  std::vector<EncoderLayer> enc_layers;
  Parameter enc_ln_g, enc_ln_b;
  std::vector<DecoderLayer> dec_layers;
  Parameter dec_ln_g, dec_ln_b;
  GateParams gate;

  SummarizerModel() = default;
  SummarizerModel(const TransformerConfig& cfg, const Rng& seed_rng);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<Parameter*> gate_parameters();

  // x_ids[0] must be CLS; x_mask marks real positions. Output rows are the
  // final-norm encoder states split into h_cls and the token rows.
  EncoderStates encode(const std::vector<int>& x_ids, const std::vector<double>& x_mask,
                       const ForwardCtx& ctx = {}) const;

  // Blends every encoder row (CLS included) with its topic-aware transform:
  // lambda = sigmoid(W_E h_cls + b_E), h' = lambda*c + (1-lambda)*h.
  EncoderStates encoder_gate(const EncoderStates& states, const Tensor& theta,
                             GatingMode mode) const;

  // Full-prefix decoder pass. prefix_ids[0] must be CLS; causal self-attention
  // plus cross-attention over the gated token states. Returns the gated
  // decoder states {M, d} (rows align with prefix positions).
  Tensor decode(const std::vector<int>& prefix_ids, const EncoderStates& gated,
                const Tensor& theta, GatingMode mode, const ForwardCtx& ctx = {}) const;

  // {M, d} -> {M, V_tok}; tied: logits = s E^T + b.
  Tensor project_logits(const Tensor& states) const;

  void save(const std::string& path) const;
  static SummarizerModel load(const std::string& path);

  // Checkpoint-container pieces, also used when saving jointly with the
  // topic model under a combined header.
  nlohmann::json config_json() const;
  static SummarizerModel from_config_json(const nlohmann::json& config);
  void append_tensors(Checkpoint& ck) const;
  void load_tensors(const Checkpoint& ck);  // throws IoError on shape mismatch

 private:
  Tensor positional_rows(int length) const;
  Tensor embed_sequence(const std::vector<int>& ids, const ForwardCtx& ctx) const;
  Tensor run_encoder_stack(Tensor x, const Tensor& self_mask, const ForwardCtx& ctx) const;
  Tensor run_decoder_stack(Tensor x, const EncoderStates& gated, const ForwardCtx& ctx) const;
  Tensor maybe_dropout(Tensor x, const ForwardCtx& ctx) const;
};

}  // namespace topicflow
