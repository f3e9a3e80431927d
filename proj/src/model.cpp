#include "topicflow/model.h"

#include <cmath>

#include "topicflow/checkpoint.h"
#include "topicflow/corpus.h"
#include "topicflow/ops.h"

namespace topicflow {

namespace {

Parameter init_weight(const std::string& name, std::vector<int> shape, const Rng& root,
                      double scale) {
  Parameter p(name, Tensor::zeros(std::move(shape), true));
  Rng rng = root.derive("init:" + name);
  for (double& v : *p.value.data) v = scale * rng.normal();
  return p;
}

Parameter init_const(const std::string& name, std::vector<int> shape, double v) {
  Parameter p(name, Tensor::full(std::move(shape), v, true));
  return p;
}

AttentionParams init_attention(const std::string& prefix, int d, const Rng& root) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionParams a;
  a.wq = init_weight(prefix + ".wq", {d, d}, root, s);
  a.wk = init_weight(prefix + ".wk", {d, d}, root, s);
  a.wv = init_weight(prefix + ".wv", {d, d}, root, s);
  a.wo = init_weight(prefix + ".wo", {d, d}, root, s);
  return a;
}

Tensor multi_head(const AttentionParams& p, const Tensor& q_in, const Tensor& kv_in,
                  const Tensor& add_mask, int heads) {
  Tensor q = ops::matmul(q_in, p.wq.value);
  Tensor k = ops::matmul(kv_in, p.wk.value);
  Tensor v = ops::matmul(kv_in, p.wv.value);
  const int d = q.shape[1];
  const int dh = d / heads;
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    outs.push_back(ops::attention(ops::slice_cols(q, h * dh, dh),
                                  ops::slice_cols(k, h * dh, dh),
                                  ops::slice_cols(v, h * dh, dh), add_mask));
  }
  return ops::matmul(ops::concat_cols(outs), p.wo.value);
}

Tensor key_padding_mask(int query_rows, const std::vector<double>& key_mask) {
  Tensor m = Tensor::zeros({query_rows, static_cast<int>(key_mask.size())});
  for (int i = 0; i < query_rows; ++i) {
    for (size_t j = 0; j < key_mask.size(); ++j) {
      if (key_mask[j] == 0.0) m.set(i, static_cast<int>(j), ops::kMaskedScore);
    }
  }
  return m;
}

Tensor causal_mask(int rows) {
  Tensor m = Tensor::zeros({rows, rows});
  for (int i = 0; i < rows; ++i)
    for (int j = i + 1; j < rows; ++j) m.set(i, j, ops::kMaskedScore);
  return m;
}

Tensor broadcast_row(const Tensor& row, int rows) {
  return ops::matmul(Tensor::full({rows, 1}, 1.0), row);
}

Tensor feed_forward(const Tensor& x, const Parameter& w1, const Parameter& b1,
                    const Parameter& w2, const Parameter& b2) {
  Tensor h = ops::relu(ops::add_rows(ops::matmul(x, w1.value), b1.value));
  return ops::add_rows(ops::matmul(h, w2.value), b2.value);
}

// lambda {1,d} blends the topic transform of every row with the original:
// out = lambda*c + (1-lambda)*x, where c = tanh([x, theta] W + b).
Tensor blend_rows(const Tensor& x, const Tensor& theta, const Tensor& lambda,
                  const Parameter& topic_w, const Parameter& topic_b) {
  const int rows = x.shape[0];
  Tensor u = ops::concat_cols({x, broadcast_row(theta, rows)});
  Tensor c = ops::tanh(ops::add_rows(ops::matmul(u, topic_w.value), topic_b.value));
  Tensor keep = ops::sub(Tensor::full({1, x.shape[1]}, 1.0), lambda);
  return ops::add(ops::mul_rows(c, lambda), ops::mul_rows(x, keep));
}

}  // namespace

GatingMode gating_mode_from_string(const std::string& name) {
  if (name == "on") return GatingMode::kOn;
  if (name == "off") return GatingMode::kOff;
  if (name == "force_zero") return GatingMode::kForceZero;
  if (name == "force_one") return GatingMode::kForceOne;
  throw IoError("unknown gating mode '" + name +
                "' (expected on|off|force_zero|force_one)");
}

std::string to_string(GatingMode mode) {
  switch (mode) {
    case GatingMode::kOn: return "on";
    case GatingMode::kOff: return "off";
    case GatingMode::kForceZero: return "force_zero";
    case GatingMode::kForceOne: return "force_one";
  }
  return "?";
}

SummarizerModel::SummarizerModel(const TransformerConfig& cfg_in, const Rng& root)
    : cfg(cfg_in) {
  if (cfg.d_model % cfg.heads != 0) {
    throw ShapeError("model width " + std::to_string(cfg.d_model) +
                     " not divisible by " + std::to_string(cfg.heads) + " heads");
  }
  const int d = cfg.d_model;
  const double ds = 1.0 / std::sqrt(static_cast<double>(d));
  const double fs = 1.0 / std::sqrt(static_cast<double>(cfg.ffn_dim));
  const double ts = 1.0 / std::sqrt(static_cast<double>(d + cfg.t_topics));

  embed = init_weight("sum.embed", {cfg.v_tok, d}, root, ds);
  out_b = init_const("sum.out_b", {1, cfg.v_tok}, 0.0);
  if (!cfg.tied_output) out_w = init_weight("sum.out_w", {d, cfg.v_tok}, root, ds);

  for (int l = 0; l < cfg.layers_enc; ++l) {
    const std::string p = "sum.enc" + std::to_string(l);
    EncoderLayer layer;
    layer.ln1_g = init_const(p + ".ln1_g", {d}, 1.0);
    layer.ln1_b = init_const(p + ".ln1_b", {d}, 0.0);
    layer.self_attn = init_attention(p + ".self", d, root);
    layer.ln2_g = init_const(p + ".ln2_g", {d}, 1.0);
    layer.ln2_b = init_const(p + ".ln2_b", {d}, 0.0);
    layer.ff1_w = init_weight(p + ".ff1_w", {d, cfg.ffn_dim}, root, ds);
    layer.ff1_b = init_const(p + ".ff1_b", {1, cfg.ffn_dim}, 0.0);
    layer.ff2_w = init_weight(p + ".ff2_w", {cfg.ffn_dim, d}, root, fs);
    layer.ff2_b = init_const(p + ".ff2_b", {1, d}, 0.0);
    enc_layers.push_back(std::move(layer));
  }
  enc_ln_g = init_const("sum.enc_ln_g", {d}, 1.0);
  enc_ln_b = init_const("sum.enc_ln_b", {d}, 0.0);

  for (int l = 0; l < cfg.layers_dec; ++l) {
    const std::string p = "sum.dec" + std::to_string(l);
    DecoderLayer layer;
    layer.ln1_g = init_const(p + ".ln1_g", {d}, 1.0);
    layer.ln1_b = init_const(p + ".ln1_b", {d}, 0.0);
    layer.self_attn = init_attention(p + ".self", d, root);
    layer.ln2_g = init_const(p + ".ln2_g", {d}, 1.0);
    layer.ln2_b = init_const(p + ".ln2_b", {d}, 0.0);
    layer.cross_attn = init_attention(p + ".cross", d, root);
    layer.ln3_g = init_const(p + ".ln3_g", {d}, 1.0);
    layer.ln3_b = init_const(p + ".ln3_b", {d}, 0.0);
    layer.ff1_w = init_weight(p + ".ff1_w", {d, cfg.ffn_dim}, root, ds);
    layer.ff1_b = init_const(p + ".ff1_b", {1, cfg.ffn_dim}, 0.0);
    layer.ff2_w = init_weight(p + ".ff2_w", {cfg.ffn_dim, d}, root, fs);
    layer.ff2_b = init_const(p + ".ff2_b", {1, d}, 0.0);
    dec_layers.push_back(std::move(layer));
  }
  dec_ln_g = init_const("sum.dec_ln_g", {d}, 1.0);
  dec_ln_b = init_const("sum.dec_ln_b", {d}, 0.0);

  gate.we = init_weight("sum.gate.we", {d, d}, root, ds);
  gate.be = init_const("sum.gate.be", {1, d}, 0.0);
  gate.w1d = init_weight("sum.gate.w1d", {d, d}, root, ds);
  gate.w2d = init_weight("sum.gate.w2d", {d, d}, root, ds);
  gate.bd = init_const("sum.gate.bd", {1, d}, 0.0);
  gate.enc_topic_w = init_weight("sum.gate.enc_topic_w", {d + cfg.t_topics, d}, root, ts);
  gate.enc_topic_b = init_const("sum.gate.enc_topic_b", {1, d}, 0.0);
  gate.dec_topic_w = init_weight("sum.gate.dec_topic_w", {d + cfg.t_topics, d}, root, ts);
  gate.dec_topic_b = init_const("sum.gate.dec_topic_b", {1, d}, 0.0);
}

std::vector<Parameter*> SummarizerModel::parameters() {
  std::vector<Parameter*> ps = {&embed, &out_b};
  if (!cfg.tied_output) ps.push_back(&out_w);
  auto add_attn = [&ps](AttentionParams& a) {
    ps.push_back(&a.wq);
    ps.push_back(&a.wk);
    ps.push_back(&a.wv);
    ps.push_back(&a.wo);
  };
  for (EncoderLayer& l : enc_layers) {
    ps.push_back(&l.ln1_g);
    ps.push_back(&l.ln1_b);
    add_attn(l.self_attn);
    ps.push_back(&l.ln2_g);
    ps.push_back(&l.ln2_b);
    ps.push_back(&l.ff1_w);
    ps.push_back(&l.ff1_b);
    ps.push_back(&l.ff2_w);
    ps.push_back(&l.ff2_b);
  }
  ps.push_back(&enc_ln_g);
  ps.push_back(&enc_ln_b);
  for (DecoderLayer& l : dec_layers) {
    ps.push_back(&l.ln1_g);
    ps.push_back(&l.ln1_b);
    add_attn(l.self_attn);
    ps.push_back(&l.ln2_g);
    ps.push_back(&l.ln2_b);
    add_attn(l.cross_attn);
    ps.push_back(&l.ln3_g);
    ps.push_back(&l.ln3_b);
    ps.push_back(&l.ff1_w);
    ps.push_back(&l.ff1_b);
    ps.push_back(&l.ff2_w);
    ps.push_back(&l.ff2_b);
  }
  ps.push_back(&dec_ln_g);
  ps.push_back(&dec_ln_b);
  for (Parameter* p : gate_parameters()) ps.push_back(p);
  return ps;
}

std::vector<const Parameter*> SummarizerModel::parameters() const {
  std::vector<const Parameter*> ps;
  for (Parameter* p : const_cast<SummarizerModel*>(this)->parameters()) ps.push_back(p);
  return ps;
}

std::vector<Parameter*> SummarizerModel::gate_parameters() {
  return {&gate.we,          &gate.be,          &gate.w1d,
          &gate.w2d,         &gate.bd,          &gate.enc_topic_w,
          &gate.enc_topic_b, &gate.dec_topic_w, &gate.dec_topic_b};
}

Tensor SummarizerModel::positional_rows(int length) const {
  const int d = cfg.d_model;
  Tensor pe = Tensor::zeros({length, d});
  auto& v = *pe.data;
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < d / 2; ++i) {
      const double rate = std::exp(-std::log(10000.0) * (2.0 * i) / d);
      v[pos * d + 2 * i] = std::sin(pos * rate);
      v[pos * d + 2 * i + 1] = std::cos(pos * rate);
    }
  }
  return pe;
}

Tensor SummarizerModel::maybe_dropout(Tensor x, const ForwardCtx& ctx) const {
  if (!ctx.dropout_rng || cfg.dropout <= 0.0) return x;
  const double keep = 1.0 - cfg.dropout;
  Tensor mask = Tensor::zeros(x.shape);
  for (double& v : *mask.data) {
    v = ctx.dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
  }
  return ops::mul(x, mask);
}

Tensor SummarizerModel::embed_sequence(const std::vector<int>& ids,
                                       const ForwardCtx& ctx) const {
  if (static_cast<int>(ids.size()) > cfg.max_positions) {
    throw ShapeError("sequence length " + std::to_string(ids.size()) +
                     " exceeds max positions " + std::to_string(cfg.max_positions));
  }
  Tensor e = ops::mul_scalar(ops::embedding(embed.value, ids),
                             std::sqrt(static_cast<double>(cfg.d_model)));
  return maybe_dropout(ops::add(e, positional_rows(static_cast<int>(ids.size()))), ctx);
}

Tensor SummarizerModel::run_encoder_stack(Tensor x, const Tensor& self_mask,
                                          const ForwardCtx& ctx) const {
  for (const EncoderLayer& l : enc_layers) {
    Tensor n1 = ops::layer_norm(x, l.ln1_g.value, l.ln1_b.value);
    x = ops::add(x, maybe_dropout(multi_head(l.self_attn, n1, n1, self_mask, cfg.heads), ctx));
    Tensor n2 = ops::layer_norm(x, l.ln2_g.value, l.ln2_b.value);
    x = ops::add(x, maybe_dropout(feed_forward(n2, l.ff1_w, l.ff1_b, l.ff2_w, l.ff2_b), ctx));
  }
  return ops::layer_norm(x, enc_ln_g.value, enc_ln_b.value);
}

EncoderStates SummarizerModel::encode(const std::vector<int>& x_ids,
                                      const std::vector<double>& x_mask,
                                      const ForwardCtx& ctx) const {
  if (x_ids.empty() || x_ids[0] != kClsId) {
    throw ShapeError("encode: input must start with the CLS token");
  }
  if (x_ids.size() != x_mask.size()) {
    throw ShapeError("encode: ids and mask lengths differ");
  }
  const int n = static_cast<int>(x_ids.size());
  Tensor x = embed_sequence(x_ids, ctx);
  Tensor h = run_encoder_stack(x, key_padding_mask(n, x_mask), ctx);

  EncoderStates states;
  states.h_cls = ops::select_row(h, 0);
  states.tokens = ops::slice_rows(h, 1, n - 1);
  states.cross_mask.assign(x_mask.begin() + 1, x_mask.end());
  return states;
}

EncoderStates SummarizerModel::encoder_gate(const EncoderStates& states,
                                            const Tensor& theta, GatingMode mode) const {
  if (mode == GatingMode::kOff) return states;
  const int d = cfg.d_model;
  Tensor lambda;
  switch (mode) {
    case GatingMode::kOn:
      lambda = ops::sigmoid(ops::add(ops::matmul(states.h_cls, gate.we.value), gate.be.value));
      break;
    case GatingMode::kForceZero:
      lambda = Tensor::zeros({1, d});
      break;
    case GatingMode::kForceOne:
      lambda = Tensor::full({1, d}, 1.0);
      break;
    case GatingMode::kOff:
      break;
  }
  Tensor all = ops::concat_rows({states.h_cls, states.tokens});
  Tensor gated = blend_rows(all, theta, lambda, gate.enc_topic_w, gate.enc_topic_b);

  EncoderStates out;
  out.h_cls = ops::select_row(gated, 0);
  out.tokens = ops::slice_rows(gated, 1, all.shape[0] - 1);
  out.cross_mask = states.cross_mask;
  return out;
}

Tensor SummarizerModel::run_decoder_stack(Tensor x, const EncoderStates& gated,
                                          const ForwardCtx& ctx) const {
  const int m = x.shape[0];
  Tensor self_mask = causal_mask(m);
  Tensor cross_mask = key_padding_mask(m, gated.cross_mask);
  for (const DecoderLayer& l : dec_layers) {
    Tensor n1 = ops::layer_norm(x, l.ln1_g.value, l.ln1_b.value);
    x = ops::add(x, maybe_dropout(multi_head(l.self_attn, n1, n1, self_mask, cfg.heads), ctx));
    Tensor n2 = ops::layer_norm(x, l.ln2_g.value, l.ln2_b.value);
    x = ops::add(x, maybe_dropout(
                        multi_head(l.cross_attn, n2, gated.tokens, cross_mask, cfg.heads), ctx));
    Tensor n3 = ops::layer_norm(x, l.ln3_g.value, l.ln3_b.value);
    x = ops::add(x, maybe_dropout(feed_forward(n3, l.ff1_w, l.ff1_b, l.ff2_w, l.ff2_b), ctx));
  }
  return ops::layer_norm(x, dec_ln_g.value, dec_ln_b.value);
}

Tensor SummarizerModel::decode(const std::vector<int>& prefix_ids,
                               const EncoderStates& gated, const Tensor& theta,
                               GatingMode mode, const ForwardCtx& ctx) const {
  if (prefix_ids.empty() || prefix_ids[0] != kClsId) {
    throw ShapeError("decode: prefix must start with the CLS token");
  }
  Tensor x = embed_sequence(prefix_ids, ctx);
  Tensor s = run_decoder_stack(x, gated, ctx);
  if (mode == GatingMode::kOff) return s;

  const int d = cfg.d_model;
  Tensor lambda;
  switch (mode) {
    case GatingMode::kOn: {
      Tensor s_cls = ops::select_row(s, 0);
      lambda = ops::sigmoid(ops::add(ops::add(ops::matmul(gated.h_cls, gate.w1d.value),
                                              ops::matmul(s_cls, gate.w2d.value)),
                                     gate.bd.value));
      break;
    }
    case GatingMode::kForceZero:
      lambda = Tensor::zeros({1, d});
      break;
    case GatingMode::kForceOne:
      lambda = Tensor::full({1, d}, 1.0);
      break;
    case GatingMode::kOff:
      break;
  }
  return blend_rows(s, theta, lambda, gate.dec_topic_w, gate.dec_topic_b);
}

Tensor SummarizerModel::project_logits(const Tensor& states) const {
  if (cfg.tied_output) {
    return ops::add_rows(ops::matmul(states, ops::transpose(embed.value)), out_b.value);
  }
  return ops::add_rows(ops::matmul(states, out_w.value), out_b.value);
}

nlohmann::json SummarizerModel::config_json() const {
  return {{"v_tok", cfg.v_tok},          {"t_topics", cfg.t_topics},
          {"layers_enc", cfg.layers_enc}, {"layers_dec", cfg.layers_dec},
          {"d_model", cfg.d_model},       {"heads", cfg.heads},
          {"ffn_dim", cfg.ffn_dim},       {"max_positions", cfg.max_positions},
          {"dropout", cfg.dropout},       {"tied_output", cfg.tied_output}};
}

SummarizerModel SummarizerModel::from_config_json(const nlohmann::json& config) {
  TransformerConfig cfg;
  cfg.v_tok = config.at("v_tok").get<int>();
  cfg.t_topics = config.at("t_topics").get<int>();
  cfg.layers_enc = config.at("layers_enc").get<int>();
  cfg.layers_dec = config.at("layers_dec").get<int>();
  cfg.d_model = config.at("d_model").get<int>();
  cfg.heads = config.at("heads").get<int>();
  cfg.ffn_dim = config.at("ffn_dim").get<int>();
  cfg.max_positions = config.at("max_positions").get<int>();
  cfg.dropout = config.at("dropout").get<double>();
  cfg.tied_output = config.at("tied_output").get<bool>();
  return SummarizerModel(cfg, Rng(0));
}

void SummarizerModel::append_tensors(Checkpoint& ck) const {
  for (const Parameter* p : parameters()) {
    ck.tensors.push_back({p->name, p->value.shape, *p->value.data});
  }
}

void SummarizerModel::load_tensors(const Checkpoint& ck) {
  for (Parameter* p : parameters()) {
    const NamedTensor& t = ck.require(p->name);
    if (t.shape != p->value.shape) {
      throw IoError("tensor '" + p->name + "' has shape " + shape_to_string(t.shape) +
                    ", expected " + p->value.shape_str());
    }
    *p->value.data = t.data;
  }
}

void SummarizerModel::save(const std::string& path) const {
  Checkpoint ck;
  ck.config = config_json();
  append_tensors(ck);
  ck.save(path);
}

SummarizerModel SummarizerModel::load(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  SummarizerModel model = from_config_json(ck.config);
  model.load_tensors(ck);
  return model;
}

}  // namespace topicflow
