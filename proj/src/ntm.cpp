#include "topicflow/ntm.h"

#include <algorithm>
#include <cmath>

#include "topicflow/checkpoint.h"
#include "topicflow/ops.h"

namespace topicflow {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Parameter init_weight(const std::string& name, int rows, int cols, const Rng& root,
                      double scale) {
  Parameter p(name, Tensor::zeros({rows, cols}, true));
  Rng rng = root.derive("init:" + name);
  for (double& v : *p.value.data) v = scale * rng.normal();
  return p;
}

Parameter init_zeros(const std::string& name, std::vector<int> shape) {
  return Parameter(name, Tensor::zeros(std::move(shape), true));
}

}  // namespace

Tensor gaussian_log_density(const Tensor& z, const Tensor& mu, const Tensor& log_sigma) {
  const double d = static_cast<double>(z.numel());
  Tensor diff = ops::sub(z, mu);
  Tensor scaled = ops::mul(diff, ops::exp(ops::neg(log_sigma)));
  Tensor quad = ops::mul_scalar(ops::sum(ops::mul(scaled, scaled)), 0.5);
  Tensor out = ops::neg(ops::add(ops::add(quad, ops::sum(log_sigma)),
                                 Tensor::scalar(0.5 * d * kLog2Pi)));
  return out;
}

Tensor standard_normal_log_density(const Tensor& z) {
  const double d = static_cast<double>(z.numel());
  Tensor quad = ops::mul_scalar(ops::sum(ops::mul(z, z)), 0.5);
  return ops::neg(ops::add(quad, Tensor::scalar(0.5 * d * kLog2Pi)));
}

NtmModel::NtmModel(const NtmConfig& cfg_in, const Rng& seed_rng) : cfg(cfg_in) {
  const double enc_scale = 1.0 / std::sqrt(static_cast<double>(cfg.v_bow));
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(cfg.h_ntm));
  const double z_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_z));
  const double t_scale = 1.0 / std::sqrt(static_cast<double>(cfg.t_topics));

  enc_w = init_weight("ntm.enc_w", cfg.v_bow, cfg.h_ntm, seed_rng, enc_scale);
  enc_b = init_zeros("ntm.enc_b", {1, cfg.h_ntm});
  mu_w = init_weight("ntm.mu_w", cfg.h_ntm, cfg.d_z, seed_rng, head_scale);
  mu_b = init_zeros("ntm.mu_b", {1, cfg.d_z});
  ls_w = init_weight("ntm.ls_w", cfg.h_ntm, cfg.d_z, seed_rng, head_scale);
  ls_b = init_zeros("ntm.ls_b", {1, cfg.d_z});
  for (int i = 0; i < cfg.k_flows; ++i) {
    const std::string tag = "ntm.flow" + std::to_string(i);
    PlanarFlowLayer layer;
    layer.u = init_weight(tag + ".u", 1, cfg.d_z, seed_rng, 0.1);
    layer.w = init_weight(tag + ".w", 1, cfg.d_z, seed_rng, 0.1);
    layer.b = init_zeros(tag + ".b", {});
    flows.push_back(std::move(layer));
  }
  theta_w = init_weight("ntm.theta_w", cfg.d_z, cfg.t_topics, seed_rng, z_scale);
  theta_b = init_zeros("ntm.theta_b", {1, cfg.t_topics});
  phi = init_weight("ntm.phi", cfg.t_topics, cfg.v_bow, seed_rng, t_scale);
  phi_b = init_zeros("ntm.phi_b", {1, cfg.v_bow});
}

std::vector<Parameter*> NtmModel::parameters() {
  std::vector<Parameter*> ps = {&enc_w, &enc_b, &mu_w, &mu_b, &ls_w, &ls_b};
  for (PlanarFlowLayer& f : flows) {
    ps.push_back(&f.u);
    ps.push_back(&f.w);
    ps.push_back(&f.b);
  }
  ps.push_back(&theta_w);
  ps.push_back(&theta_b);
  ps.push_back(&phi);
  ps.push_back(&phi_b);
  return ps;
}

std::vector<const Parameter*> NtmModel::parameters() const {
  std::vector<const Parameter*> ps;
  for (Parameter* p : const_cast<NtmModel*>(this)->parameters()) ps.push_back(p);
  return ps;
}

std::pair<Tensor, Tensor> NtmModel::encode_bow(const Tensor& x_bow) const {
  if (x_bow.rank() != 2 || x_bow.shape[0] != 1 || x_bow.shape[1] != cfg.v_bow) {
    throw ShapeError("encode_bow: expected {1," + std::to_string(cfg.v_bow) + "}, got " +
                     x_bow.shape_str());
  }
  Tensor pi = ops::tanh(ops::add(ops::matmul(x_bow, enc_w.value), enc_b.value));
  Tensor mu = ops::add(ops::matmul(pi, mu_w.value), mu_b.value);
  Tensor log_sigma = ops::add(ops::matmul(pi, ls_w.value), ls_b.value);
  return {mu, log_sigma};
}

Tensor NtmModel::sample_latent(const Tensor& mu, const Tensor& log_sigma,
                               const Tensor& noise) {
  return ops::add(mu, ops::mul(ops::exp(log_sigma), noise));
}

std::pair<Tensor, Tensor> NtmModel::apply_flow(const Tensor& z0) const {
  Tensor z = z0;
  Tensor sum_log_det = Tensor::scalar(0.0);
  for (const PlanarFlowLayer& layer : flows) {
    Tensor uw = ops::dot(layer.u.value, layer.w.value);
    Tensor u_hat;
    if (uw.value() >= -1.0) {
      // max(-1, u.w) == u.w here, so the invertibility correction vanishes
      // identically (this also avoids 0/0 at w == 0).
      u_hat = layer.u.value;
    } else {
      Tensor coef = ops::div_by(ops::sub(ops::clamp_min(uw, -1.0), uw),
                                ops::dot(layer.w.value, layer.w.value));
      u_hat = ops::add(layer.u.value, ops::scale_by(layer.w.value, coef));
    }
    Tensor arg = ops::add(ops::dot(layer.w.value, z), layer.b.value);
    Tensor t = ops::tanh(arg);
    Tensor u_hat_w = ops::dot(u_hat, layer.w.value);
    Tensor h_prime = ops::sub(Tensor::scalar(1.0), ops::mul(t, t));
    Tensor det_factor = ops::add(Tensor::scalar(1.0), ops::mul(u_hat_w, h_prime));
    if (std::fabs(det_factor.value()) < 1e-12) {
      throw NumericError("apply_flow: degenerate Jacobian factor " +
                         std::to_string(det_factor.value()));
    }
    sum_log_det = ops::add(sum_log_det, ops::log(det_factor));
    z = ops::add(z, ops::scale_by(u_hat, t));
  }
  return {z, sum_log_det};
}

Tensor NtmModel::topic_mixture(const Tensor& zk) const {
  Tensor hidden = ops::relu(ops::add(ops::matmul(zk, theta_w.value), theta_b.value));
  return ops::softmax(hidden);
}

Tensor NtmModel::reconstruct_log_probs(const Tensor& theta) const {
  return ops::log_softmax(ops::add(ops::matmul(theta, phi.value), phi_b.value));
}

NtmModel::Forward NtmModel::forward(const Tensor& x_bow, const Tensor& noise) const {
  Forward f;
  auto [mu, log_sigma] = encode_bow(x_bow);
  f.mu = mu;
  f.log_sigma = log_sigma;
  f.z0 = sample_latent(mu, log_sigma, noise);
  auto [zk, sum_log_det] = apply_flow(f.z0);
  f.zk = zk;
  f.sum_log_det = sum_log_det;
  f.theta = topic_mixture(zk);
  Tensor recon = ops::dot(x_bow, reconstruct_log_probs(f.theta));
  Tensor log_q = gaussian_log_density(f.z0, mu, log_sigma);
  Tensor log_p = standard_normal_log_density(zk);
  f.elbo = ops::sub(ops::add(ops::add(sum_log_det, log_p), recon), log_q);
  return f;
}

std::vector<std::vector<std::pair<std::string, double>>> NtmModel::top_words(
    const BowVocabulary& vocab, int k) const {
  if (k < 1 || k > cfg.v_bow) {
    throw IoError("top_words: k must be in [1," + std::to_string(cfg.v_bow) + "]");
  }
  std::vector<std::vector<std::pair<std::string, double>>> topics;
  const auto& w = *phi.value.data;
  for (int t = 0; t < cfg.t_topics; ++t) {
    std::vector<int> order(cfg.v_bow);
    for (int j = 0; j < cfg.v_bow; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double wa = w[static_cast<size_t>(t) * cfg.v_bow + a];
      const double wb = w[static_cast<size_t>(t) * cfg.v_bow + b];
      if (wa != wb) return wa > wb;
      return vocab.token_of(a) < vocab.token_of(b);
    });
    std::vector<std::pair<std::string, double>> row;
    for (int i = 0; i < k; ++i) {
      row.emplace_back(vocab.token_of(order[i]),
                       w[static_cast<size_t>(t) * cfg.v_bow + order[i]]);
    }
    topics.push_back(std::move(row));
  }
  return topics;
}

nlohmann::json NtmModel::config_json() const {
  return {{"V_bow", cfg.v_bow}, {"h_ntm", cfg.h_ntm}, {"d_z", cfg.d_z},
          {"T", cfg.t_topics}, {"K", cfg.k_flows}};
}

NtmModel NtmModel::from_config_json(const nlohmann::json& config) {
  NtmConfig cfg;
  cfg.v_bow = config.at("V_bow").get<int>();
  cfg.h_ntm = config.at("h_ntm").get<int>();
  cfg.d_z = config.at("d_z").get<int>();
  cfg.t_topics = config.at("T").get<int>();
  cfg.k_flows = config.at("K").get<int>();
  return NtmModel(cfg, Rng(0));
}

void NtmModel::append_tensors(Checkpoint& ck) const {
  for (const Parameter* p : parameters()) {
    ck.tensors.push_back({p->name, p->value.shape, *p->value.data});
  }
}

void NtmModel::load_tensors(const Checkpoint& ck) {
  for (Parameter* p : parameters()) {
    const NamedTensor& t = ck.require(p->name);
    if (t.shape != p->value.shape) {
      throw IoError("tensor '" + p->name + "' has shape " + shape_to_string(t.shape) +
                    ", expected " + p->value.shape_str());
    }
    *p->value.data = t.data;
  }
}

void NtmModel::save(const std::string& path) const {
  Checkpoint ck;
  ck.config = config_json();
  append_tensors(ck);
  ck.save(path);
}

NtmModel NtmModel::load(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  NtmModel model = from_config_json(ck.config);
  model.load_tensors(ck);
  return model;
}

}  // namespace topicflow
