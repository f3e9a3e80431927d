#pragma once

#include <string>
#include <utility>
#include <vector>

#include "topicflow/checkpoint.h"
#include "topicflow/corpus.h"
#include "topicflow/rng.h"
#include "topicflow/tensor.h"

namespace topicflow {

struct NtmConfig {
  int v_bow = 0;
  int h_ntm = 256;
  int d_z = 100;
  int t_topics = 100;
  int k_flows = 4;  // 0 means the identity flow
};

// One invertible planar transform z -> z + u_hat * tanh(w.z + b). The
// u_hat reparameterization keeps u_hat.w >= -1 so the map stays injective.
struct PlanarFlowLayer {
  Parameter u;  // {1, d_z}
  Parameter w;  // {1, d_z}
  Parameter b;  // scalar
};

// Diagonal-Gaussian log density, summed over the row vector z.
Tensor gaussian_log_density(const Tensor& z, const Tensor& mu, const Tensor& log_sigma);
Tensor standard_normal_log_density(const Tensor& z);

// Flow-based neural topic model: BoW encoder to a Gaussian posterior, a
// planar-flow chain on the sample, and a topic-word decoder whose weight
// matrix doubles as the topic-word distribution.
struct NtmModel {
  NtmConfig cfg;

  Parameter enc_w, enc_b;      // V_bow -> h_ntm, tanh
  Parameter mu_w, mu_b;        // h_ntm -> d_z
  Parameter ls_w, ls_b;        // h_ntm -> d_z (log sigma head)
  std::vector<PlanarFlowLayer> flows;
  Parameter theta_w, theta_b;  // d_z -> T, relu then softmax
  Parameter phi, phi_b;        // T x V_bow topic-word logits

  NtmModel() = default;
  NtmModel(const NtmConfig& cfg, const Rng& seed_rng);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  // x_bow {1, V_bow} -> (mu, log_sigma), each {1, d_z}.
  std::pair<Tensor, Tensor> encode_bow(const Tensor& x_bow) const;

  // Reparameterized draw z0 = mu + exp(log_sigma) * noise.
  static Tensor sample_latent(const Tensor& mu, const Tensor& log_sigma,
                              const Tensor& noise);

  // Applies the chain in layer order; returns (zK, sum of log |det J_i|).
  // Raises NumericError if a layer's Jacobian factor falls below 1e-12.
  std::pair<Tensor, Tensor> apply_flow(const Tensor& z0) const;

  Tensor topic_mixture(const Tensor& zk) const;          // {1, T}, on the simplex
  Tensor reconstruct_log_probs(const Tensor& theta) const;  // {1, V_bow}

  struct Forward {
    Tensor mu, log_sigma, z0, zk, sum_log_det, theta, elbo;
  };

  // Evidence lower bound for one document:
  //   elbo = -log q(z0 | mu, sigma) + sum_log_det + log p(x | zK) + log p(zK)
  // The training loss is its negation.
  Forward forward(const Tensor& x_bow, const Tensor& noise) const;

  // Per-topic top-k tokens by phi weight, ties broken lexicographically.
  std::vector<std::vector<std::pair<std::string, double>>> top_words(
      const BowVocabulary& vocab, int k) const;

  void save(const std::string& path) const;
  static NtmModel load(const std::string& path);

  // Checkpoint-container pieces, also used when saving jointly with the
  // summarizer under a combined header.
  nlohmann::json config_json() const;
  static NtmModel from_config_json(const nlohmann::json& config);
  void append_tensors(Checkpoint& ck) const;
  void load_tensors(const Checkpoint& ck);  // throws IoError on shape mismatch
};

}  // namespace topicflow
