#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "topicflow/corpus.h"
#include "topicflow/model.h"
#include "topicflow/ntm.h"
#include "topicflow/tensor.h"

namespace topicflow {

struct TrainConfig {
  double lambda_ntm = 0.75;   // weight of the topic-model term in the joint loss
  double lr_ntm = 1e-3;
  double lr_joint = 1e-4;
  int batch_size = 8;
  int max_steps = 2000;       // joint optimization steps
  int max_epochs = 50;        // pretraining epochs
  int eval_interval = 200;    // 0 disables periodic evaluation
  unsigned long long seed = 0;
  int checkpoint_top_k = 3;
  double clip_norm = 1.0;     // 0 disables clipping
  int warmup_steps = 100;
  std::string optimizer = "adam";   // adam | adadelta
  bool freeze_ntm = false;          // joint phase: exclude ntm.* from updates
  std::string theta_mode = "mean";  // topic mixture fed to the gates: mean | sample
  GatingMode gating = GatingMode::kOn;

  void validate() const;  // throws IoError on out-of-range fields
};

// Mean negative log-likelihood over unmasked target positions. logits rows
// align one-to-one with targets; mask entries are 1.0 (scored) or 0.0.
// An all-masked call raises NumericError.
Tensor sequence_nll(const Tensor& logits, const std::vector<int>& targets,
                    const std::vector<double>& target_mask);

// L = sum_loss + lambda * (-elbo). At lambda == 0 the value equals sum_loss
// bit-exactly and no gradient reaches the elbo branch.
Tensor joint_objective(const Tensor& sum_loss, const Tensor& elbo, double lambda_ntm);

double global_grad_norm(const std::vector<Parameter*>& params);

// Scales every gradient by clip_norm/norm when the global norm exceeds
// clip_norm; returns the pre-clip norm. clip_norm <= 0 only measures.
double clip_gradients(const std::vector<Parameter*>& params, double clip_norm);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(const std::vector<Parameter*>& params, double lr) = 0;
};

class AdamOptimizer : public Optimizer {
 public:
  explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(const std::vector<Parameter*>& params, double lr) override;

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  struct Moments {
    std::vector<double> m, v;
  };
  std::vector<std::pair<std::string, Moments>> state_;
  Moments& moments(const std::string& name, size_t numel);
};

class AdadeltaOptimizer : public Optimizer {
 public:
  explicit AdadeltaOptimizer(double rho = 0.95, double eps = 1e-6);
  void step(const std::vector<Parameter*>& params, double lr) override;

 private:
  double rho_, eps_;
  struct Accum {
    std::vector<double> grad_sq, delta_sq;
  };
  std::vector<std::pair<std::string, Accum>> state_;
  Accum& accum(const std::string& name, size_t numel);
};

std::unique_ptr<Optimizer> make_optimizer(const std::string& name);  // throws IoError

// Linear ramp: step/warmup_steps capped at 1. Non-positive warmup gives 1.
double warmup_scale(long long step, int warmup_steps);

struct PretrainResult {
  std::vector<double> epoch_loss;  // mean per-example -elbo, one entry per epoch
  bool aborted = false;            // divergence; parameters hold the last good epoch
};

// Minimizes -elbo over bag-of-words rows with sampled posterior noise.
// Deterministic given cfg.seed. metrics, when given, receives CSV rows
// (step=epoch, split=pretrain, rouge columns empty).
PretrainResult pretrain_ntm(NtmModel& model, const std::vector<std::vector<double>>& bows,
                            const TrainConfig& cfg, std::ostream* metrics = nullptr);

struct JointData {
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> valid;
  std::vector<EncodedExample> test;
  std::vector<std::string> valid_refs;  // reference text aligned with valid
  std::vector<std::string> test_refs;
  const Vocabulary* vocab = nullptr;    // enables decoding metrics when set
  int decode_max_len = 32;
};

struct JointResult {
  std::vector<double> step_loss;                     // joint loss per step
  std::vector<std::pair<long long, double>> evals;   // (step, validation loss)
  std::vector<long long> retained_steps;             // kept checkpoints, best first
  double test_loss = 0.0;
  double test_rouge1 = 0.0;  // mean over retained checkpoints, each x100/2dp
  double test_rouge2 = 0.0;
  double test_rougeL = 0.0;
  bool has_test = false;
  bool aborted = false;
};

// Optimizes the joint objective end-to-end. Validation runs every
// eval_interval steps; the checkpoint_top_k lowest-validation-loss parameter
// sets are retained, their test metrics averaged, and the best one is
// restored into the models before returning (when any evaluation ran).
// Non-empty out_dir additionally writes checkpoint_top<i>.bin files under it.
JointResult train_joint(NtmModel& ntm, SummarizerModel& model, const JointData& data,
                        const TrainConfig& cfg, std::ostream* metrics = nullptr,
                        const std::string& out_dir = "");

// Single-container checkpoint holding both models under one header.
void save_joint_checkpoint(const std::string& path, const NtmModel& ntm,
                           const SummarizerModel& model);
std::pair<NtmModel, SummarizerModel> load_joint_checkpoint(const std::string& path);

}  // namespace topicflow
