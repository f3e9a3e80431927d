#include "topicflow/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "topicflow/beam.h"
#include "topicflow/ops.h"
#include "topicflow/rouge.h"

namespace topicflow {

namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot take_snapshot(const std::vector<Parameter*>& params) {
  Snapshot s;
  s.reserve(params.size());
  for (const Parameter* p : params) s.push_back(*p->value.data);
  return s;
}

void restore_snapshot(const std::vector<Parameter*>& params, const Snapshot& s) {
  for (size_t i = 0; i < params.size(); ++i) *params[i]->value.data = s[i];
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

void shuffle_order(std::vector<int>& order, Rng& rng) {
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  }
}

Tensor noise_row(Rng& rng, int d) {
  Tensor t = Tensor::zeros({1, d});
  for (double& v : *t.data) v = rng.normal();
  return t;
}

Tensor mean_of(const std::vector<Tensor>& parts) {
  Tensor acc = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) acc = ops::add(acc, parts[i]);
  return ops::mul_scalar(acc, 1.0 / static_cast<double>(parts.size()));
}

// Topic mixture fed to the gates: the sampled path or a deterministic pass
// through the posterior mean.
Tensor gate_theta(const NtmModel& ntm, const Tensor& bow, const NtmModel::Forward& fwd,
                  const std::string& mode) {
  if (mode == "sample") return fwd.theta;
  auto [mu, log_sigma] = ntm.encode_bow(bow);
  auto [zk, log_det] = ntm.apply_flow(mu);
  return ntm.topic_mixture(zk);
}

Tensor mean_theta(const NtmModel& ntm, const Tensor& bow) {
  auto [mu, log_sigma] = ntm.encode_bow(bow);
  auto [zk, log_det] = ntm.apply_flow(mu);
  return ntm.topic_mixture(zk);
}

Tensor example_nll(const SummarizerModel& model, const EncodedExample& ex,
                   const Tensor& theta, GatingMode mode, const ForwardCtx& ctx) {
  std::vector<double> x_mask(ex.x_ids.size(), 1.0);
  EncoderStates enc = model.encode(ex.x_ids, x_mask, ctx);
  EncoderStates gated = model.encoder_gate(enc, theta, mode);

  std::vector<int> prefix(ex.y_ids.size());
  prefix[0] = kClsId;
  std::copy(ex.y_ids.begin(), ex.y_ids.end() - 1, prefix.begin() + 1);
  Tensor s = model.decode(prefix, gated, theta, mode, ctx);

  const int m = static_cast<int>(ex.y_ids.size()) - 1;
  Tensor logits = model.project_logits(ops::slice_rows(s, 1, m));
  std::vector<int> targets(ex.y_ids.begin() + 1, ex.y_ids.end());
  return sequence_nll(logits, targets, std::vector<double>(m, 1.0));
}

double eval_objective(const NtmModel& ntm, const SummarizerModel& model,
                      const std::vector<EncodedExample>& examples,
                      const TrainConfig& cfg) {
  NoGradGuard no_grad;
  Rng noise_rng = Rng(cfg.seed).derive("eval-noise");
  double nll = 0.0, elbo = 0.0;
  for (const EncodedExample& ex : examples) {
    Tensor bow = Tensor::from({1, static_cast<int>(ex.x_bow.size())}, ex.x_bow);
    NtmModel::Forward fwd = ntm.forward(bow, noise_row(noise_rng, ntm.cfg.d_z));
    Tensor theta = gate_theta(ntm, bow, fwd, cfg.theta_mode);
    nll += example_nll(model, ex, theta, cfg.gating, {}).value();
    elbo += fwd.elbo.value();
  }
  const double n = static_cast<double>(examples.size());
  return nll / n + cfg.lambda_ntm * -(elbo / n);
}

EvalReport decode_rouge(const NtmModel& ntm, const SummarizerModel& model,
                        const std::vector<EncodedExample>& examples,
                        const std::vector<std::string>& refs, const Vocabulary& vocab,
                        GatingMode gating, int max_len) {
  NoGradGuard no_grad;
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    const EncodedExample& ex = examples[i];
    Tensor bow = Tensor::from({1, static_cast<int>(ex.x_bow.size())}, ex.x_bow);
    Tensor theta = mean_theta(ntm, bow);
    std::vector<double> x_mask(ex.x_ids.size(), 1.0);
    EncoderStates gated =
        model.encoder_gate(model.encode(ex.x_ids, x_mask), theta, gating);
    BeamResult out = greedy_decode(model, gated, theta, gating, max_len);
    pairs.push_back({decode_tokens(out.tokens, vocab), refs[i]});
  }
  return evaluate_texts(pairs);
}

void csv_header(std::ostream* m) {
  if (m) *m << "step,split,loss,rouge1,rouge2,rougeL\n";
}

void csv_row(std::ostream* m, long long step, const std::string& split, double loss,
             const EvalReport* rouge) {
  if (!m) return;
  char buf[192];
  if (rouge) {
    std::snprintf(buf, sizeof buf, "%lld,%s,%.6f,%.2f,%.2f,%.2f\n", step, split.c_str(),
                  loss, rouge->rouge1, rouge->rouge2, rouge->rougeL);
  } else {
    std::snprintf(buf, sizeof buf, "%lld,%s,%.6f,,,\n", step, split.c_str(), loss);
  }
  *m << buf;
  m->flush();
}

}  // namespace

void TrainConfig::validate() const {
  if (lambda_ntm < 0.0) throw IoError("lambda_ntm must be >= 0");
  if (checkpoint_top_k < 1) throw IoError("checkpoint_top_k must be >= 1");
  if (batch_size < 1) throw IoError("batch_size must be >= 1");
  if (lr_ntm <= 0.0 || lr_joint <= 0.0) throw IoError("learning rates must be positive");
  if (max_steps < 0 || max_epochs < 0) throw IoError("step and epoch budgets must be >= 0");
  if (eval_interval < 0) throw IoError("eval_interval must be >= 0");
  if (optimizer != "adam" && optimizer != "adadelta") {
    throw IoError("unknown optimizer '" + optimizer + "' (expected adam|adadelta)");
  }
  if (theta_mode != "mean" && theta_mode != "sample") {
    throw IoError("unknown theta_mode '" + theta_mode + "' (expected mean|sample)");
  }
}

Tensor sequence_nll(const Tensor& logits, const std::vector<int>& targets,
                    const std::vector<double>& target_mask) {
  if (logits.shape.size() != 2) throw ShapeError("sequence_nll: logits must be 2-D");
  const int rows = logits.shape[0];
  const int vocab = logits.shape[1];
  if (static_cast<int>(targets.size()) != rows ||
      static_cast<int>(target_mask.size()) != rows) {
    throw ShapeError("sequence_nll: rows, targets and mask lengths differ");
  }
  double count = 0.0;
  for (double m : target_mask) count += m;
  if (count <= 0.0) {
    throw NumericError("sequence_nll: every target position is masked");
  }
  Tensor pick = Tensor::zeros(logits.shape);
  for (int i = 0; i < rows; ++i) {
    if (target_mask[i] == 0.0) continue;
    if (targets[i] < 0 || targets[i] >= vocab) {
      throw ShapeError("sequence_nll: target id out of range");
    }
    pick.set(i, targets[i], target_mask[i]);
  }
  Tensor lp = ops::log_softmax(logits);
  return ops::mul_scalar(ops::sum(ops::mul(lp, pick)), -1.0 / count);
}

Tensor joint_objective(const Tensor& sum_loss, const Tensor& elbo, double lambda_ntm) {
  return ops::add(sum_loss, ops::mul_scalar(ops::neg(elbo), lambda_ntm));
}

double global_grad_norm(const std::vector<Parameter*>& params) {
  double total = 0.0;
  for (const Parameter* p : params) {
    if (!p->value.grad) continue;
    for (double g : *p->value.grad) total += g * g;
  }
  return std::sqrt(total);
}

double clip_gradients(const std::vector<Parameter*>& params, double clip_norm) {
  const double norm = global_grad_norm(params);
  if (clip_norm > 0.0 && norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (Parameter* p : params) {
      if (!p->value.grad) continue;
      for (double& g : *p->value.grad) g *= scale;
    }
  }
  return norm;
}

AdamOptimizer::AdamOptimizer(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

AdamOptimizer::Moments& AdamOptimizer::moments(const std::string& name, size_t numel) {
  for (auto& [key, value] : state_) {
    if (key == name) return value;
  }
  state_.push_back({name, Moments{std::vector<double>(numel, 0.0),
                                  std::vector<double>(numel, 0.0)}});
  return state_.back().second;
}

void AdamOptimizer::step(const std::vector<Parameter*>& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Parameter* p : params) {
    Moments& mo = moments(p->name, p->numel());
    auto& data = *p->value.data;
    const auto& grad = *p->value.grad;
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
      mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
      data[i] -= lr * (mo.m[i] / bc1) / (std::sqrt(mo.v[i] / bc2) + eps_);
    }
  }
}

AdadeltaOptimizer::AdadeltaOptimizer(double rho, double eps) : rho_(rho), eps_(eps) {}

AdadeltaOptimizer::Accum& AdadeltaOptimizer::accum(const std::string& name,
                                                   size_t numel) {
  for (auto& [key, value] : state_) {
    if (key == name) return value;
  }
  state_.push_back({name, Accum{std::vector<double>(numel, 0.0),
                                std::vector<double>(numel, 0.0)}});
  return state_.back().second;
}

void AdadeltaOptimizer::step(const std::vector<Parameter*>& params, double lr) {
  for (Parameter* p : params) {
    Accum& ac = accum(p->name, p->numel());
    auto& data = *p->value.data;
    const auto& grad = *p->value.grad;
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      ac.grad_sq[i] = rho_ * ac.grad_sq[i] + (1.0 - rho_) * g * g;
      const double dx =
          -std::sqrt(ac.delta_sq[i] + eps_) / std::sqrt(ac.grad_sq[i] + eps_) * g;
      ac.delta_sq[i] = rho_ * ac.delta_sq[i] + (1.0 - rho_) * dx * dx;
      data[i] += lr * dx;
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& name) {
  if (name == "adam") return std::make_unique<AdamOptimizer>();
  if (name == "adadelta") return std::make_unique<AdadeltaOptimizer>();
  throw IoError("unknown optimizer '" + name + "' (expected adam|adadelta)");
}

double warmup_scale(long long step, int warmup_steps) {
  if (warmup_steps <= 0) return 1.0;
  return std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup_steps));
}

PretrainResult pretrain_ntm(NtmModel& model, const std::vector<std::vector<double>>& bows,
                            const TrainConfig& cfg, std::ostream* metrics) {
  cfg.validate();
  if (bows.empty()) throw IoError("pretrain_ntm: empty corpus");
  std::vector<Parameter*> params = model.parameters();
  std::unique_ptr<Optimizer> opt = make_optimizer(cfg.optimizer);
  Rng noise_rng = Rng(cfg.seed).derive("pretrain-noise");
  Rng shuffle_rng = Rng(cfg.seed).derive("pretrain-shuffle");
  csv_header(metrics);

  PretrainResult result;
  Snapshot good = take_snapshot(params);
  const int n = static_cast<int>(bows.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  long long t = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_order(order, shuffle_rng);
    double total = 0.0;
    bool diverged = false;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n - start);
      try {
        std::vector<Tensor> losses;
        losses.reserve(bsz);
        for (int k = 0; k < bsz; ++k) {
          const std::vector<double>& bow = bows[order[start + k]];
          Tensor x = Tensor::from({1, static_cast<int>(bow.size())}, bow);
          Tensor noise = noise_row(noise_rng, model.cfg.d_z);
          losses.push_back(ops::neg(model.forward(x, noise).elbo));
        }
        Tensor loss = mean_of(losses);
        if (!std::isfinite(loss.value())) {
          throw NumericError("pretrain_ntm: non-finite loss");
        }
        zero_grads(params);
        backward(loss);
        clip_gradients(params, cfg.clip_norm);
        ++t;
        opt->step(params, cfg.lr_ntm * warmup_scale(t, cfg.warmup_steps));
        total += loss.value() * bsz;
      } catch (const NumericError&) {
        diverged = true;
        break;
      }
    }
    if (diverged) {
      restore_snapshot(params, good);
      result.aborted = true;
      break;
    }
    const double epoch_mean = total / static_cast<double>(n);
    result.epoch_loss.push_back(epoch_mean);
    csv_row(metrics, epoch, "pretrain", epoch_mean, nullptr);
    good = take_snapshot(params);
  }
  return result;
}

JointResult train_joint(NtmModel& ntm, SummarizerModel& model, const JointData& data,
                        const TrainConfig& cfg, std::ostream* metrics,
                        const std::string& out_dir) {
  cfg.validate();
  if (data.train.empty()) throw IoError("train_joint: empty training set");
  std::vector<Parameter*> all = model.parameters();
  for (Parameter* p : ntm.parameters()) all.push_back(p);
  std::vector<Parameter*> trainable = model.parameters();
  if (!cfg.freeze_ntm) {
    for (Parameter* p : ntm.parameters()) trainable.push_back(p);
  }
  std::unique_ptr<Optimizer> opt = make_optimizer(cfg.optimizer);
  Rng noise_rng = Rng(cfg.seed).derive("joint-noise");
  Rng shuffle_rng = Rng(cfg.seed).derive("joint-shuffle");
  Rng dropout_rng = Rng(cfg.seed).derive("joint-dropout");
  csv_header(metrics);

  JointResult result;
  const int n = static_cast<int>(data.train.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  int cursor = n;

  struct Retained {
    long long step;
    double val_loss;
    Snapshot snap;
  };
  std::vector<Retained> retained;
  const bool valid_rouge =
      data.vocab && data.valid_refs.size() == data.valid.size() && !data.valid.empty();
  const bool test_rouge =
      data.vocab && data.test_refs.size() == data.test.size() && !data.test.empty();
  double train_accum = 0.0;
  long long train_count = 0;

  for (long long step = 1; step <= cfg.max_steps; ++step) {
    try {
      std::vector<Tensor> nlls, elbos;
      nlls.reserve(cfg.batch_size);
      elbos.reserve(cfg.batch_size);
      for (int k = 0; k < cfg.batch_size; ++k) {
        if (cursor >= n) {
          shuffle_order(order, shuffle_rng);
          cursor = 0;
        }
        const EncodedExample& ex = data.train[order[cursor++]];
        Tensor bow = Tensor::from({1, static_cast<int>(ex.x_bow.size())}, ex.x_bow);
        NtmModel::Forward fwd = ntm.forward(bow, noise_row(noise_rng, ntm.cfg.d_z));
        Tensor theta = gate_theta(ntm, bow, fwd, cfg.theta_mode);
        ForwardCtx ctx{&dropout_rng};
        nlls.push_back(example_nll(model, ex, theta, cfg.gating, ctx));
        elbos.push_back(fwd.elbo);
      }
      Tensor loss = joint_objective(mean_of(nlls), mean_of(elbos), cfg.lambda_ntm);
      if (!std::isfinite(loss.value())) {
        throw NumericError("train_joint: non-finite loss");
      }
      zero_grads(all);
      backward(loss);
      clip_gradients(trainable, cfg.clip_norm);
      opt->step(trainable, cfg.lr_joint * warmup_scale(step, cfg.warmup_steps));
      result.step_loss.push_back(loss.value());
      train_accum += loss.value();
      ++train_count;
    } catch (const NumericError&) {
      result.aborted = true;
      break;
    }

    if (cfg.eval_interval > 0 && step % cfg.eval_interval == 0 && !data.valid.empty()) {
      csv_row(metrics, step, "train", train_accum / static_cast<double>(train_count),
              nullptr);
      train_accum = 0.0;
      train_count = 0;
      const double val_loss = eval_objective(ntm, model, data.valid, cfg);
      result.evals.push_back({step, val_loss});
      if (valid_rouge) {
        EvalReport vr = decode_rouge(ntm, model, data.valid, data.valid_refs,
                                     *data.vocab, cfg.gating, data.decode_max_len);
        csv_row(metrics, step, "valid", val_loss, &vr);
      } else {
        csv_row(metrics, step, "valid", val_loss, nullptr);
      }
      retained.push_back({step, val_loss, take_snapshot(all)});
      std::stable_sort(retained.begin(), retained.end(),
                       [](const Retained& a, const Retained& b) {
                         if (a.val_loss != b.val_loss) return a.val_loss < b.val_loss;
                         return a.step < b.step;
                       });
      if (static_cast<int>(retained.size()) > cfg.checkpoint_top_k) {
        retained.resize(cfg.checkpoint_top_k);
      }
    }
  }

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  auto test_metrics_at = [&](long long step, double& loss_acc, double& r1, double& r2,
                             double& rl) {
    const double test_loss = eval_objective(ntm, model, data.test, cfg);
    loss_acc += test_loss;
    if (test_rouge) {
      EvalReport tr = decode_rouge(ntm, model, data.test, data.test_refs, *data.vocab,
                                   cfg.gating, data.decode_max_len);
      r1 += tr.rouge1;
      r2 += tr.rouge2;
      rl += tr.rougeL;
      csv_row(metrics, step, "test", test_loss, &tr);
    } else {
      csv_row(metrics, step, "test", test_loss, nullptr);
    }
  };

  double loss_acc = 0.0, r1 = 0.0, r2 = 0.0, rl = 0.0;
  if (!retained.empty()) {
    for (size_t i = 0; i < retained.size(); ++i) {
      restore_snapshot(all, retained[i].snap);
      result.retained_steps.push_back(retained[i].step);
      if (!out_dir.empty()) {
        save_joint_checkpoint(
            out_dir + "/checkpoint_top" + std::to_string(i + 1) + ".bin", ntm, model);
      }
      if (!data.test.empty()) test_metrics_at(retained[i].step, loss_acc, r1, r2, rl);
    }
    if (!data.test.empty()) {
      const double k = static_cast<double>(retained.size());
      result.test_loss = loss_acc / k;
      result.test_rouge1 = r1 / k;
      result.test_rouge2 = r2 / k;
      result.test_rougeL = rl / k;
      result.has_test = true;
    }
    restore_snapshot(all, retained.front().snap);
  } else {
    if (!out_dir.empty()) {
      save_joint_checkpoint(out_dir + "/checkpoint_top1.bin", ntm, model);
    }
    if (!data.test.empty()) {
      test_metrics_at(cfg.max_steps, loss_acc, r1, r2, rl);
      result.test_loss = loss_acc;
      result.test_rouge1 = r1;
      result.test_rouge2 = r2;
      result.test_rougeL = rl;
      result.has_test = true;
    }
  }
  return result;
}

void save_joint_checkpoint(const std::string& path, const NtmModel& ntm,
                           const SummarizerModel& model) {
  Checkpoint ck;
  ck.config = {{"joint", true},
               {"ntm", ntm.config_json()},
               {"summarizer", model.config_json()}};
  ntm.append_tensors(ck);
  model.append_tensors(ck);
  ck.save(path);
}

std::pair<NtmModel, SummarizerModel> load_joint_checkpoint(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (!ck.config.contains("joint") || !ck.config.contains("ntm") ||
      !ck.config.contains("summarizer")) {
    throw IoError(path + ": not a joint checkpoint");
  }
  NtmModel ntm = NtmModel::from_config_json(ck.config.at("ntm"));
  ntm.load_tensors(ck);
  SummarizerModel model = SummarizerModel::from_config_json(ck.config.at("summarizer"));
  model.load_tensors(ck);
  return {std::move(ntm), std::move(model)};
}

}  // namespace topicflow
