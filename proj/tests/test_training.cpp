#include "topicflow/training.h"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "topicflow/gradcheck.h"
#include "topicflow/ops.h"

using namespace topicflow;

namespace {

NtmConfig small_ntm_config() {
  NtmConfig cfg;
  cfg.v_bow = 10;
  cfg.h_ntm = 8;
  cfg.d_z = 3;
  cfg.t_topics = 2;
  cfg.k_flows = 1;
  return cfg;
}

TransformerConfig small_tf_config() {
  TransformerConfig cfg;
  cfg.v_tok = 12;
  cfg.t_topics = 2;
  cfg.layers_enc = 1;
  cfg.layers_dec = 1;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 16;
  cfg.max_positions = 16;
  cfg.dropout = 0.0;
  return cfg;
}

Vocabulary toy_vocab() {
  Vocabulary v;
  v.tokens = reserved_tokens();
  for (const char* w : {"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta"}) {
    v.tokens.push_back(w);
  }
  v.counts.assign(v.tokens.size(), 0);
  for (int i = 0; i < static_cast<int>(v.tokens.size()); ++i) v.ids[v.tokens[i]] = i;
  return v;
}

EncodedExample toy_example(int salt, int v_bow) {
  EncodedExample ex;
  ex.x_ids = {kClsId, 5 + salt % 7, 5 + (salt + 2) % 7, 5 + (salt + 4) % 7};
  ex.y_ids = {kBosId, 5 + salt % 7, 5 + (salt + 1) % 7, kEosId};
  ex.x_bow.assign(v_bow, 0.0);
  ex.x_bow[salt % v_bow] = 2.0;
  ex.x_bow[(salt + 3) % v_bow] = 1.0;
  return ex;
}

JointData toy_data(int n_train, int n_valid, int n_test, const Vocabulary* vocab) {
  JointData data;
  const int v_bow = small_ntm_config().v_bow;
  for (int i = 0; i < n_train; ++i) data.train.push_back(toy_example(i, v_bow));
  for (int i = 0; i < n_valid; ++i) {
    data.valid.push_back(toy_example(100 + i, v_bow));
    data.valid_refs.push_back("alpha beta gamma");
  }
  for (int i = 0; i < n_test; ++i) {
    data.test.push_back(toy_example(200 + i, v_bow));
    data.test_refs.push_back("beta gamma delta");
  }
  data.vocab = vocab;
  data.decode_max_len = 6;
  return data;
}

bool same_params(const std::vector<const Parameter*>& a,
                 const std::vector<const Parameter*>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (*a[i]->value.data != *b[i]->value.data) return false;
  }
  return true;
}

template <typename M>
std::vector<const Parameter*> const_params(const M& m) {
  return m.parameters();
}

std::vector<std::vector<double>> copy_params(const std::vector<Parameter*>& ps) {
  std::vector<std::vector<double>> out;
  for (const Parameter* p : ps) out.push_back(*p->value.data);
  return out;
}

// Mirrors the trainer's epoch shuffle so tests can predict visit order.
void reference_shuffle(std::vector<int>& order, Rng& rng) {
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("sequence averaged nll matches hand-computed values") {
  SUBCASE("uniform logits score log V at every position") {
    Tensor logits = Tensor::from({3, 5}, std::vector<double>(15, 0.7));
    Tensor loss = sequence_nll(logits, {0, 2, 4}, {1.0, 1.0, 1.0});
    CHECK(loss.value() == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  }
  SUBCASE("known per-position probabilities average their logs") {
    // Row 0 puts 1/2 on its target, row 1 puts 1/4.
    Tensor logits = Tensor::from({2, 4}, {std::log(3.0), 0.0, 0.0, 0.0,  //
                                          0.0, 0.0, 0.0, 0.0});
    Tensor loss = sequence_nll(logits, {0, 3}, {1.0, 1.0});
    const double expected = (std::log(2.0) + std::log(4.0)) / 2.0;
    CHECK(loss.value() == doctest::Approx(expected).epsilon(1e-12));
    CHECK(loss.value() == doctest::Approx(1.0397207708399179).epsilon(1e-12));
  }
  SUBCASE("masked positions are excluded from the mean") {
    Tensor wide = Tensor::from({3, 4}, {std::log(3.0), 0.0, 0.0, 0.0,  //
                                        9.0, -9.0, 3.0, 1.0,           //
                                        0.0, 0.0, 0.0, 0.0});
    Tensor narrow = Tensor::from({2, 4}, {std::log(3.0), 0.0, 0.0, 0.0,  //
                                          0.0, 0.0, 0.0, 0.0});
    Tensor masked = sequence_nll(wide, {0, 1, 3}, {1.0, 0.0, 1.0});
    Tensor dense = sequence_nll(narrow, {0, 3}, {1.0, 1.0});
    CHECK(masked.value() == doctest::Approx(dense.value()).epsilon(1e-12));
  }
  SUBCASE("degenerate calls are rejected") {
    Tensor logits = Tensor::from({2, 3}, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
    CHECK_THROWS_AS(sequence_nll(logits, {0, 1}, {0.0, 0.0}), NumericError);
    CHECK_THROWS_AS(sequence_nll(logits, {0}, {1.0, 1.0}), ShapeError);
    CHECK_THROWS_AS(sequence_nll(logits, {0, 3}, {1.0, 1.0}), ShapeError);
    CHECK_THROWS_AS(sequence_nll(logits, {0, -1}, {1.0, 1.0}), ShapeError);
  }
  SUBCASE("gradient agrees with finite differences") {
    Rng rng(31);
    std::vector<double> vals(12);
    for (double& v : vals) v = rng.normal();
    Parameter logits("logits", Tensor::from({4, 3}, vals, true));
    std::vector<Parameter*> params = {&logits};
    auto make_loss = [&] {
      return sequence_nll(logits.value, {2, 0, 1, 2}, {1.0, 1.0, 0.0, 1.0});
    };
    GradCheckReport report = check_gradients(make_loss, params);
    CHECK(report.max_rel_err < 1e-6);
    CHECK(report.entries_checked == 12);
  }
}

TEST_CASE("joint objective combines the two losses with the topic weight") {
  SUBCASE("hand case: 2 + 0.75 * 4 = 5") {
    Tensor loss = joint_objective(Tensor::scalar(2.0), Tensor::scalar(-4.0), 0.75);
    CHECK(loss.value() == 5.0);
  }
  SUBCASE("zero weight leaves the summarization loss bit-identical") {
    Parameter a("a", Tensor::scalar(1.375, true));
    Parameter b("b", Tensor::scalar(-2.5, true));
    Tensor sum_loss = ops::mul_scalar(a.value, 3.0);
    Tensor loss = joint_objective(sum_loss, ops::mul_scalar(b.value, 5.0), 0.0);
    CHECK(loss.value() == sum_loss.value());
    a.zero_grad();
    b.zero_grad();
    backward(loss);
    CHECK((*a.value.grad)[0] == 3.0);
    CHECK((*b.value.grad)[0] == 0.0);
  }
  SUBCASE("the default weight is 0.75") {
    CHECK(TrainConfig{}.lambda_ntm == 0.75);
  }
}

TEST_CASE("gradient clipping rescales only above the threshold") {
  auto make = [](std::vector<double> grads) {
    Parameter p("p", Tensor::zeros({static_cast<int>(grads.size())}, true));
    *p.value.grad = grads;
    return p;
  };
  SUBCASE("norm below the threshold is untouched") {
    Parameter p = make({3.0, 4.0});
    CHECK(global_grad_norm({&p}) == 5.0);
    CHECK(clip_gradients({&p}, 10.0) == 5.0);
    CHECK((*p.value.grad)[0] == 3.0);
    CHECK((*p.value.grad)[1] == 4.0);
  }
  SUBCASE("norm above the threshold is scaled down to it") {
    Parameter p = make({3.0, 4.0});
    CHECK(clip_gradients({&p}, 2.5) == 5.0);
    CHECK((*p.value.grad)[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK((*p.value.grad)[1] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(global_grad_norm({&p}) == doctest::Approx(2.5).epsilon(1e-12));
  }
  SUBCASE("non-positive threshold only measures") {
    Parameter p = make({3.0, 4.0});
    CHECK(clip_gradients({&p}, 0.0) == 5.0);
    CHECK((*p.value.grad)[0] == 3.0);
  }
  SUBCASE("the norm spans several parameters") {
    Parameter p = make({1.0, 2.0});
    Parameter q = make({2.0});
    CHECK(global_grad_norm({&p, &q}) == 3.0);
  }
}

TEST_CASE("warmup scale ramps linearly then saturates") {
  CHECK(warmup_scale(1, 100) == 0.01);
  CHECK(warmup_scale(50, 100) == 0.5);
  CHECK(warmup_scale(100, 100) == 1.0);
  CHECK(warmup_scale(5000, 100) == 1.0);
  CHECK(warmup_scale(1, 0) == 1.0);
  CHECK(warmup_scale(1, -3) == 1.0);
}

TEST_CASE("optimizer factory and config validation reject unknown names") {
  CHECK(make_optimizer("adam") != nullptr);
  CHECK(make_optimizer("adadelta") != nullptr);
  CHECK_THROWS_AS(make_optimizer("sgd"), IoError);

  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  TrainConfig bad = cfg;
  bad.optimizer = "rmsprop";
  CHECK_THROWS_AS(bad.validate(), IoError);
  bad = cfg;
  bad.theta_mode = "mode";
  CHECK_THROWS_AS(bad.validate(), IoError);
  bad = cfg;
  bad.lambda_ntm = -0.1;
  CHECK_THROWS_AS(bad.validate(), IoError);
  bad = cfg;
  bad.checkpoint_top_k = 0;
  CHECK_THROWS_AS(bad.validate(), IoError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), IoError);
  bad = cfg;
  bad.lr_joint = 0.0;
  CHECK_THROWS_AS(bad.validate(), IoError);
}

TEST_CASE("adam drives a quadratic to its minimum") {
  Parameter p("p", Tensor::from({4}, {5.0, -3.0, 0.25, 8.0}, true));
  Tensor target = Tensor::from({4}, {1.0, 2.0, -1.0, 0.5});
  AdamOptimizer opt;
  double final_loss = 0.0;
  for (int step = 0; step < 5000; ++step) {
    Tensor diff = ops::sub(p.value, target);
    Tensor loss = ops::sum(ops::mul(diff, diff));
    p.zero_grad();
    backward(loss);
    opt.step({&p}, 1e-2);
    final_loss = loss.value();
  }
  CHECK(final_loss <= 1e-6);

  SUBCASE("the first update approximates a signed step of size lr") {
    Parameter q("q", Tensor::from({2}, {1.0, -1.0}, true));
    *q.value.grad = {0.5, -0.25};
    AdamOptimizer fresh;
    fresh.step({&q}, 1e-2);
    CHECK((*q.value.data)[0] == doctest::Approx(1.0 - 1e-2).epsilon(1e-6));
    CHECK((*q.value.data)[1] == doctest::Approx(-1.0 + 1e-2).epsilon(1e-6));
  }
}

TEST_CASE("adadelta also minimizes the quadratic") {
  Parameter p("p", Tensor::from({2}, {4.0, -2.0}, true));
  Tensor target = Tensor::from({2}, {1.0, 1.0});
  AdadeltaOptimizer opt;
  double first = -1.0, last = -1.0;
  for (int step = 0; step < 3000; ++step) {
    Tensor diff = ops::sub(p.value, target);
    Tensor loss = ops::sum(ops::mul(diff, diff));
    if (step == 0) first = loss.value();
    p.zero_grad();
    backward(loss);
    opt.step({&p}, 1.0);
    last = loss.value();
  }
  CHECK(last < first * 1e-3);
}

TEST_CASE("ntm pretraining lowers the loss and is reproducible") {
  const int v_bow = 12;
  std::vector<std::vector<double>> bows;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> bow(v_bow, 0.0);
    const int base = (i % 2) * 6;
    bow[base + i % 3] = 3.0;
    bow[base + (i + 1) % 3] = 2.0;
    bow[base + 3 + i % 3] = 1.0;
    bows.push_back(bow);
  }
  NtmConfig ncfg = small_ntm_config();
  ncfg.v_bow = v_bow;
  TrainConfig cfg;
  cfg.max_epochs = 8;
  cfg.batch_size = 8;
  cfg.lr_ntm = 1e-2;
  cfg.warmup_steps = 4;
  cfg.seed = 7;

  NtmModel model(ncfg, Rng(11));
  std::ostringstream metrics;
  PretrainResult result = pretrain_ntm(model, bows, cfg, &metrics);
  CHECK_FALSE(result.aborted);
  REQUIRE(result.epoch_loss.size() == 8);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());

  SUBCASE("metrics rows carry epoch numbers and empty decode columns") {
    std::vector<std::string> lines = split_lines(metrics.str());
    REQUIRE(lines.size() == 9);
    CHECK(lines[0] == "step,split,loss,rouge1,rouge2,rougeL");
    CHECK(lines[1].rfind("1,pretrain,", 0) == 0);
    CHECK(lines[8].rfind("8,pretrain,", 0) == 0);
    for (size_t i = 1; i < lines.size(); ++i) {
      CHECK(lines[i].substr(lines[i].size() - 3) == ",,,");
    }
  }
  SUBCASE("a second run from the same seeds lands on identical parameters") {
    NtmModel again(ncfg, Rng(11));
    PretrainResult repeat = pretrain_ntm(again, bows, cfg);
    CHECK(repeat.epoch_loss == result.epoch_loss);
    CHECK(same_params(const_params(model),
                      const_params(again)));
  }
  SUBCASE("an empty corpus is rejected") {
    NtmModel fresh(ncfg, Rng(1));
    CHECK_THROWS_AS(pretrain_ntm(fresh, {}, cfg), IoError);
  }
}

TEST_CASE("divergence during pretraining restores the last finished epoch") {
  const int v_bow = 12;
  std::vector<std::vector<double>> bows;
  for (int i = 0; i < 16; ++i) {
    std::vector<double> bow(v_bow, 0.0);
    bow[i % v_bow] = 4.0;
    bows.push_back(bow);
  }
  NtmConfig ncfg = small_ntm_config();
  ncfg.v_bow = v_bow;
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 8;
  cfg.lr_ntm = 1e12;
  cfg.warmup_steps = 0;
  cfg.seed = 3;

  NtmModel model(ncfg, Rng(5));
  std::vector<std::vector<double>> before = copy_params(model.parameters());
  PretrainResult result = pretrain_ntm(model, bows, cfg);
  CHECK(result.aborted);
  CHECK(result.epoch_loss.empty());
  std::vector<std::vector<double>> after = copy_params(model.parameters());
  CHECK(before == after);
}

TEST_CASE("a joint step scores the batch as the mean of per-example losses") {
  Vocabulary vocab = toy_vocab();
  JointData data = toy_data(8, 0, 0, nullptr);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 1;
  cfg.eval_interval = 0;
  cfg.clip_norm = 0.0;
  cfg.warmup_steps = 0;
  cfg.lambda_ntm = 0.75;
  cfg.theta_mode = "sample";
  cfg.seed = 21;

  NtmConfig ncfg = small_ntm_config();
  TransformerConfig tcfg = small_tf_config();
  NtmModel ntm(ncfg, Rng(100));
  SummarizerModel model(tcfg, Rng(200));
  JointResult result = train_joint(ntm, model, data, cfg);
  REQUIRE(result.step_loss.size() == 1);

  // Replay the same step by hand on freshly constructed models.
  NtmModel ntm2(ncfg, Rng(100));
  SummarizerModel model2(tcfg, Rng(200));
  Rng noise_rng = Rng(cfg.seed).derive("joint-noise");
  Rng shuffle_rng = Rng(cfg.seed).derive("joint-shuffle");
  std::vector<int> order(data.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  reference_shuffle(order, shuffle_rng);

  std::vector<Tensor> nlls, elbos;
  for (int k = 0; k < cfg.batch_size; ++k) {
    const EncodedExample& ex = data.train[order[k]];
    Tensor bow = Tensor::from({1, ncfg.v_bow}, ex.x_bow);
    Tensor noise = Tensor::zeros({1, ncfg.d_z});
    for (double& v : *noise.data) v = noise_rng.normal();
    NtmModel::Forward fwd = ntm2.forward(bow, noise);

    std::vector<double> x_mask(ex.x_ids.size(), 1.0);
    EncoderStates gated = model2.encoder_gate(model2.encode(ex.x_ids, x_mask),
                                              fwd.theta, GatingMode::kOn);
    std::vector<int> prefix(ex.y_ids.size());
    prefix[0] = kClsId;
    std::copy(ex.y_ids.begin(), ex.y_ids.end() - 1, prefix.begin() + 1);
    Tensor states = model2.decode(prefix, gated, fwd.theta, GatingMode::kOn);
    const int m = static_cast<int>(ex.y_ids.size()) - 1;
    Tensor logits = model2.project_logits(ops::slice_rows(states, 1, m));
    std::vector<int> targets(ex.y_ids.begin() + 1, ex.y_ids.end());
    nlls.push_back(sequence_nll(logits, targets, std::vector<double>(m, 1.0)));
    elbos.push_back(fwd.elbo);
  }
  auto mean_of = [](const std::vector<Tensor>& parts) {
    Tensor acc = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) acc = ops::add(acc, parts[i]);
    return ops::mul_scalar(acc, 1.0 / static_cast<double>(parts.size()));
  };
  Tensor expected =
      joint_objective(mean_of(nlls), mean_of(elbos), cfg.lambda_ntm);
  CHECK(result.step_loss[0] == expected.value());
}

TEST_CASE("joint training is deterministic given the seeds") {
  Vocabulary vocab = toy_vocab();
  JointData data = toy_data(8, 2, 0, &vocab);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 6;
  cfg.eval_interval = 3;
  cfg.warmup_steps = 2;
  cfg.seed = 9;
  cfg.theta_mode = "mean";

  NtmConfig ncfg = small_ntm_config();
  TransformerConfig tcfg = small_tf_config();
  tcfg.dropout = 0.1;

  NtmModel ntm_a(ncfg, Rng(1));
  SummarizerModel model_a(tcfg, Rng(2));
  JointResult a = train_joint(ntm_a, model_a, data, cfg);
  NtmModel ntm_b(ncfg, Rng(1));
  SummarizerModel model_b(tcfg, Rng(2));
  JointResult b = train_joint(ntm_b, model_b, data, cfg);

  CHECK(a.step_loss == b.step_loss);
  CHECK(a.evals == b.evals);
  CHECK(a.retained_steps == b.retained_steps);
  CHECK(same_params(const_params(ntm_a),
                    const_params(ntm_b)));
  CHECK(same_params(const_params(model_a),
                    const_params(model_b)));
}

TEST_CASE("forcing the gates to zero reproduces the ungated run bit for bit") {
  Vocabulary vocab = toy_vocab();
  JointData data = toy_data(8, 2, 2, &vocab);
  TrainConfig base;
  base.batch_size = 4;
  base.max_steps = 8;
  base.eval_interval = 4;
  base.warmup_steps = 2;
  base.seed = 17;
  base.theta_mode = "sample";

  NtmConfig ncfg = small_ntm_config();
  TransformerConfig tcfg = small_tf_config();
  tcfg.dropout = 0.1;

  TrainConfig forced = base;
  forced.gating = GatingMode::kForceZero;
  NtmModel ntm_f(ncfg, Rng(4));
  SummarizerModel model_f(tcfg, Rng(8));
  JointResult rf = train_joint(ntm_f, model_f, data, forced);

  TrainConfig off = base;
  off.gating = GatingMode::kOff;
  NtmModel ntm_o(ncfg, Rng(4));
  SummarizerModel model_o(tcfg, Rng(8));
  JointResult ro = train_joint(ntm_o, model_o, data, off);

  CHECK(rf.step_loss == ro.step_loss);
  CHECK(rf.evals == ro.evals);
  CHECK(rf.test_loss == ro.test_loss);
  CHECK(rf.test_rouge1 == ro.test_rouge1);
  CHECK(same_params(const_params(model_f),
                    const_params(model_o)));
  CHECK(same_params(const_params(ntm_f),
                    const_params(ntm_o)));
}

TEST_CASE("freezing the topic model keeps its parameters fixed") {
  Vocabulary vocab = toy_vocab();
  JointData data = toy_data(8, 0, 0, nullptr);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 4;
  cfg.eval_interval = 0;
  cfg.seed = 2;
  cfg.freeze_ntm = true;

  NtmModel ntm(small_ntm_config(), Rng(3));
  SummarizerModel model(small_tf_config(), Rng(6));
  std::vector<std::vector<double>> ntm_before = copy_params(ntm.parameters());
  std::vector<std::vector<double>> sum_before = copy_params(model.parameters());
  train_joint(ntm, model, data, cfg);
  CHECK(copy_params(ntm.parameters()) == ntm_before);
  CHECK(copy_params(model.parameters()) != sum_before);
}

TEST_CASE("evaluation retains the best checkpoints and averages test metrics") {
  Vocabulary vocab = toy_vocab();
  JointData data = toy_data(8, 3, 3, &vocab);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 10;
  cfg.eval_interval = 2;
  cfg.checkpoint_top_k = 3;
  cfg.warmup_steps = 2;
  cfg.seed = 13;

  NtmModel ntm(small_ntm_config(), Rng(14));
  SummarizerModel model(small_tf_config(), Rng(15));
  std::ostringstream metrics;
  const std::string out_dir = "build/tmp_joint_run";
  std::filesystem::remove_all(out_dir);
  JointResult result = train_joint(ntm, model, data, cfg, &metrics, out_dir);

  REQUIRE(result.evals.size() == 5);
  REQUIRE(result.retained_steps.size() == 3);
  for (long long s : result.retained_steps) CHECK(s % 2 == 0);

  // Retained steps must be the three smallest validation losses, best first.
  std::vector<std::pair<long long, double>> ranked = result.evals;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  for (int i = 0; i < 3; ++i) CHECK(result.retained_steps[i] == ranked[i].first);

  CHECK(result.has_test);
  CHECK(std::isfinite(result.test_loss));
  CHECK(result.test_rouge1 >= 0.0);
  CHECK(result.test_rouge1 <= 100.0);
  CHECK(result.test_rougeL >= 0.0);
  CHECK(result.test_rougeL <= 100.0);

  SUBCASE("the metrics stream covers train, valid and test splits") {
    std::vector<std::string> lines = split_lines(metrics.str());
    REQUIRE(lines.size() >= 1 + 5 * 2 + 3);
    CHECK(lines[0] == "step,split,loss,rouge1,rouge2,rougeL");
    int trains = 0, valids = 0, tests = 0;
    for (size_t i = 1; i < lines.size(); ++i) {
      const std::string& l = lines[i];
      if (l.find(",train,") != std::string::npos) {
        ++trains;
        CHECK(l.substr(l.size() - 3) == ",,,");
      }
      if (l.find(",valid,") != std::string::npos) {
        ++valids;
        CHECK(std::count(l.begin(), l.end(), ',') == 5);
        CHECK(l.substr(l.size() - 3) != ",,,");
      }
      if (l.find(",test,") != std::string::npos) ++tests;
    }
    CHECK(trains == 5);
    CHECK(valids == 5);
    CHECK(tests == 3);
  }

  SUBCASE("the models end at the best retained parameters") {
    auto [ck_ntm, ck_model] =
        load_joint_checkpoint(out_dir + "/checkpoint_top1.bin");
    CHECK(same_params(const_params(ntm),
                      const_params(ck_ntm)));
    CHECK(same_params(const_params(model),
                      const_params(ck_model)));
    CHECK(std::filesystem::exists(out_dir + "/checkpoint_top2.bin"));
    CHECK(std::filesystem::exists(out_dir + "/checkpoint_top3.bin"));
    CHECK_FALSE(std::filesystem::exists(out_dir + "/checkpoint_top4.bin"));
  }

  SUBCASE("a wider retention budget keeps every evaluation") {
    TrainConfig wide = cfg;
    wide.checkpoint_top_k = 10;
    NtmModel ntm2(small_ntm_config(), Rng(14));
    SummarizerModel model2(small_tf_config(), Rng(15));
    JointResult r2 = train_joint(ntm2, model2, data, wide);
    CHECK(r2.retained_steps.size() == 5);
  }
}

TEST_CASE("joint training without evaluations reports on the final parameters") {
  Vocabulary vocab = toy_vocab();
  JointData data = toy_data(8, 0, 2, &vocab);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 3;
  cfg.eval_interval = 0;
  cfg.seed = 23;

  NtmModel ntm(small_ntm_config(), Rng(30));
  SummarizerModel model(small_tf_config(), Rng(31));
  const std::string out_dir = "build/tmp_joint_noeval";
  std::filesystem::remove_all(out_dir);
  JointResult result = train_joint(ntm, model, data, cfg, nullptr, out_dir);
  CHECK(result.retained_steps.empty());
  CHECK(result.evals.empty());
  CHECK(result.has_test);
  CHECK(std::isfinite(result.test_loss));
  CHECK(std::filesystem::exists(out_dir + "/checkpoint_top1.bin"));

  auto [ck_ntm, ck_model] = load_joint_checkpoint(out_dir + "/checkpoint_top1.bin");
  CHECK(same_params(const_params(ntm),
                    const_params(ck_ntm)));
}

TEST_CASE("combined checkpoints round-trip both models exactly") {
  NtmModel ntm(small_ntm_config(), Rng(40));
  SummarizerModel model(small_tf_config(), Rng(41));
  const std::string path = "build/tmp_joint_pair.bin";
  save_joint_checkpoint(path, ntm, model);
  auto [ntm2, model2] = load_joint_checkpoint(path);

  CHECK(ntm2.cfg.v_bow == ntm.cfg.v_bow);
  CHECK(ntm2.cfg.k_flows == ntm.cfg.k_flows);
  CHECK(model2.cfg.v_tok == model.cfg.v_tok);
  CHECK(model2.cfg.d_model == model.cfg.d_model);
  CHECK(same_params(const_params(ntm),
                    const_params(ntm2)));
  CHECK(same_params(const_params(model),
                    const_params(model2)));

  SUBCASE("a single-model file is rejected as a joint checkpoint") {
    const std::string solo = "build/tmp_solo_ntm.bin";
    ntm.save(solo);
    CHECK_THROWS_AS(load_joint_checkpoint(solo), IoError);
  }
}
