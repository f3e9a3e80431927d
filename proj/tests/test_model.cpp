#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "topicflow/corpus.h"
#include "topicflow/gradcheck.h"
#include "topicflow/model.h"
#include "topicflow/ops.h"

using namespace topicflow;
namespace op = topicflow::ops;

namespace {

TransformerConfig small_config() {
  TransformerConfig cfg;
  cfg.v_tok = 12;
  cfg.t_topics = 3;
  cfg.layers_enc = 1;
  cfg.layers_dec = 1;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 16;
  cfg.max_positions = 16;
  cfg.dropout = 0.0;
  return cfg;
}

Tensor toy_theta() { return Tensor::from({1, 3}, {0.5, 0.3, 0.2}); }

bool same_values(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  for (size_t i = 0; i < a.data->size(); ++i) {
    if ((*a.data)[i] != (*b.data)[i]) return false;
  }
  return true;
}

// Recomputes the topic transform c = tanh([rows, theta] W + b) the way the
// gate does, for use as a reference in the blending tests.
Tensor reference_transform(const Tensor& rows, const Tensor& theta,
                           const Parameter& w, const Parameter& b) {
  Tensor t = op::matmul(Tensor::full({rows.shape[0], 1}, 1.0), theta);
  return op::tanh(op::add_rows(op::matmul(op::concat_cols({rows, t}), w.value), b.value));
}

}  // namespace

TEST_CASE("gating mode names round-trip") {
  for (GatingMode m : {GatingMode::kOn, GatingMode::kOff, GatingMode::kForceZero,
                       GatingMode::kForceOne}) {
    CHECK(gating_mode_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(gating_mode_from_string("sometimes"), IoError);
}

TEST_CASE("encoder and decoder produce the documented shapes") {
  SummarizerModel model(small_config(), Rng(7));
  std::vector<int> x_ids = {kClsId, 5, 6, 7};
  std::vector<double> x_mask = {1, 1, 1, 1};
  EncoderStates enc = model.encode(x_ids, x_mask);
  CHECK(enc.h_cls.shape == std::vector<int>{1, 8});
  CHECK(enc.tokens.shape == std::vector<int>{3, 8});
  CHECK(enc.cross_mask.size() == 3);

  Tensor theta = toy_theta();
  EncoderStates gated = model.encoder_gate(enc, theta, GatingMode::kOn);
  CHECK(gated.tokens.shape == enc.tokens.shape);
  CHECK(gated.cross_mask == enc.cross_mask);

  Tensor s = model.decode({kClsId, kBosId, 8, 9}, gated, theta, GatingMode::kOn);
  CHECK(s.shape == std::vector<int>{4, 8});
  Tensor logits = model.project_logits(s);
  CHECK(logits.shape == std::vector<int>{4, 12});
}

TEST_CASE("construction is deterministic in the seed") {
  SummarizerModel a(small_config(), Rng(11));
  SummarizerModel b(small_config(), Rng(11));
  SummarizerModel c(small_config(), Rng(12));
  auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(same_values(pa[i]->value, pb[i]->value));
  }
  CHECK_FALSE(same_values(a.embed.value, c.embed.value));
}

TEST_CASE("repeated forward passes are bit-identical") {
  SummarizerModel model(small_config(), Rng(3));
  Tensor theta = toy_theta();
  auto run = [&]() {
    EncoderStates enc = model.encode({kClsId, 5, 6, 7}, {1, 1, 1, 1});
    EncoderStates gated = model.encoder_gate(enc, theta, GatingMode::kOn);
    Tensor s = model.decode({kClsId, kBosId, 8, 9}, gated, theta, GatingMode::kOn);
    return model.project_logits(s);
  };
  CHECK(same_values(run(), run()));
}

TEST_CASE("gate pinned to zero reproduces the ungated states") {
  SummarizerModel model(small_config(), Rng(5));
  Tensor theta = toy_theta();
  EncoderStates enc = model.encode({kClsId, 5, 6, 7, 8}, {1, 1, 1, 1, 1});

  EncoderStates zeroed = model.encoder_gate(enc, theta, GatingMode::kForceZero);
  CHECK(same_values(zeroed.h_cls, enc.h_cls));
  CHECK(same_values(zeroed.tokens, enc.tokens));

  EncoderStates off = model.encoder_gate(enc, theta, GatingMode::kOff);
  Tensor s_zero = model.decode({kClsId, kBosId, 9, 10}, zeroed, theta, GatingMode::kForceZero);
  Tensor s_off = model.decode({kClsId, kBosId, 9, 10}, off, theta, GatingMode::kOff);
  CHECK(same_values(s_zero, s_off));
  CHECK(same_values(model.project_logits(s_zero), model.project_logits(s_off)));
}

TEST_CASE("gate pinned to one gives the pure topic transform") {
  SummarizerModel model(small_config(), Rng(6));
  Tensor theta = toy_theta();
  EncoderStates enc = model.encode({kClsId, 5, 6}, {1, 1, 1});

  EncoderStates one = model.encoder_gate(enc, theta, GatingMode::kForceOne);
  Tensor all = op::concat_rows({enc.h_cls, enc.tokens});
  Tensor c = reference_transform(all, theta, model.gate.enc_topic_w, model.gate.enc_topic_b);
  CHECK(same_values(one.h_cls, op::select_row(c, 0)));
  CHECK(same_values(one.tokens, op::slice_rows(c, 1, 2)));

  Tensor s_off = model.decode({kClsId, kBosId, 7}, enc, theta, GatingMode::kOff);
  Tensor s_one = model.decode({kClsId, kBosId, 7}, enc, theta, GatingMode::kForceOne);
  Tensor cd = reference_transform(s_off, theta, model.gate.dec_topic_w, model.gate.dec_topic_b);
  CHECK(same_values(s_one, cd));
}

TEST_CASE("zero gate weights blend state and transform at the midpoint") {
  SummarizerModel model(small_config(), Rng(9));
  for (Parameter* p : {&model.gate.we, &model.gate.be, &model.gate.w1d, &model.gate.w2d,
                       &model.gate.bd}) {
    std::fill(p->value.data->begin(), p->value.data->end(), 0.0);
  }
  Tensor theta = toy_theta();
  EncoderStates enc = model.encode({kClsId, 5, 6}, {1, 1, 1});

  EncoderStates on = model.encoder_gate(enc, theta, GatingMode::kOn);
  Tensor all = op::concat_rows({enc.h_cls, enc.tokens});
  Tensor c = reference_transform(all, theta, model.gate.enc_topic_w, model.gate.enc_topic_b);
  Tensor got = op::concat_rows({on.h_cls, on.tokens});
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 8; ++j) {
      CHECK(got.at(i, j) == 0.5 * c.at(i, j) + 0.5 * all.at(i, j));
    }
  }

  Tensor s_off = model.decode({kClsId, kBosId, 7}, on, theta, GatingMode::kOff);
  Tensor s_on = model.decode({kClsId, kBosId, 7}, on, theta, GatingMode::kOn);
  Tensor cd = reference_transform(s_off, theta, model.gate.dec_topic_w, model.gate.dec_topic_b);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 8; ++j) {
      CHECK(s_on.at(i, j) == 0.5 * cd.at(i, j) + 0.5 * s_off.at(i, j));
    }
  }
}

TEST_CASE("gated rows stay between the state and its transform") {
  SummarizerModel model(small_config(), Rng(14));
  Tensor theta = toy_theta();
  EncoderStates enc = model.encode({kClsId, 5, 6, 7}, {1, 1, 1, 1});
  EncoderStates gated = model.encoder_gate(enc, theta, GatingMode::kOn);

  Tensor s_off = model.decode({kClsId, kBosId, 8, 9}, gated, theta, GatingMode::kOff);
  Tensor s_on = model.decode({kClsId, kBosId, 8, 9}, gated, theta, GatingMode::kOn);
  Tensor cd = reference_transform(s_off, theta, model.gate.dec_topic_w, model.gate.dec_topic_b);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 8; ++j) {
      const double lo = std::min(s_off.at(i, j), cd.at(i, j));
      const double hi = std::max(s_off.at(i, j), cd.at(i, j));
      CHECK(s_on.at(i, j) >= lo - 1e-12);
      CHECK(s_on.at(i, j) <= hi + 1e-12);
    }
  }
}

TEST_CASE("padding never changes the states of real positions") {
  SummarizerModel model(small_config(), Rng(21));
  Tensor theta = toy_theta();
  EncoderStates tight = model.encode({kClsId, 5, 6, 7}, {1, 1, 1, 1});
  EncoderStates padded =
      model.encode({kClsId, 5, 6, 7, kPadId, kPadId}, {1, 1, 1, 1, 0, 0});

  CHECK(same_values(tight.h_cls, padded.h_cls));
  CHECK(padded.tokens.shape[0] == 5);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 8; ++j) CHECK(tight.tokens.at(i, j) == padded.tokens.at(i, j));
  }

  EncoderStates g1 = model.encoder_gate(tight, theta, GatingMode::kOn);
  EncoderStates g2 = model.encoder_gate(padded, theta, GatingMode::kOn);
  Tensor s1 = model.decode({kClsId, kBosId, 8, 9}, g1, theta, GatingMode::kOn);
  Tensor s2 = model.decode({kClsId, kBosId, 8, 9}, g2, theta, GatingMode::kOn);
  CHECK(same_values(s1, s2));
}

TEST_CASE("decoder states depend only on earlier prefix positions") {
  SummarizerModel model(small_config(), Rng(2));
  Tensor theta = toy_theta();
  EncoderStates enc = model.encode({kClsId, 5, 6}, {1, 1, 1});
  EncoderStates gated = model.encoder_gate(enc, theta, GatingMode::kOn);

  Tensor a = model.decode({kClsId, kBosId, 7, 8, 9}, gated, theta, GatingMode::kOn);
  Tensor b = model.decode({kClsId, kBosId, 7, 8, 10}, gated, theta, GatingMode::kOn);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 8; ++j) CHECK(a.at(i, j) == b.at(i, j));
  }
  bool last_differs = false;
  for (int j = 0; j < 8; ++j) {
    if (a.at(4, j) != b.at(4, j)) last_differs = true;
  }
  CHECK(last_differs);
}

TEST_CASE("dropout draws from the given stream and only there") {
  TransformerConfig cfg = small_config();
  cfg.dropout = 0.3;
  SummarizerModel model(cfg, Rng(4));
  Tensor theta = toy_theta();
  std::vector<int> x = {kClsId, 5, 6, 7};
  std::vector<double> m = {1, 1, 1, 1};

  Rng r1(100), r2(100), r3(101);
  ForwardCtx c1{&r1}, c2{&r2}, c3{&r3};
  EncoderStates e1 = model.encode(x, m, c1);
  EncoderStates e2 = model.encode(x, m, c2);
  EncoderStates e3 = model.encode(x, m, c3);
  CHECK(same_values(e1.tokens, e2.tokens));
  CHECK_FALSE(same_values(e1.tokens, e3.tokens));

  EncoderStates eval1 = model.encode(x, m);
  EncoderStates eval2 = model.encode(x, m);
  CHECK(same_values(eval1.tokens, eval2.tokens));
  CHECK_FALSE(same_values(eval1.tokens, e1.tokens));

  // A zero rate leaves the stream untouched even when one is supplied.
  TransformerConfig dry = small_config();
  SummarizerModel model2(dry, Rng(4));
  Rng r4(55);
  ForwardCtx c4{&r4};
  EncoderStates d1 = model2.encode(x, m, c4);
  EncoderStates d2 = model2.encode(x, m);
  CHECK(same_values(d1.tokens, d2.tokens));
  Rng fresh(55);
  CHECK(r4.uniform() == fresh.uniform());
}

TEST_CASE("tied and untied output projections") {
  TransformerConfig cfg = small_config();
  SummarizerModel tied(cfg, Rng(8));
  Tensor states = Tensor::zeros({2, 8});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 8; ++j) states.set(i, j, 0.1 * (i + 1) * (j - 3));

  Tensor expect = op::add_rows(op::matmul(states, op::transpose(tied.embed.value)),
                               tied.out_b.value);
  CHECK(same_values(tied.project_logits(states), expect));

  cfg.tied_output = false;
  SummarizerModel untied(cfg, Rng(8));
  CHECK(untied.out_w.value.defined());
  Tensor expect2 =
      op::add_rows(op::matmul(states, untied.out_w.value), untied.out_b.value);
  CHECK(same_values(untied.project_logits(states), expect2));
}

TEST_CASE("malformed inputs are rejected") {
  TransformerConfig cfg = small_config();
  cfg.max_positions = 4;
  SummarizerModel model(cfg, Rng(1));
  Tensor theta = toy_theta();
  EncoderStates enc = model.encode({kClsId, 5, 6}, {1, 1, 1});

  CHECK_THROWS_AS(model.encode({5, 6}, {1, 1}), ShapeError);
  CHECK_THROWS_AS(model.encode({kClsId, 5}, {1, 1, 1}), ShapeError);
  CHECK_THROWS_AS(model.encode({kClsId, 5, 6, 7, 8}, {1, 1, 1, 1, 1}), ShapeError);
  CHECK_THROWS_AS(model.decode({kBosId, 5}, enc, theta, GatingMode::kOn), ShapeError);
  CHECK_THROWS_AS(model.decode({kClsId, kBosId, 5, 6, 7}, enc, theta, GatingMode::kOn),
                  ShapeError);

  TransformerConfig bad = small_config();
  bad.heads = 3;
  CHECK_THROWS_AS(SummarizerModel(bad, Rng(1)), ShapeError);
}

TEST_CASE("checkpoint round-trip restores the model exactly") {
  SummarizerModel model(small_config(), Rng(33));
  const std::string path = "build/test_model_ckpt.bin";
  model.save(path);
  SummarizerModel back = SummarizerModel::load(path);
  std::remove(path.c_str());

  auto pa = model.parameters(), pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) CHECK(same_values(pa[i]->value, pb[i]->value));

  Tensor theta = toy_theta();
  auto run = [&](SummarizerModel& m) {
    EncoderStates enc = m.encode({kClsId, 5, 6, 7}, {1, 1, 1, 1});
    EncoderStates gated = m.encoder_gate(enc, theta, GatingMode::kOn);
    return m.project_logits(m.decode({kClsId, kBosId, 8}, gated, theta, GatingMode::kOn));
  };
  CHECK(same_values(run(model), run(back)));
}

TEST_CASE("pipeline gradients match finite differences") {
  SummarizerModel model(small_config(), Rng(17));
  Parameter theta("theta", Tensor::from({1, 3}, {0.5, 0.3, 0.2}, true));

  std::vector<int> x_ids = {kClsId, 5, 6, 7, kPadId};
  std::vector<double> x_mask = {1, 1, 1, 1, 0};
  std::vector<int> prefix = {kClsId, kBosId, 8, 9};
  std::vector<int> targets = {8, 9, kEosId};

  auto make_loss = [&]() {
    EncoderStates enc = model.encode(x_ids, x_mask);
    EncoderStates gated = model.encoder_gate(enc, theta.value, GatingMode::kOn);
    Tensor s = model.decode(prefix, gated, theta.value, GatingMode::kOn);
    Tensor lp = op::log_softmax(model.project_logits(s));
    Tensor pick = Tensor::zeros({4, 12});
    for (size_t i = 0; i < targets.size(); ++i) {
      pick.set(static_cast<int>(i) + 1, targets[i], 1.0);
    }
    return op::mul_scalar(op::sum(op::mul(lp, pick)),
                          -1.0 / static_cast<double>(targets.size()));
  };

  std::vector<Parameter*> params = model.parameters();
  params.push_back(&theta);
  GradCheckReport report = check_gradients(make_loss, params);
  INFO(report.worst_param, "[", report.worst_index, "] analytic ",
       report.worst_analytic, " numeric ", report.worst_numeric);
  CHECK(report.max_rel_err < 1e-4);
  CHECK(report.entries_checked > 1500);
}
