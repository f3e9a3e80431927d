#include "topicflow/beam.h"

#include <algorithm>
#include <cmath>

#include "topicflow/ops.h"

namespace topicflow {

namespace {

// Log-probabilities for the next token after the given generated tokens.
std::vector<double> next_token_logprobs(const SummarizerModel& model,
                                        const EncoderStates& gated, const Tensor& theta,
                                        GatingMode mode, int bos_id,
                                        const std::vector<int>& generated) {
  std::vector<int> prefix;
  prefix.reserve(generated.size() + 2);
  prefix.push_back(kClsId);
  prefix.push_back(bos_id);
  prefix.insert(prefix.end(), generated.begin(), generated.end());

  Tensor s = model.decode(prefix, gated, theta, mode);
  Tensor lp = ops::log_softmax(model.project_logits(s));
  const int last = lp.shape[0] - 1;
  std::vector<double> row(lp.shape[1]);
  for (int v = 0; v < lp.shape[1]; ++v) row[v] = lp.at(last, v);
  return row;
}

double normalized_score(double logprob, size_t length, double penalty) {
  return logprob / std::pow(static_cast<double>(length), penalty);
}

struct Hypothesis {
  std::vector<int> tokens;
  double logprob = 0.0;
  int finish_step = 0;  // step index at which it left the live set
};

bool prefers(const Hypothesis& a, double score_a, const Hypothesis& b, double score_b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.finish_step != b.finish_step) return a.finish_step < b.finish_step;
  return a.tokens < b.tokens;
}

}  // namespace

BeamResult greedy_decode(const SummarizerModel& model, const EncoderStates& gated,
                         const Tensor& theta, GatingMode mode, int max_len, int bos_id,
                         int eos_id) {
  if (max_len < 1) throw ShapeError("greedy_decode: max_len must be at least 1");
  NoGradGuard no_grad;
  std::vector<int> tokens;
  double logprob = 0.0;
  for (int step = 0; step < max_len; ++step) {
    std::vector<double> row =
        next_token_logprobs(model, gated, theta, mode, bos_id, tokens);
    int best = 0;
    for (int v = 1; v < static_cast<int>(row.size()); ++v) {
      if (row[v] > row[best]) best = v;
    }
    tokens.push_back(best);
    logprob += row[best];
    if (best == eos_id) break;
  }
  return {tokens, normalized_score(logprob, tokens.size(), 1.0)};
}

BeamResult beam_search(const SummarizerModel& model, const EncoderStates& gated,
                       const Tensor& theta, GatingMode mode, int beam, int max_len,
                       double length_penalty, int bos_id, int eos_id) {
  if (beam < 1) throw ShapeError("beam_search: beam width must be at least 1");
  if (max_len < 1) throw ShapeError("beam_search: max_len must be at least 1");
  NoGradGuard no_grad;

  std::vector<Hypothesis> alive = {Hypothesis{}};
  std::vector<Hypothesis> finished;

  for (int step = 1; step <= max_len && !alive.empty(); ++step) {
    struct Cand {
      int parent;
      int token;
      double logprob;
    };
    std::vector<Cand> cands;
    for (int p = 0; p < static_cast<int>(alive.size()); ++p) {
      std::vector<double> row =
          next_token_logprobs(model, gated, theta, mode, bos_id, alive[p].tokens);
      for (int v = 0; v < static_cast<int>(row.size()); ++v) {
        cands.push_back({p, v, alive[p].logprob + row[v]});
      }
    }
    // All live hypotheses share a length, so lexicographic order of the
    // full sequences reduces to (parent tokens, new token).
    auto better = [&alive](const Cand& a, const Cand& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      const std::vector<int>& ta = alive[a.parent].tokens;
      const std::vector<int>& tb = alive[b.parent].tokens;
      if (ta != tb) return ta < tb;
      return a.token < b.token;
    };
    const size_t keep = std::min<size_t>(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), better);
    cands.resize(keep);

    std::vector<Hypothesis> next;
    for (const Cand& c : cands) {
      Hypothesis h;
      h.tokens = alive[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.logprob = c.logprob;
      h.finish_step = step;
      if (c.token == eos_id) {
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
  }
  // Survivors were cut at max_len; they complete last.
  for (Hypothesis& h : alive) {
    h.finish_step = max_len + 1;
    finished.push_back(std::move(h));
  }

  const Hypothesis* best = nullptr;
  double best_score = 0.0;
  for (const Hypothesis& h : finished) {
    const double score = normalized_score(h.logprob, h.tokens.size(), length_penalty);
    if (!best || prefers(h, score, *best, best_score)) {
      best = &h;
      best_score = score;
    }
  }
  return {best->tokens, best_score};
}

}  // namespace topicflow
