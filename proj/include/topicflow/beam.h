#pragma once

#include <vector>

#include "topicflow/corpus.h"
#include "topicflow/model.h"

namespace topicflow {

struct BeamResult {
  // Generated ids only (no CLS/BOS prefix). Ends with eos_id when the
  // hypothesis completed naturally; otherwise it was cut at max_len.
  std::vector<int> tokens;
  // Accumulated log-probability divided by length^length_penalty, where
  // length counts every generated token including a terminating EOS.
  double score = 0.0;
};

// Argmax decoding, one token at a time; ties go to the lower token id.
BeamResult greedy_decode(const SummarizerModel& model, const EncoderStates& gated,
                         const Tensor& theta, GatingMode mode, int max_len,
                         int bos_id = kBosId, int eos_id = kEosId);

// Deterministic beam search over log-probabilities. Each step extends every
// live hypothesis by every token, keeps the `beam` best extensions by
// cumulative log-probability, and moves EOS-terminated ones to the finished
// pool. The best finished (or cut) hypothesis by normalized score wins; ties
// break toward the earlier-completed hypothesis, then lexicographic tokens.
BeamResult beam_search(const SummarizerModel& model, const EncoderStates& gated,
                       const Tensor& theta, GatingMode mode, int beam, int max_len,
                       double length_penalty = 1.0, int bos_id = kBosId,
                       int eos_id = kEosId);

}  // namespace topicflow
