#pragma once

#include <functional>
#include <string>
#include <vector>

#include "topicflow/tensor.h"

namespace topicflow {

struct GradCheckReport {
  // Error is scaled: |analytic - numeric| / max(1, |analytic|, |numeric|),
  // so it is absolute for small gradients and relative for large ones.
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  size_t entries_checked = 0;
};

// Compares reverse-mode gradients of the scalar produced by make_loss against
// central finite differences over every entry of every parameter. make_loss
// must be a pure function of the parameter values (rebuild the graph on each
// call; fix any sampling noise outside it).
GradCheckReport check_gradients(const std::function<Tensor()>& make_loss,
                                const std::vector<Parameter*>& params,
                                double step = 1e-5);

}  // namespace topicflow
