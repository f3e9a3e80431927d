#include "topicflow/gradcheck.h"

#include <cmath>

namespace topicflow {

GradCheckReport check_gradients(const std::function<Tensor()>& make_loss,
                                const std::vector<Parameter*>& params,
                                double step) {
  for (Parameter* p : params) p->value.zero_grad();
  Tensor loss = make_loss();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(*p->value.grad);

  GradCheckReport report;
  NoGradGuard guard;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    auto& data = *p->value.data;
    for (size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = make_loss().value();
      data[i] = saved - step;
      const double down = make_loss().value();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double ga = analytic[pi][i];
      const double denom = std::max({1.0, std::fabs(ga), std::fabs(numeric)});
      const double err = std::fabs(ga - numeric) / denom;
      ++report.entries_checked;
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_param = p->name;
        report.worst_index = static_cast<int>(i);
        report.worst_analytic = ga;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace topicflow
