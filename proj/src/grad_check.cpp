#include "hmeqa/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "hmeqa/errors.hpp"

namespace hmeqa {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const LossBuilder& loss) {
  Graph<double> graph;
  const auto out = loss(graph);
  if (out.size() != 1) throw ContractError("grad_check: loss is not scalar");
  const double value = out.value()[0];
  if (!std::isfinite(value)) throw NumericError("grad_check: loss is not finite");
  return value;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, ParameterSet<double>& params, double step) {
  if (!(step > 0.0)) throw ContractError("grad_check: step must be positive");

  params.zero_grad();
  {
    Graph<double> graph;
    const auto out = loss(graph);
    if (!std::isfinite(out.value()[0])) throw NumericError("grad_check: loss is not finite");
    graph.backward(out);
  }

  GradCheckReport report;
  for (auto& p : params) {
    auto values = p.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = evaluate(loss);
      values[i] = saved - step;
      const double down = evaluate(loss);
      values[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad[i];
      const double err = relative_error(analytic, numeric);
      ++report.checked;
      if (err > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = err;
        report.worst_parameter = p.name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace hmeqa
