#include "sacnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sacnet/errors.hpp"

namespace sacnet {

std::string GradCheckReport::summary() const {
  std::ostringstream out;
  out << (passed ? "ok" : "FAILED") << " checked=" << checked << " max_rel_err=" << max_rel_error
      << " worst=(input " << worst_input << ", index " << worst_index << ", analytic "
      << worst_analytic << ", numeric " << worst_numeric << ")";
  return out.str();
}

namespace {
double evaluate(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  const Tensor out = f(inputs);
  if (out.numel() != 1) {
    throw ContractError("grad_check: function must return a scalar, got " + shape_str(out.shape()));
  }
  return out.item();
}
}  // namespace

GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
  if (options.eps <= 0.0) throw ParameterError("grad_check: eps must be positive");
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  {
    Tape tape;
    const Tensor out = f(inputs);
    if (out.numel() != 1) {
      throw ContractError("grad_check: function must return a scalar, got " +
                          shape_str(out.shape()));
    }
    tape.backward(out);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& in : inputs) {
    analytic.emplace_back(in.numel(), 0.0);
    if (in.has_grad()) std::copy(in.grad().begin(), in.grad().end(), analytic.back().begin());
  }

  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) entries.emplace_back(k, i);
  if (options.max_entries > 0 && entries.size() > options.max_entries) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(options.max_entries);
    std::sort(entries.begin(), entries.end());
  }

  GradCheckReport report;
  for (const auto& [k, i] : entries) {
    auto values = inputs[k].mutable_data();
    const double saved = values[i];
    values[i] = saved + options.eps;
    const double up = evaluate(f, inputs);
    values[i] = saved - options.eps;
    const double down = evaluate(f, inputs);
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * options.eps);
    const double a = analytic[k][i];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.checked;
    if (!(rel <= report.max_rel_error)) {
      report.max_rel_error = std::isnan(rel) ? INFINITY : rel;
      report.worst_input = k;
      report.worst_index = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.max_rel_error <= options.tol;
  return report;
}

}  // namespace sacnet
