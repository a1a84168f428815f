#ifndef SACNET_GRADCHECK_HPP
#define SACNET_GRADCHECK_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sacnet/tensor.hpp"

namespace sacnet {

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Upper bound on checked entries across all inputs; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  std::string summary() const;
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences. The inputs are perturbed in place and restored.
/// Throws ContractError when `f` does not return a single value.
GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

}  // namespace sacnet

#endif  // SACNET_GRADCHECK_HPP
