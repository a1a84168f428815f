#ifndef SACNET_TOOLS_SUITES_HPP
#define SACNET_TOOLS_SUITES_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sacnet/gradcheck.hpp"

namespace sacnet::tools {

struct SuiteCase {
  std::string name;
  GradCheckReport report;
};

/// Gradient-check cases for one module: "ops", "acm", "afsm", "losses" or
/// "model" (the end-to-end 64×64 network on a parameter subsample).
std::vector<SuiteCase> run_gradcheck_module(const std::string& module, double tol, std::uint64_t seed,
                                            std::size_t model_entries = 256);

const std::vector<std::string>& gradcheck_modules();

}  // namespace sacnet::tools

#endif  // SACNET_TOOLS_SUITES_HPP
