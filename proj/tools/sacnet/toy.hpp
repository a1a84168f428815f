#ifndef SACNET_TOOLS_TOY_HPP
#define SACNET_TOOLS_TOY_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "sacnet/datagen.hpp"
#include "sacnet/network.hpp"
#include "sacnet/train.hpp"

namespace sacnet::tools {

/// Seed of pair `index` in a generated set.
std::uint64_t pair_seed(std::uint64_t seed, std::size_t index);

std::vector<SyntheticPair> make_toy_pairs(std::uint64_t seed, std::size_t count, const SceneConfig& scene,
                                          const AffineRanges& ranges);
std::vector<TrainSample> to_samples(const std::vector<SyntheticPair>& pairs);
std::vector<SyntheticPair> load_pairs(const std::filesystem::path& dir);

struct ToyRun {
  TrainResult result;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double mean_iou = 0.0;
};

/// Trains `net` on `samples` and scores the final predictions.
ToyRun run_toy(SACNet& net, const std::vector<TrainSample>& samples, const TrainOptions& options);

}  // namespace sacnet::tools

#endif  // SACNET_TOOLS_TOY_HPP
