#include "toy.hpp"

#include "sacnet/errors.hpp"
#include "sacnet/metrics.hpp"

namespace sacnet::tools {

std::uint64_t pair_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 step over (seed, index)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<SyntheticPair> make_toy_pairs(std::uint64_t seed, std::size_t count, const SceneConfig& scene,
                                          const AffineRanges& ranges) {
  std::vector<SyntheticPair> pairs;
  for (std::size_t i = 0; i < count; ++i) pairs.push_back(gen_unaligned_pair(pair_seed(seed, i), scene, ranges));
  return pairs;
}

std::vector<TrainSample> to_samples(const std::vector<SyntheticPair>& pairs) {
  std::vector<TrainSample> out;
  for (const auto& p : pairs) out.push_back({p.rgb, p.thermal, p.gt});
  return out;
}

std::vector<SyntheticPair> load_pairs(const std::filesystem::path& dir) {
  std::vector<SyntheticPair> pairs;
  for (const auto& d : list_pair_dirs(dir)) pairs.push_back(read_pair(d));
  if (pairs.empty()) throw IoError("no pair directories under " + dir.string());
  return pairs;
}

ToyRun run_toy(SACNet& net, const std::vector<TrainSample>& samples, const TrainOptions& options) {
  ToyRun run;
  run.result = train(net, samples, options);
  run.final_loss = run.result.final_eval.total;
  run.initial_loss = run.result.log.empty() ? run.final_loss : run.result.log.front().total;
  for (const auto& s : samples) run.mean_iou += iou(net.forward(s.rgb, s.thermal), s.gt);
  run.mean_iou /= static_cast<double>(samples.size());
  return run;
}

}  // namespace sacnet::tools
