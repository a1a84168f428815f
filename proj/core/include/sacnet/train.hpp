#ifndef SACNET_TRAIN_HPP
#define SACNET_TRAIN_HPP

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "sacnet/losses.hpp"
#include "sacnet/network.hpp"

namespace sacnet {

struct TrainSample {
  Tensor rgb;      // 3×H×W
  Tensor thermal;  // 3×H×W
  Tensor gt;       // 1×H×W, binary
};

struct StepLog {
  std::size_t step = 0;  // 1-based
  double bce = 0, smooth = 0, dice = 0, total = 0;
};

struct TrainOptions {
  std::size_t steps = 300;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  LossConfig loss;
  /// When set, one CSV row per step is appended as training runs.
  std::optional<std::filesystem::path> log_csv;
  std::function<void(const StepLog&)> on_step;
};

struct TrainResult {
  std::vector<StepLog> log;
  /// Loss of the parameters after the last update (equals the initial loss for 0 steps).
  StepLog final_eval;
};

/// Mean composite loss over `samples` under the current parameters, no update.
StepLog evaluate_loss(const SACNet& net, const std::vector<TrainSample>& samples,
                      const LossConfig& cfg = {});

/// Full-batch AdamW: every step averages the loss over all samples. A
/// non-finite loss throws NumericError naming the step.
TrainResult train(SACNet& net, const std::vector<TrainSample>& samples, const TrainOptions& options);

}  // namespace sacnet

#endif  // SACNET_TRAIN_HPP
