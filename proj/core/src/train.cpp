#include "sacnet/train.hpp"

#include <cmath>
#include <fstream>

#include "sacnet/errors.hpp"

namespace sacnet {

namespace {
void accumulate(StepLog& log, const LossBreakdown& l, double w) {
  log.bce += w * l.bce.item();
  log.smooth += w * l.smooth.item();
  log.dice += w * l.dice.item();
  log.total += w * l.total.item();
}

void check_samples(const std::vector<TrainSample>& samples) {
  if (samples.empty()) throw ParameterError("training needs at least one sample");
}
}  // namespace

StepLog evaluate_loss(const SACNet& net, const std::vector<TrainSample>& samples,
                      const LossConfig& cfg) {
  check_samples(samples);
  StepLog log;
  const double w = 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) accumulate(log, total_loss(net.forward(s.rgb, s.thermal), s.gt, cfg), w);
  return log;
}

TrainResult train(SACNet& net, const std::vector<TrainSample>& samples, const TrainOptions& options) {
  check_samples(samples);
  OptimizerState opt;
  opt.lr = options.lr;
  opt.weight_decay = options.weight_decay;
  if (!(opt.lr > 0)) throw ParameterError("learning rate must be positive");

  std::ofstream csv;
  if (options.log_csv) {
    csv.open(*options.log_csv);
    if (!csv) throw IoError("cannot write " + options.log_csv->string());
    csv << "step,bce,smooth,dice,total\n";
    csv.precision(10);
  }

  TrainResult result;
  const double w = 1.0 / static_cast<double>(samples.size());
  for (std::size_t step = 1; step <= options.steps; ++step) {
    net.params().zero_grad();
    StepLog log;
    log.step = step;
    for (const auto& s : samples) {
      Tape tape;
      const Tensor pred = net.forward(s.rgb, s.thermal);
      LossBreakdown l = total_loss(pred, s.gt, options.loss);
      accumulate(log, l, w);
      if (!std::isfinite(l.total.item())) {
        throw NumericError("loss became non-finite at step " + std::to_string(step));
      }
      tape.backward(scale(l.total, w));
    }
    for (const auto& [name, p] : net.params().entries()) {
      if (!p.has_grad()) continue;
      for (double g : p.grad())
        if (!std::isfinite(g))
          throw NumericError("gradient of " + name + " became non-finite at step " + std::to_string(step));
    }
    adamw_step(net.params(), opt);
    result.log.push_back(log);
    if (csv) csv << log.step << ',' << log.bce << ',' << log.smooth << ',' << log.dice << ',' << log.total << '\n';
    if (options.on_step) options.on_step(log);
  }
  net.params().zero_grad();
  result.final_eval = evaluate_loss(net, samples, options.loss);
  result.final_eval.step = options.steps;
  return result;
}

}  // namespace sacnet
