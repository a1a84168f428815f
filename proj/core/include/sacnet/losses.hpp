#ifndef SACNET_LOSSES_HPP
#define SACNET_LOSSES_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sacnet/params.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet {

struct LossConfig {
  double bce_weight = 1.0;
  double smooth_weight = 1.0;
  double dice_weight = 1.0;
  double smooth_lambda = 10.0;  // edge sensitivity of the ground-truth gate
  double dice_eps = 1e-6;

  void validate() const;
};

inline constexpr double kBceClamp = 1e-7;
inline constexpr double kCharbonnierEps = 1e-6;

/// mean of −[G log S + (1−G) log(1−S)], S clamped to [1e−7, 1−1e−7].
Tensor bce_loss(const Tensor& s, const Tensor& g);

/// ½·(mean Ψ(∂ₓS)·e^{−λ|∂ₓG|} + mean Ψ(∂ᵧS)·e^{−λ|∂ᵧG|}) with forward
/// differences over the last two axes and Ψ(x) = √(x² + 1e−6).
Tensor smoothness_loss(const Tensor& s, const Tensor& g, double lambda = 10.0);

/// 1 − (2ΣSG + eps) / (ΣS + ΣG + eps)
Tensor dice_loss(const Tensor& s, const Tensor& g, double eps = 1e-6);

struct LossBreakdown {
  Tensor bce, smooth, dice, total;
};

LossBreakdown total_loss(const Tensor& s, const Tensor& g, const LossConfig& cfg = {});

/// Runs the tape backward from the composite loss and checks that every
/// parameter received a finite gradient. Throws NumericError otherwise.
LossBreakdown sacnet_backward(Tape& tape, const Tensor& s, const Tensor& g, ParamStore& params,
                              const LossConfig& cfg = {});

struct OptimizerState {
  double lr = 1e-5;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m, v;  // one buffer per parameter, lazily sized
};

/// Decoupled weight decay followed by a bias-corrected Adam update. Missing
/// gradients count as zero. Throws ParameterError when lr ≤ 0.
void adamw_step(const std::vector<Tensor>& params, OptimizerState& state);
void adamw_step(ParamStore& params, OptimizerState& state);

}  // namespace sacnet

#endif  // SACNET_LOSSES_HPP
