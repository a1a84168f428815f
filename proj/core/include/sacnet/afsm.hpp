#ifndef SACNET_AFSM_HPP
#define SACNET_AFSM_HPP

// Associated feature sampling: a cascade of deformable 3×3 convolutions that
// resamples thermal features toward the RGB layout, then a fusing conv.

#include <cstddef>
#include <string>
#include <vector>

#include "sacnet/params.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet {

inline constexpr std::size_t kDeformTaps = 9;

/// Per-position tap displacements: 18×H×W, channel 2n is the column (x)
/// offset and 2n+1 the row (y) offset of tap n of the row-major 3×3 grid.
struct OffsetField {
  Tensor value;

  std::size_t height() const { return value.dim(1); }
  std::size_t width() const { return value.dim(2); }
};

struct DeformableLayer {
  Tensor offset_w, offset_b;  // 18 × 2C × 3 × 3, zero-initialized
  Tensor weight, bias;        // C_out × C × 3 × 3
};

DeformableLayer make_deformable_layer(ParamStore& store, Initializer& init,
                                      const std::string& prefix, std::size_t channels,
                                      std::size_t out_channels);

/// Offsets from the channel-concatenated [thermal, rgb] features.
OffsetField predict_offsets(const Tensor& f_t, const Tensor& f_rgb, const DeformableLayer& layer);

/// out(p0) = Σ_n w_n · x(p0 + p_n + Δp_n) + b, bilinear reads, zero outside.
/// Differentiable wrt the input, the offsets, the kernel and the bias.
Tensor deformable_conv2d(const Tensor& x, const Tensor& offsets, const Tensor& weight,
                         const Tensor& bias);

Tensor deformable_conv(const Tensor& f_t, const OffsetField& offsets, const DeformableLayer& layer);

struct AfsmParams {
  std::vector<DeformableLayer> layers;
  Tensor fuse_w, fuse_b;  // C_out × 2C × 3 × 3
};

AfsmParams make_afsm_params(ParamStore& store, Initializer& init, const std::string& prefix,
                            std::size_t channels, std::size_t out_channels, std::size_t depth);

struct AfsmOutput {
  Tensor fused;    // f_s
  Tensor sampled;  // thermal features after the last cascade layer
  std::vector<OffsetField> offsets;
};

AfsmOutput afsm_forward(const Tensor& f_t, const Tensor& f_rgb, const AfsmParams& params);

}  // namespace sacnet

#endif  // SACNET_AFSM_HPP
