#ifndef SACNET_ACM_HPP
#define SACNET_ACM_HPP

// Asymmetric correlation: global semantic guidance from the top level, then
// cross-modal attention between small query windows of one modality and
// larger, centred key/value windows of the other.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sacnet/params.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet {

/// The four per-modality encoder levels; level(1) is the highest resolution.
struct FeatureMapSet {
  std::array<Tensor, 4> levels;

  const Tensor& level(std::size_t i) const { return levels.at(i - 1); }
  Tensor& level(std::size_t i) { return levels.at(i - 1); }
};

struct WindowOrigin {
  long row = 0;
  long col = 0;
};

/// Small M×M windows tile the map without overlap; each owns one N×N window
/// centred on it (origin shifted by ⌊(N−M)/2⌋, may extend past the border).
struct WindowPairGrid {
  std::size_t height = 0, width = 0;
  std::size_t small = 0, large = 0;
  std::vector<WindowOrigin> small_windows;
  std::vector<WindowOrigin> large_windows;

  std::size_t count() const noexcept { return small_windows.size(); }
  /// Flat in-bounds positions covered by small window k (row-major within the window).
  std::vector<long> small_positions(std::size_t k) const;
  /// N×N flat positions of large window k; -1 where the window leaves the map.
  std::vector<long> large_positions(std::size_t k) const;
};

WindowPairGrid build_window_grid(std::size_t height, std::size_t width, std::size_t small,
                                 std::size_t large);

/// Q/K/V projections for one correlation direction.
struct CorrelationParams {
  Tensor wq, bq, wk, bk, wv, bv;
  std::size_t heads = 1;

  std::size_t dim() const { return wq.dim(0); }
};

CorrelationParams make_correlation_params(ParamStore& store, Initializer& init,
                                          const std::string& prefix, std::size_t dim,
                                          std::size_t heads = 1);

struct CorrelationOptions {
  /// Overrides the 1/√d_head logit scale (0 forces uniform attention).
  std::optional<double> logit_scale;
};

/// softmax(Q·Kᵀ/√d)·V + Q_src, with Q, K, V the projected inputs and the
/// residual taken on the unprojected queries.
Tensor correlation(const Tensor& q_src, const Tensor& kv_src, const CorrelationParams& params,
                   const CorrelationOptions& options = {});

struct SemanticGuidanceParams {
  CorrelationParams global;
  // Per level 2..4 (index 0..2): 3×3 conv mapping c4 → c_i.
  std::array<Tensor, 3> rgb_w, rgb_b, t_w, t_b;
};

SemanticGuidanceParams make_semantic_guidance_params(ParamStore& store, Initializer& init,
                                                     const std::array<std::size_t, 4>& channels,
                                                     std::size_t heads = 1);

struct SemanticGuidance {
  Tensor cat4;   // (2·H4·W4)×c4 tokens
  Tensor cat_global;
  Tensor rgb_global, t_global;  // c4×H4×W4
  // Enhanced maps for levels 2..4 (index 0..2).
  std::array<Tensor, 3> rgb_enhanced, t_enhanced;
};

SemanticGuidance semantic_guidance(const FeatureMapSet& rgb, const FeatureMapSet& thermal,
                                   const SemanticGuidanceParams& params);

struct AcmParams {
  CorrelationParams rgb_queries;  // RGB small windows attend to thermal large windows
  CorrelationParams t_queries;    // thermal small windows attend to RGB large windows
};

AcmParams make_acm_params(ParamStore& store, Initializer& init, const std::string& prefix,
                          std::size_t dim, std::size_t heads = 1);

struct AcmOutput {
  Tensor rgb, thermal;
};

/// Bi-directional windowed correlation at one level: queries from the original
/// features, keys/values from the enhanced features of the other modality.
AcmOutput acm_forward(const Tensor& f_rgb, const Tensor& f_t, const Tensor& enhanced_rgb,
                      const Tensor& enhanced_t, const WindowPairGrid& grid, const AcmParams& params);

}  // namespace sacnet

#endif  // SACNET_ACM_HPP
