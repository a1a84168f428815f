#ifndef SACNET_METRICS_HPP
#define SACNET_METRICS_HPP

// Salient-object evaluation measures. Maps are single-channel (H×W or 1×H×W)
// with values in [0, 1]; ground truth is binary.

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "sacnet/tensor.hpp"

namespace sacnet {

inline constexpr std::size_t kThresholds = 256;

double mae(const Tensor& s, const Tensor& g);

/// Structure measure α·S_object + (1−α)·S_region, clamped at 0.
double s_measure(const Tensor& s, const Tensor& g, double alpha = 0.5);

struct EMeasureResult {
  double mean = 0.0;
  double max = 0.0;
  std::array<double, kThresholds> curve{};  // threshold k/255, S ≥ t binarized
};
EMeasureResult e_measure(const Tensor& s, const Tensor& g);

struct WeightedFResult {
  double value = 0.0;
  bool degenerate = false;  // ground truth had no foreground; value forced to 0
};
WeightedFResult weighted_f(const Tensor& s, const Tensor& g);

struct PrPoint {
  double precision = 0.0;
  double recall = 0.0;
};
using PrCurve = std::array<PrPoint, kThresholds>;
PrCurve pr_curve(const Tensor& s, const Tensor& g);

/// Intersection over union of (S ≥ threshold) and G; 1 when both are empty.
double iou(const Tensor& s, const Tensor& g, double threshold = 0.5);

struct MetricReport {
  double mae = 0.0;
  double s_measure = 0.0;
  double e_measure_mean = 0.0;
  double e_measure_max = 0.0;  // max over thresholds of the image-averaged curve
  double weighted_f = 0.0;
  std::size_t images = 0;
  std::size_t degenerate_gt = 0;
  PrCurve pr_curve{};
};

/// Averages every measure over (prediction, ground truth) pairs.
/// Throws ParameterError on an empty list.
MetricReport evaluate_dataset(const std::vector<std::pair<Tensor, Tensor>>& pairs);

// Building blocks exposed for testing.

/// Normalized k×k Gaussian (entries below eps·max zeroed before normalizing).
std::vector<double> gaussian_kernel(std::size_t k, double sigma);

/// Squared Euclidean distance from every pixel to the nearest foreground
/// pixel and that pixel's flat index. Ties go to the lowest row-major index.
/// Indices are -1 (distances +inf) when there is no foreground.
struct NearestForeground {
  std::vector<double> dist2;
  std::vector<long> index;
};
NearestForeground nearest_foreground(const std::vector<bool>& fg, std::size_t h, std::size_t w);

}  // namespace sacnet

#endif  // SACNET_METRICS_HPP
