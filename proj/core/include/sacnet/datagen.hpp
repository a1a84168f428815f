#ifndef SACNET_DATAGEN_HPP
#define SACNET_DATAGEN_HPP

// Synthetic RGB/thermal scenes with binary saliency masks, plus the random
// affine misalignment applied to the thermal image.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sacnet/params.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet {

/// Similarity transform about the image centre c:
///   p' = s·R(θ)·(p − c) + c + t, θ in degrees, (x, y) = (column, row).
struct AffineParams {
  double tx = 0.0, ty = 0.0;
  double theta_deg = 0.0;
  double scale = 1.0;

  bool is_identity() const { return tx == 0.0 && ty == 0.0 && theta_deg == 0.0 && scale == 1.0; }
  AffineParams inverse() const;
  void validate() const;
};

struct AffineRanges {
  double max_translation = 0.1;  // fraction of the image size
  double max_rotation_deg = 10.0;
  double scale_min = 0.9;
  double scale_max = 1.1;

  void validate() const;
};

AffineParams sample_affine(std::mt19937_64& rng, std::size_t size, const AffineRanges& ranges);

/// Inverse-mapped bilinear warp of a C×H×W image with zero fill.
Tensor warp_affine(const Tensor& image, const AffineParams& p);

enum class ShapeKind { Ellipse, Rectangle };

struct ObjectSpec {
  ShapeKind kind = ShapeKind::Ellipse;
  double cx = 0, cy = 0;  // centre (column, row)
  double rx = 1, ry = 1;  // half extents
  double angle_deg = 0;
  double color[3] = {1, 1, 1};
  double heat = 0.9;  // thermal proxy intensity

  bool contains(double x, double y) const;
};

struct SceneConfig {
  std::size_t size = 64;
  std::size_t n_objects = 1;
  double fg_min = 0.02;
  double fg_max = 0.5;
  double noise = 0.02;
  std::size_t max_attempts = 100;

  void validate() const;
};

struct Scene {
  Tensor rgb;      // 3×H×W
  Tensor thermal;  // 3×H×W
  Tensor gt;       // 1×H×W, exactly binary
  std::vector<ObjectSpec> objects;
  std::vector<std::string> warnings;
};

/// Renders the given objects over a seeded textured background. The mask is
/// the union of the objects tested at pixel centres.
Scene render_scene(std::uint64_t seed, const SceneConfig& cfg, const std::vector<ObjectSpec>& objects);

/// Random objects, resampled until the foreground fraction falls in the band.
Scene gen_scene(std::uint64_t seed, const SceneConfig& cfg);

struct SyntheticPair {
  Tensor rgb, thermal, gt;
  AffineParams params;
  std::vector<std::string> tags;
  std::uint64_t seed = 0;
};

/// gen_scene followed by a warp of the thermal image only.
SyntheticPair gen_unaligned_pair(std::uint64_t seed, const SceneConfig& cfg, const AffineRanges& ranges);

/// Directory with rgb.ppm, thermal.ppm, gt.pgm and params.txt.
void write_pair(const std::filesystem::path& dir, const SyntheticPair& pair);
SyntheticPair read_pair(const std::filesystem::path& dir);
KeyValues affine_to_key_values(const AffineParams& p);
AffineParams affine_from_key_values(const KeyValues& kv);

/// Sub-directories of `root` that hold a pair, sorted by name.
std::vector<std::filesystem::path> list_pair_dirs(const std::filesystem::path& root);

}  // namespace sacnet

#endif  // SACNET_DATAGEN_HPP
