#ifndef SACNET_NETWORK_HPP
#define SACNET_NETWORK_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sacnet/acm.hpp"
#include "sacnet/afsm.hpp"
#include "sacnet/params.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet {

/// Components that can be switched off to reproduce the ablation variants.
struct Ablation {
  bool drop_acm = false;   // ACM replaced by identity (no SGM, no windowed correlation)
  bool drop_awp = false;   // correlation over the whole map instead of window pairs
  bool drop_sgm = false;   // correlation keys/values come from unguided features
  bool drop_afsm = false;  // plain concat + conv fusion

  bool any() const { return drop_acm || drop_awp || drop_sgm || drop_afsm; }
  std::string name() const;
  /// Parses "acm" | "awp" | "sgm" | "afsm" | "none".
  static Ablation parse(const std::string& component);
};

struct SACNetConfig {
  std::size_t input_size = 384;
  std::size_t window_small = 4;
  std::size_t window_large = 6;
  std::array<std::size_t, 4> channels{16, 32, 64, 128};
  std::size_t decoder_channels = 32;
  std::size_t cascade_depth = 4;
  std::size_t heads = 1;
  std::uint64_t seed = 0;
  Ablation ablation;

  /// Throws ParameterError on an inconsistent configuration.
  void validate() const;
  KeyValues to_key_values() const;
  /// Overrides fields present in `kv`; unknown keys are ignored.
  static SACNetConfig from_key_values(const KeyValues& kv, SACNetConfig base);
  static SACNetConfig from_key_values(const KeyValues& kv);
};

/// Everything the forward pass produces, kept for tests and inspection.
struct ForwardTrace {
  FeatureMapSet rgb, thermal;
  std::optional<SemanticGuidance> guidance;
  std::array<Tensor, 3> correlated_rgb, correlated_t;  // levels 2..4
  std::array<Tensor, 3> fused;                          // f_s, levels 2..4
  std::array<Tensor, 3> decoded;                        // f̂_s, levels 2..4
  Tensor logits;
  Tensor saliency;  // 1×H×W in [0, 1]
};

class SACNet {
 public:
  explicit SACNet(SACNetConfig config);

  const SACNetConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  /// Two unshared 4-stage strided-conv encoders.
  std::pair<FeatureMapSet, FeatureMapSet> encode(const Tensor& rgb, const Tensor& thermal) const;

  /// Window grid used at `level` (2..4), with window sizes clamped to the map.
  WindowPairGrid grid_for_level(std::size_t level) const;

  ForwardTrace forward_trace(const Tensor& rgb, const Tensor& thermal) const;
  Tensor forward(const Tensor& rgb, const Tensor& thermal) const;

  void save(const std::string& dir) const;
  /// Restores a checkpoint written by save(); the stored config wins.
  static SACNet load(const std::string& dir);

 private:
  struct Encoder {
    std::array<Tensor, 4> w, b;
  };
  struct Conv {
    Tensor w, b;
  };

  FeatureMapSet encode_one(const Encoder& enc, const Tensor& image) const;

  SACNetConfig config_;
  ParamStore params_;
  Encoder enc_rgb_, enc_t_;
  std::optional<SemanticGuidanceParams> sgm_;
  std::array<std::optional<AcmParams>, 3> acm_;
  std::array<std::optional<AfsmParams>, 3> afsm_;
  std::array<Conv, 3> plain_fuse_;  // used when AFSM is dropped
  std::array<Conv, 3> decoder_;     // levels 2..4
  Conv proj_rgb1_, proj_t1_, head_mid_, head_out_;
};

}  // namespace sacnet

#endif  // SACNET_NETWORK_HPP
