#ifndef SACNET_PARAMS_HPP
#define SACNET_PARAMS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sacnet/tensor.hpp"

namespace sacnet {

/// Ordered, named collection of trainable leaf tensors.
class ParamStore {
 public:
  /// Registers a new parameter (requires_grad = true). Names must be unique.
  Tensor add(const std::string& name, Tensor value);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_elements() const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept { return entries_; }

  void zero_grad();
  /// Copies values from `other` for every name present in both; shapes must match.
  void copy_values_from(const std::map<std::string, Tensor>& other);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Parameter initializers share one engine so construction order fixes the values.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  /// He-normal conv kernel C_out×C_in×k×k.
  Tensor conv_weight(std::size_t c_out, std::size_t c_in, std::size_t k, double gain = 2.0);
  /// Glorot-normal d_in×d_out projection.
  Tensor projection(std::size_t d_in, std::size_t d_out);
  Tensor normal(Shape shape, double stddev);
  Tensor uniform(Shape shape, double lo, double hi);

  std::mt19937_64& engine() noexcept { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// ---- STF tensor files -----------------------------------------------------
// "STF1", u32 rank, rank × u32 dims, little-endian f32 payload, row-major.

std::vector<std::uint8_t> encode_stf(const Tensor& t);
Tensor decode_stf(const std::vector<std::uint8_t>& bytes);
void write_stf(const std::filesystem::path& path, const Tensor& t);
Tensor read_stf(const std::filesystem::path& path);

// ---- key=value text -------------------------------------------------------

using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const KeyValues& values);

// ---- checkpoints ----------------------------------------------------------
// Directory with config.txt (key=value), manifest.txt ("name file" per line)
// and one STF file per parameter.

void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params,
                     const KeyValues& config);

struct Checkpoint {
  KeyValues config;
  std::map<std::string, Tensor> tensors;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace sacnet

#endif  // SACNET_PARAMS_HPP
