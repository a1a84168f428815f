#ifndef SACNET_IMAGE_IO_HPP
#define SACNET_IMAGE_IO_HPP

// Binary PGM (P5) and PPM (P6) with 8-bit samples. Pixel values map to
// [0, 1] as v/maxval on load and round(255·clamp(x, 0, 1)) on save.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sacnet/tensor.hpp"

namespace sacnet {

struct RawImage {
  std::size_t channels = 0;  // 1 (P5) or 3 (P6)
  std::size_t height = 0, width = 0;
  unsigned maxval = 255;
  std::vector<std::uint8_t> pixels;  // interleaved, row-major
};

RawImage decode_pnm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pnm(const RawImage& image);

/// C×H×W tensor in [0, 1] (C = 1 for PGM, 3 for PPM).
Tensor read_image(const std::filesystem::path& path);
/// Writes a 1×H×W / H×W tensor as PGM or a 3×H×W tensor as PPM.
void write_image(const std::filesystem::path& path, const Tensor& image);

Tensor raw_to_tensor(const RawImage& image);
RawImage tensor_to_raw(const Tensor& image);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace sacnet

#endif  // SACNET_IMAGE_IO_HPP
