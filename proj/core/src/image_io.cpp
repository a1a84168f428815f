#include "sacnet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "sacnet/errors.hpp"

namespace sacnet {

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::vector<std::uint8_t>& bytes, std::size_t start) : b_(bytes), pos_(start) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    last_start_ = start;
    unsigned long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + static_cast<unsigned long>(b_[pos_] - '0');
      if (v > (1UL << 24)) throw ParseError(std::string("image header: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("image header: expected ") + what, start);
    return v;
  }

  /// Offset of the first digit of the most recent number.
  std::size_t last_start() const noexcept { return last_start_; }

  void single_whitespace() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_]))
      throw ParseError("image header: expected whitespace before raster", pos_);
    ++pos_;
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_;
  std::size_t last_start_ = 0;
};

}  // namespace

RawImage decode_pnm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("not a binary PGM/PPM file (expected P5 or P6)", 0);
  }
  RawImage img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader r(bytes, 2);
  img.width = r.number("width");
  if (img.width == 0) throw ParseError("image header: zero width", r.last_start());
  img.height = r.number("height");
  if (img.height == 0) throw ParseError("image header: zero height", r.last_start());
  const unsigned long maxval = r.number("maxval");
  if (maxval == 0 || maxval > 255) {
    throw ParseError("image header: maxval must be in 1..255, got " + std::to_string(maxval), r.last_start());
  }
  img.maxval = static_cast<unsigned>(maxval);
  r.single_whitespace();
  const std::size_t need = img.channels * img.height * img.width;
  if (bytes.size() - r.pos() < need) {
    throw ParseError("image raster truncated: need " + std::to_string(need) + " bytes, have " +
                         std::to_string(bytes.size() - r.pos()),
                     bytes.size());
  }
  img.pixels.assign(bytes.begin() + static_cast<long>(r.pos()),
                    bytes.begin() + static_cast<long>(r.pos() + need));
  return img;
}

std::vector<std::uint8_t> encode_pnm(const RawImage& img) {
  if (img.channels != 1 && img.channels != 3) throw ParameterError("encode_pnm: 1 or 3 channels");
  if (img.pixels.size() != img.channels * img.height * img.width)
    throw DimensionError("encode_pnm: pixel buffer does not match the dimensions");
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                             std::to_string(img.maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

Tensor raw_to_tensor(const RawImage& img) {
  const std::size_t hw = img.height * img.width;
  std::vector<double> data(img.channels * hw);
  const double maxval = static_cast<double>(img.maxval);
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < img.channels; ++c)
      data[c * hw + p] = std::min(1.0, img.pixels[p * img.channels + c] / maxval);
  return Tensor({img.channels, img.height, img.width}, std::move(data));
}

RawImage tensor_to_raw(const Tensor& t) {
  RawImage img;
  if (t.rank() == 2) {
    img.channels = 1;
    img.height = t.dim(0);
    img.width = t.dim(1);
  } else if (t.rank() == 3 && (t.dim(0) == 1 || t.dim(0) == 3)) {
    img.channels = t.dim(0);
    img.height = t.dim(1);
    img.width = t.dim(2);
  } else {
    throw DimensionError("write_image: expected H×W, 1×H×W or 3×H×W, got " + shape_str(t.shape()));
  }
  const std::size_t hw = img.height * img.width;
  img.pixels.resize(img.channels * hw);
  const auto d = t.data();
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < img.channels; ++c) {
      double v = d[c * hw + p];
      v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
      img.pixels[p * img.channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  return img;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Tensor read_image(const std::filesystem::path& path) {
  return raw_to_tensor(decode_pnm(read_file_bytes(path)));
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  write_file_bytes(path, encode_pnm(tensor_to_raw(image)));
}

}  // namespace sacnet
