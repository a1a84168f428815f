#include "sacnet/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sacnet/errors.hpp"

namespace sacnet {

Tensor ParamStore::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw ParameterError("duplicate parameter name: " + name);
  value.set_requires_grad(true);
  index_[name] = entries_.size();
  entries_.emplace_back(name, value);
  return value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("unknown parameter: " + name);
  return entries_[it->second].second;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

void ParamStore::copy_values_from(const std::map<std::string, Tensor>& other) {
  for (auto& [name, t] : entries_) {
    const auto it = other.find(name);
    if (it == other.end()) continue;
    if (it->second.shape() != t.shape()) {
      throw DimensionError("parameter " + name + ": stored shape " + shape_str(it->second.shape()) +
                           " vs model shape " + shape_str(t.shape()));
    }
    auto dst = t.mutable_data();
    const auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

// ---- Initializer ----------------------------------------------------------

Tensor Initializer::normal(Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (auto& v : t.mutable_data()) v = dist(rng_);
  return t;
}

Tensor Initializer::uniform(Shape shape, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.mutable_data()) v = dist(rng_);
  return t;
}

Tensor Initializer::conv_weight(std::size_t c_out, std::size_t c_in, std::size_t k, double gain) {
  const double fan_in = static_cast<double>(c_in * k * k);
  return normal({c_out, c_in, k, k}, std::sqrt(gain / fan_in));
}

Tensor Initializer::projection(std::size_t d_in, std::size_t d_out) {
  return normal({d_in, d_out}, std::sqrt(2.0 / static_cast<double>(d_in + d_out)));
}

// ---- STF ------------------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'S', 'T', 'F', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t offset) {
  if (offset + 4 > in.size()) throw ParseError("STF: truncated header", offset);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}
}  // namespace

std::vector<std::uint8_t> encode_stf(const Tensor& t) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  out.reserve(out.size() + 4 * t.numel());
  for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Tensor decode_stf(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ParseError("STF: bad magic, expected \"STF1\"", 0);
  }
  const std::uint32_t rank = get_u32(bytes, 4);
  if (rank > 16) throw ParseError("STF: implausible rank " + std::to_string(rank), 4);
  Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = get_u32(bytes, 8 + 4 * i);
  const std::size_t header = 8 + 4 * static_cast<std::size_t>(rank);
  const std::size_t n = shape_numel(shape);
  if (bytes.size() != header + 4 * n) {
    throw ParseError("STF: payload holds " + std::to_string(bytes.size() - header) +
                         " bytes, shape " + shape_str(shape) + " needs " + std::to_string(4 * n),
                     header);
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_stf(const std::filesystem::path& path, const Tensor& t) { write_bytes(path, encode_stf(t)); }

Tensor read_stf(const std::filesystem::path& path) { return decode_stf(read_bytes(path)); }

// ---- key=value ------------------------------------------------------------

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  KeyValues kv;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value in " + path.string(), line_start);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_key_values(const std::filesystem::path& path, const KeyValues& values) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [k, v] : values) out << k << '=' << v << '\n';
}

// ---- checkpoints ----------------------------------------------------------

void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params,
                     const KeyValues& config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_key_values(dir / "config.txt", config);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.txt").string());
  for (const auto& [name, t] : params.entries()) {
    const std::string file = name + ".stf";
    write_stf(dir / file, t);
    manifest << name << ' ' << file << '\n';
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  Checkpoint ck;
  ck.config = read_key_values(dir / "config.txt");
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("cannot open " + (dir / "manifest.txt").string());
  std::string line;
  std::size_t offset = 0;
  while (std::getline(manifest, line)) {
    const std::size_t start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name, file;
    if (!(fields >> name >> file)) throw ParseError("manifest: expected \"name file\"", start);
    ck.tensors[name] = read_stf(dir / file);
  }
  return ck;
}

}  // namespace sacnet
