#include "sacnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "sacnet/errors.hpp"
#include "sacnet/image_io.hpp"

namespace sacnet {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ParameterError("params: '" + key + "' is not a number: " + it->second);
  }
}

// Axis-aligned half extents of a rotated object.
std::pair<double, double> extents(const ObjectSpec& o) {
  const double c = std::abs(std::cos(radians(o.angle_deg))), s = std::abs(std::sin(radians(o.angle_deg)));
  if (o.kind == ShapeKind::Rectangle) return {o.rx * c + o.ry * s, o.rx * s + o.ry * c};
  return {std::sqrt(o.rx * o.rx * c * c + o.ry * o.ry * s * s),
          std::sqrt(o.rx * o.rx * s * s + o.ry * o.ry * c * c)};
}

}  // namespace

// ---- affine ---------------------------------------------------------------

AffineParams AffineParams::inverse() const {
  validate();
  const double th = radians(theta_deg);
  const double c = std::cos(th), s = std::sin(th);
  // −R(−θ)·t / s
  AffineParams inv;
  inv.tx = -(c * tx + s * ty) / scale;
  inv.ty = -(-s * tx + c * ty) / scale;
  inv.theta_deg = -theta_deg;
  inv.scale = 1.0 / scale;
  return inv;
}

void AffineParams::validate() const {
  if (!(scale > 0) || !std::isfinite(scale)) throw ParameterError("affine scale must be positive");
  if (!std::isfinite(tx) || !std::isfinite(ty) || !std::isfinite(theta_deg))
    throw ParameterError("affine parameters must be finite");
}

void AffineRanges::validate() const {
  if (max_translation < 0 || max_rotation_deg < 0) throw ParameterError("affine ranges must be non-negative");
  if (!(scale_min > 0) || scale_min > scale_max) throw ParameterError("affine scale range must satisfy 0 < min <= max");
}

AffineParams sample_affine(std::mt19937_64& rng, std::size_t size, const AffineRanges& r) {
  r.validate();
  auto uniform = [&](double lo, double hi) {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const double t = r.max_translation * static_cast<double>(size);
  AffineParams p;
  p.tx = uniform(-t, t);
  p.ty = uniform(-t, t);
  p.theta_deg = uniform(-r.max_rotation_deg, r.max_rotation_deg);
  p.scale = uniform(r.scale_min, r.scale_max);
  return p;
}

Tensor warp_affine(const Tensor& image, const AffineParams& p) {
  p.validate();
  if (image.rank() != 3) throw DimensionError("warp_affine: expected C×H×W, got " + shape_str(image.shape()));
  if (p.is_identity()) return image.detach();
  const std::size_t ch = image.dim(0), h = image.dim(1), w = image.dim(2), hw = h * w;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0, cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double th = radians(p.theta_deg);
  const double c = std::cos(th), s = std::sin(th);
  std::vector<double> out(ch * hw, 0.0);
  const auto src = image.data();
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t col = 0; col < w; ++col) {
      // p = R(−θ)(p' − c − t)/s + c
      const double dx = static_cast<double>(col) - cx - p.tx;
      const double dy = static_cast<double>(r) - cy - p.ty;
      const double sx = (c * dx + s * dy) / p.scale + cx;
      const double sy = (-s * dx + c * dy) / p.scale + cy;
      for (std::size_t k = 0; k < ch; ++k)
        out[k * hw + r * w + col] = bilinear_value(src.subspan(k * hw, hw), h, w, sx, sy);
    }
  return Tensor(image.shape(), std::move(out));
}

// ---- scenes ---------------------------------------------------------------

bool ObjectSpec::contains(double x, double y) const {
  const double th = radians(angle_deg);
  const double c = std::cos(th), s = std::sin(th);
  const double dx = x - cx, dy = y - cy;
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  if (kind == ShapeKind::Rectangle) return std::abs(u) <= rx && std::abs(v) <= ry;
  return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
}

void SceneConfig::validate() const {
  if (size == 0 || size % 32 != 0) throw ParameterError("scene size must be a positive multiple of 32");
  if (n_objects < 1) throw ParameterError("a scene needs at least one object");
  if (!(fg_min >= 0 && fg_min < fg_max && fg_max <= 1)) throw ParameterError("foreground band must satisfy 0 <= min < max <= 1");
  if (noise < 0) throw ParameterError("noise must be non-negative");
}

Scene render_scene(std::uint64_t seed, const SceneConfig& cfg, const std::vector<ObjectSpec>& objects) {
  if (cfg.size == 0) throw ParameterError("scene size must be positive");
  const std::size_t n = cfg.size, hw = n * n;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Scene sc;
  sc.objects = objects;
  std::vector<double> rgb(3 * hw), gray(hw), thermal(hw), gt(hw, 0.0);

  // Background: base colour plus a few low-frequency waves per channel.
  for (std::size_t k = 0; k < 3; ++k) {
    const double base = 0.25 + 0.3 * u01(rng);
    double fx[3], fy[3], ph[3];
    for (int i = 0; i < 3; ++i) {
      fx[i] = (1.0 + 2.0 * u01(rng)) * 2.0 * std::numbers::pi / static_cast<double>(n);
      fy[i] = (1.0 + 2.0 * u01(rng)) * 2.0 * std::numbers::pi / static_cast<double>(n);
      ph[i] = 2.0 * std::numbers::pi * u01(rng);
    }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        double v = base;
        for (int i = 0; i < 3; ++i)
          v += 0.05 * std::sin(fx[i] * static_cast<double>(c) + fy[i] * static_cast<double>(r) + ph[i]);
        rgb[k * hw + r * n + c] = v;
      }
  }
  for (std::size_t p = 0; p < hw; ++p) {
    gray[p] = (rgb[p] + rgb[hw + p] + rgb[2 * hw + p]) / 3.0;
    thermal[p] = 0.1 + 0.3 * gray[p];
  }

  const double sub[4] = {-0.375, -0.125, 0.125, 0.375};
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const ObjectSpec& o = objects[i];
    const auto [ex, ey] = extents(o);
    const double lim = static_cast<double>(n) - 0.5;
    if (o.cx - ex < -0.5 || o.cx + ex > lim || o.cy - ey < -0.5 || o.cy + ey > lim) {
      sc.warnings.push_back("object " + std::to_string(i) + " extends past the canvas and was clipped");
    }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        const double x = static_cast<double>(c), y = static_cast<double>(r);
        if (std::abs(x - o.cx) > ex + 1 || std::abs(y - o.cy) > ey + 1) continue;
        int hits = 0;
        for (double sy : sub)
          for (double sx : sub) hits += o.contains(x + sx, y + sy) ? 1 : 0;
        const std::size_t p = r * n + c;
        if (o.contains(x, y)) gt[p] = 1.0;
        if (hits == 0) continue;
        const double cov = hits / 16.0;
        for (std::size_t k = 0; k < 3; ++k) rgb[k * hw + p] = (1 - cov) * rgb[k * hw + p] + cov * o.color[k];
        thermal[p] = (1 - cov) * thermal[p] + cov * o.heat;
      }
  }

  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t p = 0; p < hw; ++p) rgb[k * hw + p] = quantize(rgb[k * hw + p] + cfg.noise * noise(rng));
  std::vector<double> th3(3 * hw);
  for (std::size_t p = 0; p < hw; ++p) {
    const double v = quantize(thermal[p] + cfg.noise * noise(rng));
    th3[p] = th3[hw + p] = th3[2 * hw + p] = v;
  }
  sc.rgb = Tensor({3, n, n}, std::move(rgb));
  sc.thermal = Tensor({3, n, n}, std::move(th3));
  sc.gt = Tensor({1, n, n}, std::move(gt));
  return sc;
}

Scene gen_scene(std::uint64_t seed, const SceneConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double n = static_cast<double>(cfg.size);
  for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    std::vector<ObjectSpec> objects;
    for (std::size_t i = 0; i < cfg.n_objects; ++i) {
      ObjectSpec o;
      o.kind = u01(rng) < 0.5 ? ShapeKind::Ellipse : ShapeKind::Rectangle;
      o.rx = (0.08 + 0.17 * u01(rng)) * n;
      o.ry = (0.08 + 0.17 * u01(rng)) * n;
      o.cx = (0.2 + 0.6 * u01(rng)) * n;
      o.cy = (0.2 + 0.6 * u01(rng)) * n;
      o.angle_deg = 180.0 * u01(rng);
      // Saturated colours keep objects distinct from the mid-grey background.
      for (double& c : o.color) c = u01(rng) < 0.5 ? 0.05 * u01(rng) : 0.8 + 0.2 * u01(rng);
      if (o.color[0] < 0.5 && o.color[1] < 0.5 && o.color[2] < 0.5) o.color[std::size_t(u01(rng) * 3) % 3] = 0.95;
      o.heat = 0.65 + 0.3 * u01(rng);
      objects.push_back(o);
    }
    Scene sc = render_scene(rng(), cfg, objects);
    double fg = 0.0;
    for (double v : sc.gt.data()) fg += v;
    fg /= n * n;
    if (fg >= cfg.fg_min && fg <= cfg.fg_max) return sc;
  }
  throw ParameterError("gen_scene: no scene within the foreground band after " +
                       std::to_string(cfg.max_attempts) + " attempts");
}

SyntheticPair gen_unaligned_pair(std::uint64_t seed, const SceneConfig& cfg, const AffineRanges& ranges) {
  Scene sc = gen_scene(seed, cfg);
  std::mt19937_64 rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
  SyntheticPair pair;
  pair.seed = seed;
  pair.params = sample_affine(rng, cfg.size, ranges);
  pair.rgb = sc.rgb;
  pair.gt = sc.gt;
  pair.thermal = pair.params.is_identity() ? sc.thermal : warp_affine(sc.thermal, pair.params);
  const auto td = pair.thermal.data();
  std::vector<double> q(td.begin(), td.end());
  for (double& v : q) v = quantize(v);
  pair.thermal = Tensor(pair.thermal.shape(), std::move(q));

  double fg = 0.0;
  for (double v : sc.gt.data()) fg += v;
  fg /= static_cast<double>(cfg.size * cfg.size);
  const double size = static_cast<double>(cfg.size);
  const AffineParams& p = pair.params;
  if (p.is_identity()) pair.tags.emplace_back("aligned");
  if (std::hypot(p.tx, p.ty) > 0.05 * size) pair.tags.emplace_back("large_shift");
  if (std::abs(p.theta_deg) > 5.0) pair.tags.emplace_back("rotated");
  if (std::abs(p.scale - 1.0) > 0.05) pair.tags.emplace_back("scaled");
  if (cfg.n_objects > 1) pair.tags.emplace_back("multiple_objects");
  if (fg < 0.05) pair.tags.emplace_back("small_object");
  if (fg > 0.3) pair.tags.emplace_back("big_object");
  if (!sc.warnings.empty()) pair.tags.emplace_back("clipped");
  return pair;
}

// ---- pair directories -----------------------------------------------------

KeyValues affine_to_key_values(const AffineParams& p) {
  return {{"tx", format_double(p.tx)},
          {"ty", format_double(p.ty)},
          {"theta_deg", format_double(p.theta_deg)},
          {"scale", format_double(p.scale)}};
}

AffineParams affine_from_key_values(const KeyValues& kv) {
  AffineParams p;
  p.tx = parse_double(kv, "tx", 0.0);
  p.ty = parse_double(kv, "ty", 0.0);
  p.theta_deg = parse_double(kv, "theta_deg", 0.0);
  p.scale = parse_double(kv, "scale", 1.0);
  p.validate();
  return p;
}

void write_pair(const std::filesystem::path& dir, const SyntheticPair& pair) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_image(dir / "rgb.ppm", pair.rgb);
  write_image(dir / "thermal.ppm", pair.thermal);
  write_image(dir / "gt.pgm", pair.gt);
  KeyValues kv = affine_to_key_values(pair.params);
  kv["seed"] = std::to_string(pair.seed);
  std::string tags;
  for (const auto& t : pair.tags) tags += (tags.empty() ? "" : ",") + t;
  kv["tags"] = tags;
  write_key_values(dir / "params.txt", kv);
}

SyntheticPair read_pair(const std::filesystem::path& dir) {
  SyntheticPair pair;
  pair.rgb = read_image(dir / "rgb.ppm");
  pair.thermal = read_image(dir / "thermal.ppm");
  const Tensor g = read_image(dir / "gt.pgm");
  if (pair.rgb.dim(0) != 3 || pair.thermal.dim(0) != 3 || g.dim(0) != 1)
    throw DimensionError("pair " + dir.string() + ": expected 3-channel rgb/thermal and 1-channel gt");
  if (pair.rgb.shape() != pair.thermal.shape() || pair.rgb.dim(1) != g.dim(1) || pair.rgb.dim(2) != g.dim(2))
    throw DimensionError("pair " + dir.string() + ": image sizes differ");
  std::vector<double> bin(g.data().begin(), g.data().end());
  for (double& v : bin) v = v > 0.5 ? 1.0 : 0.0;
  pair.gt = Tensor(g.shape(), std::move(bin));
  if (std::filesystem::exists(dir / "params.txt")) {
    const KeyValues kv = read_key_values(dir / "params.txt");
    pair.params = affine_from_key_values(kv);
    if (auto it = kv.find("seed"); it != kv.end()) pair.seed = std::stoull(it->second);
    if (auto it = kv.find("tags"); it != kv.end()) {
      std::stringstream ss(it->second);
      std::string t;
      while (std::getline(ss, t, ','))
        if (!t.empty()) pair.tags.push_back(t);
    }
  }
  return pair;
}

std::vector<std::filesystem::path> list_pair_dirs(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "rgb.ppm")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sacnet
