#include "sacnet/metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

#include "sacnet/errors.hpp"

namespace sacnet {

namespace {

constexpr double kEps = DBL_EPSILON;

struct Plane {
  std::size_t h = 0, w = 0;
  std::span<const double> v;

  double at(std::size_t r, std::size_t c) const { return v[r * w + c]; }
};

Plane plane_of(const Tensor& t, const char* who) {
  if (t.rank() < 2) throw DimensionError(std::string(who) + ": expected a 2-D map, got " + shape_str(t.shape()));
  Plane p{t.dim(t.rank() - 2), t.dim(t.rank() - 1), t.data()};
  if (p.h * p.w != t.numel()) {
    throw DimensionError(std::string(who) + ": expected a single-channel map, got " + shape_str(t.shape()));
  }
  return p;
}

std::pair<Plane, Plane> planes(const Tensor& s, const Tensor& g, const char* who) {
  Plane ps = plane_of(s, who), pg = plane_of(g, who);
  if (ps.h != pg.h || ps.w != pg.w) {
    throw DimensionError(std::string(who) + ": prediction " + shape_str(s.shape()) + " vs ground truth " +
                         shape_str(g.shape()));
  }
  return {ps, pg};
}

bool is_fg(double g) { return g > 0.5; }

double threshold(std::size_t k) { return static_cast<double>(k) / 255.0; }

// ---- structure measure ----

double object_similarity(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  if (values.size() > 1) {
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size() - 1);
  }
  const double sigma = std::sqrt(var);
  return 2.0 * mean / (mean * mean + 1.0 + sigma + kEps);
}

double object_score(const Plane& s, const Plane& g) {
  std::vector<double> fg, bg;
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    if (is_fg(g.v[i])) {
      fg.push_back(s.v[i]);
      ++count;
    } else {
      bg.push_back(1.0 - s.v[i]);
    }
  }
  const double u = static_cast<double>(count) / static_cast<double>(s.v.size());
  return u * object_similarity(fg) + (1.0 - u) * object_similarity(bg);
}

double block_ssim(const Plane& s, const Plane& g, std::size_t r0, std::size_t r1, std::size_t c0,
                  std::size_t c1) {
  const std::size_t n = (r1 - r0) * (c1 - c0);
  if (n == 0) return 0.0;
  double x = 0.0, y = 0.0;
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) {
      x += s.at(r, c);
      y += g.at(r, c);
    }
  x /= static_cast<double>(n);
  y /= static_cast<double>(n);
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  if (n > 1) {
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t c = c0; c < c1; ++c) {
        const double dx = s.at(r, c) - x, dy = g.at(r, c) - y;
        sx += dx * dx;
        sy += dy * dy;
        sxy += dx * dy;
      }
    const double d = static_cast<double>(n - 1);
    sx /= d;
    sy /= d;
    sxy /= d;
  }
  const double a = 4.0 * x * y * sxy;
  const double b = (x * x + y * y) * (sx + sy);
  if (a != 0.0) return a / (b + kEps);
  if (b == 0.0) return 1.0;
  return 0.0;
}

double region_score(const Plane& s, const Plane& g) {
  // Split point: rounded foreground centroid, shifted by one (1-based convention).
  double sr = 0.0, sc = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < g.h; ++r)
    for (std::size_t c = 0; c < g.w; ++c)
      if (is_fg(g.at(r, c))) {
        sr += static_cast<double>(r);
        sc += static_cast<double>(c);
        ++count;
      }
  std::size_t x, y;
  if (count == 0) {
    x = static_cast<std::size_t>(std::round(static_cast<double>(g.w) / 2.0));
    y = static_cast<std::size_t>(std::round(static_cast<double>(g.h) / 2.0));
  } else {
    x = static_cast<std::size_t>(std::round(sc / static_cast<double>(count))) + 1;
    y = static_cast<std::size_t>(std::round(sr / static_cast<double>(count))) + 1;
  }
  x = std::min(x, g.w);
  y = std::min(y, g.h);
  const double area = static_cast<double>(g.h * g.w);
  const double w1 = static_cast<double>(x * y) / area;
  const double w2 = static_cast<double>(y * (g.w - x)) / area;
  const double w3 = static_cast<double>((g.h - y) * x) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  return w1 * block_ssim(s, g, 0, y, 0, x) + w2 * block_ssim(s, g, 0, y, x, g.w) +
         w3 * block_ssim(s, g, y, g.h, 0, x) + w4 * block_ssim(s, g, y, g.h, x, g.w);
}

}  // namespace

double mae(const Tensor& s, const Tensor& g) {
  auto [ps, pg] = planes(s, g, "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < ps.v.size(); ++i) acc += std::abs(ps.v[i] - pg.v[i]);
  return acc / static_cast<double>(ps.v.size());
}

double s_measure(const Tensor& s, const Tensor& g, double alpha) {
  auto [ps, pg] = planes(s, g, "s_measure");
  double gm = 0.0, sm = 0.0;
  for (std::size_t i = 0; i < ps.v.size(); ++i) {
    gm += is_fg(pg.v[i]) ? 1.0 : 0.0;
    sm += ps.v[i];
  }
  const double n = static_cast<double>(ps.v.size());
  gm /= n;
  sm /= n;
  if (gm == 0.0) return 1.0 - sm;
  if (gm == 1.0) return sm;
  const double q = alpha * object_score(ps, pg) + (1.0 - alpha) * region_score(ps, pg);
  return std::max(0.0, q);
}

EMeasureResult e_measure(const Tensor& s, const Tensor& g) {
  auto [ps, pg] = planes(s, g, "e_measure");
  const std::size_t n = ps.v.size();
  std::size_t fg = 0;
  for (double v : pg.v) fg += is_fg(v) ? 1 : 0;
  const double gmean = static_cast<double>(fg) / static_cast<double>(n);

  EMeasureResult out;
  double total = 0.0;
  std::vector<double> bin(n);
  for (std::size_t k = 0; k < kThresholds; ++k) {
    const double t = threshold(k);
    double fmean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      bin[i] = ps.v[i] >= t ? 1.0 : 0.0;
      fmean += bin[i];
    }
    fmean /= static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fg == 0) {
        acc += 1.0 - bin[i];
      } else if (fg == n) {
        acc += bin[i];
      } else {
        const double a = bin[i] - fmean;
        const double b = (is_fg(pg.v[i]) ? 1.0 : 0.0) - gmean;
        const double align = 2.0 * a * b / (a * a + b * b + kEps);
        acc += (1.0 + align) * (1.0 + align) / 4.0;
      }
    }
    out.curve[k] = acc / static_cast<double>(n);
    total += out.curve[k];
  }
  out.mean = total / static_cast<double>(kThresholds);
  out.max = *std::max_element(out.curve.begin(), out.curve.end());
  return out;
}

std::vector<double> gaussian_kernel(std::size_t k, double sigma) {
  if (k % 2 == 0 || !(sigma > 0)) throw ParameterError("gaussian_kernel: odd size and positive sigma required");
  const long r = static_cast<long>(k / 2);
  std::vector<double> h(k * k);
  double mx = 0.0;
  for (long y = -r; y <= r; ++y)
    for (long x = -r; x <= r; ++x) {
      const double v = std::exp(-static_cast<double>(x * x + y * y) / (2.0 * sigma * sigma));
      h[static_cast<std::size_t>((y + r) * static_cast<long>(k) + (x + r))] = v;
      mx = std::max(mx, v);
    }
  double total = 0.0;
  for (double& v : h) {
    if (v < kEps * mx) v = 0.0;
    total += v;
  }
  for (double& v : h) v /= total;
  return h;
}

NearestForeground nearest_foreground(const std::vector<bool>& fg, std::size_t h, std::size_t w) {
  if (fg.size() != h * w) throw DimensionError("nearest_foreground: mask size mismatch");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Per column: nearest foreground row (smaller row on ties).
  std::vector<long> col_row(h * w, -1);
  for (std::size_t c = 0; c < w; ++c) {
    long above = -1;
    for (std::size_t r = 0; r < h; ++r) {
      if (fg[r * w + c]) above = static_cast<long>(r);
      col_row[r * w + c] = above;
    }
    long below = -1;
    for (std::size_t r = h; r-- > 0;) {
      if (fg[r * w + c]) below = static_cast<long>(r);
      long& best = col_row[r * w + c];
      if (below >= 0 && (best < 0 || below - static_cast<long>(r) < static_cast<long>(r) - best)) best = below;
    }
  }
  NearestForeground out;
  out.dist2.assign(h * w, inf);
  out.index.assign(h * w, -1);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c0 = 0; c0 < w; ++c0) {
      double best = inf;
      long best_r = -1, best_c = -1;
      for (std::size_t c = 0; c < w; ++c) {
        const long rr = col_row[r * w + c];
        if (rr < 0) continue;
        const double dr = static_cast<double>(rr) - static_cast<double>(r);
        const double dc = static_cast<double>(c) - static_cast<double>(c0);
        const double d = dr * dr + dc * dc;
        if (d < best || (d == best && (rr < best_r || (rr == best_r && static_cast<long>(c) < best_c)))) {
          best = d;
          best_r = rr;
          best_c = static_cast<long>(c);
        }
      }
      out.dist2[r * w + c0] = best;
      if (best_r >= 0) out.index[r * w + c0] = best_r * static_cast<long>(w) + best_c;
    }
  }
  return out;
}

WeightedFResult weighted_f(const Tensor& s, const Tensor& g) {
  auto [ps, pg] = planes(s, g, "weighted_f");
  const std::size_t h = ps.h, w = ps.w, n = h * w;
  std::vector<bool> fg(n);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fg[i] = is_fg(pg.v[i]);
    count += fg[i] ? 1 : 0;
  }
  if (count == 0) return {0.0, true};

  std::vector<double> err(n);
  for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(ps.v[i] - (fg[i] ? 1.0 : 0.0));
  const NearestForeground nf = nearest_foreground(fg, h, w);
  std::vector<double> et(err);
  for (std::size_t i = 0; i < n; ++i)
    if (!fg[i]) et[i] = err[static_cast<std::size_t>(nf.index[i])];

  constexpr std::size_t k = 5;
  const std::vector<double> kernel = gaussian_kernel(k, 5.0);
  const long r = static_cast<long>(k / 2);
  std::vector<double> ea(n, 0.0);
  for (long y = 0; y < static_cast<long>(h); ++y)
    for (long x = 0; x < static_cast<long>(w); ++x) {
      double acc = 0.0;
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
          const long yy = y - dy, xx = x - dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
          acc += kernel[static_cast<std::size_t>((dy + r) * static_cast<long>(k) + (dx + r))] *
                 et[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
        }
      ea[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] = acc;
    }

  const double theta = std::log(0.5) / 5.0;
  double fg_err = 0.0, bg_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (fg[i]) {
      fg_err += ea[i] < err[i] ? ea[i] : err[i];
    } else {
      bg_err += err[i] * (2.0 - std::exp(theta * std::sqrt(nf.dist2[i])));
    }
  }
  const double tp = static_cast<double>(count) - fg_err;
  const double recall = 1.0 - fg_err / static_cast<double>(count);
  const double precision = tp / (kEps + tp + bg_err);
  return {2.0 * recall * precision / (kEps + recall + precision), false};
}

PrCurve pr_curve(const Tensor& s, const Tensor& g) {
  auto [ps, pg] = planes(s, g, "pr_curve");
  std::size_t fg = 0;
  for (double v : pg.v) fg += is_fg(v) ? 1 : 0;
  PrCurve out{};
  for (std::size_t k = 0; k < kThresholds; ++k) {
    const double t = threshold(k);
    std::size_t tp = 0, pos = 0;
    for (std::size_t i = 0; i < ps.v.size(); ++i) {
      if (ps.v[i] >= t) {
        ++pos;
        if (is_fg(pg.v[i])) ++tp;
      }
    }
    out[k].precision = pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
    out[k].recall = fg ? static_cast<double>(tp) / static_cast<double>(fg) : 0.0;
  }
  return out;
}

double iou(const Tensor& s, const Tensor& g, double thr) {
  auto [ps, pg] = planes(s, g, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < ps.v.size(); ++i) {
    const bool a = ps.v[i] >= thr, b = is_fg(pg.v[i]);
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

MetricReport evaluate_dataset(const std::vector<std::pair<Tensor, Tensor>>& pairs) {
  if (pairs.empty()) throw ParameterError("evaluate_dataset: no image pairs");
  MetricReport rep;
  std::array<double, kThresholds> curve{};
  const double wgt = 1.0 / static_cast<double>(pairs.size());
  for (const auto& [s, g] : pairs) {
    rep.mae += wgt * mae(s, g);
    rep.s_measure += wgt * s_measure(s, g);
    const EMeasureResult e = e_measure(s, g);
    rep.e_measure_mean += wgt * e.mean;
    for (std::size_t k = 0; k < kThresholds; ++k) curve[k] += wgt * e.curve[k];
    const WeightedFResult f = weighted_f(s, g);
    rep.weighted_f += wgt * f.value;
    rep.degenerate_gt += f.degenerate ? 1 : 0;
    const PrCurve pr = pr_curve(s, g);
    for (std::size_t k = 0; k < kThresholds; ++k) {
      rep.pr_curve[k].precision += wgt * pr[k].precision;
      rep.pr_curve[k].recall += wgt * pr[k].recall;
    }
  }
  rep.e_measure_max = *std::max_element(curve.begin(), curve.end());
  rep.images = pairs.size();
  return rep;
}

}  // namespace sacnet
