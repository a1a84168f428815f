// Brute-force reference implementations used to cross-check the library.
// Written directly from the defining formulas on nested vectors, sharing no
// code with sacnet.
#ifndef SACNET_TESTS_ORACLES_HPP
#define SACNET_TESTS_ORACLES_HPP

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Grid = std::vector<std::vector<double>>;  // [row][col]
using Maps = std::vector<Grid>;                 // [channel][row][col]

inline Maps to_maps(const std::vector<double>& flat, std::size_t c, std::size_t h, std::size_t w) {
  Maps m(c, Grid(h, std::vector<double>(w)));
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t q = 0; q < w; ++q) m[k][r][q] = flat[(k * h + r) * w + q];
  return m;
}

inline std::vector<double> flatten(const Maps& m) {
  std::vector<double> out;
  for (const auto& g : m)
    for (const auto& row : g) out.insert(out.end(), row.begin(), row.end());
  return out;
}

inline Grid to_grid(const std::vector<double>& flat, std::size_t h, std::size_t w) {
  return to_maps(flat, 1, h, w)[0];
}

// ---- convolution ----------------------------------------------------------

// weight[o][i][ky][kx] flattened; out(o, y, x) = b[o] + Σ w · x(i, y·s + ky − p, x·s + kx − p)
inline Maps conv2d(const Maps& x, const std::vector<double>& weight, std::size_t cout, std::size_t k,
                   const std::vector<double>& bias, std::size_t stride, std::size_t pad) {
  const long cin = static_cast<long>(x.size()), h = static_cast<long>(x[0].size()),
             w = static_cast<long>(x[0][0].size());
  const long K = static_cast<long>(k), S = static_cast<long>(stride), P = static_cast<long>(pad);
  const long ho = (h + 2 * P - K) / S + 1, wo = (w + 2 * P - K) / S + 1;
  Maps out(cout, Grid(static_cast<std::size_t>(ho), std::vector<double>(static_cast<std::size_t>(wo))));
  for (long o = 0; o < static_cast<long>(cout); ++o)
    for (long y = 0; y < ho; ++y)
      for (long xx = 0; xx < wo; ++xx) {
        double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)];
        for (long i = 0; i < cin; ++i)
          for (long ky = 0; ky < K; ++ky)
            for (long kx = 0; kx < K; ++kx) {
              const long sy = y * S + ky - P, sx = xx * S + kx - P;
              if (sy < 0 || sx < 0 || sy >= h || sx >= w) continue;
              acc += weight[static_cast<std::size_t>(((o * cin + i) * K + ky) * K + kx)] *
                     x[static_cast<std::size_t>(i)][static_cast<std::size_t>(sy)][static_cast<std::size_t>(sx)];
            }
        out[static_cast<std::size_t>(o)][static_cast<std::size_t>(y)][static_cast<std::size_t>(xx)] = acc;
      }
  return out;
}

// ---- bilinear read / deformable conv ------------------------------------------

inline double pixel_or_zero(const Grid& g, long r, long c) {
  if (r < 0 || c < 0 || r >= static_cast<long>(g.size()) || c >= static_cast<long>(g[0].size())) return 0.0;
  return g[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
}

// Bilinear read at column px, row py; corners outside the map read as zero.
inline double bilinear(const Grid& g, double px, double py) {
  const double fx = std::floor(px), fy = std::floor(py);
  const long c0 = static_cast<long>(fx), r0 = static_cast<long>(fy);
  const double ax = px - fx, ay = py - fy;
  return (1 - ay) * ((1 - ax) * pixel_or_zero(g, r0, c0) + ax * pixel_or_zero(g, r0, c0 + 1)) +
         ay * ((1 - ax) * pixel_or_zero(g, r0 + 1, c0) + ax * pixel_or_zero(g, r0 + 1, c0 + 1));
}

// offsets: 18 maps, map 2n = column shift, 2n+1 = row shift of tap n (row-major 3×3).
inline Maps deform_conv(const Maps& x, const Maps& offsets, const std::vector<double>& weight, std::size_t cout,
                        const std::vector<double>& bias) {
  const std::size_t cin = x.size(), h = x[0].size(), w = x[0][0].size();
  Maps out(cout, Grid(h, std::vector<double>(w, 0.0)));
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (std::size_t i = 0; i < cin; ++i)
          for (std::size_t n = 0; n < 9; ++n) {
            const double px = static_cast<double>(xx) + static_cast<double>(n % 3) - 1.0 + offsets[2 * n][y][xx];
            const double py = static_cast<double>(y) + static_cast<double>(n / 3) - 1.0 + offsets[2 * n + 1][y][xx];
            acc += weight[(o * cin + i) * 9 + n] * bilinear(x[i], px, py);
          }
        out[o][y][xx] = acc;
      }
  return out;
}

// ---- attention ------------------------------------------------------------

// Row-vector convention: projected = x · W + b with W stored d_in×d_out row-major.
inline Grid project(const Grid& x, const std::vector<double>& W, const std::vector<double>& b) {
  const std::size_t n = x.size(), din = x[0].size(), dout = b.size();
  Grid out(n, std::vector<double>(dout, 0.0));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < dout; ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < din; ++i) acc += x[r][i] * W[i * dout + j];
      out[r][j] = acc;
    }
  return out;
}

struct AttentionWeights {
  std::vector<double> wq, bq, wk, bk, wv, bv;
};

// Multi-head scaled dot-product attention plus the unprojected query residual.
inline Grid correlation(const Grid& qs, const Grid& kvs, const AttentionWeights& p, std::size_t heads,
                        double logit_scale = -1.0) {
  const Grid q = project(qs, p.wq, p.bq), k = project(kvs, p.wk, p.bk), v = project(kvs, p.wv, p.bv);
  const std::size_t d = q[0].size(), dh = d / heads;
  const double sc = logit_scale < 0 ? 1.0 / std::sqrt(static_cast<double>(dh)) : logit_scale;
  Grid out = qs;
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> logits(k.size());
      for (std::size_t j = 0; j < k.size(); ++j) {
        double dot = 0.0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dot += q[i][c] * k[j][c];
        logits[j] = dot * sc;
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k.size(); ++j) acc += logits[j] / z * v[j][c];
        out[i][c] += acc;
      }
    }
  return out;
}

// ---- saliency metrics -----------------------------------------------------

constexpr double kEps = DBL_EPSILON;

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double mae(const Grid& s, const Grid& g) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < s.size(); ++r)
    for (std::size_t c = 0; c < s[0].size(); ++c, ++n) acc += std::abs(s[r][c] - g[r][c]);
  return acc / static_cast<double>(n);
}

// Structure measure, following the published MATLAB reference with 1-based
// centroid arithmetic. An empty quadrant has zero weight and contributes 0.
inline double object_term(const std::vector<double>& vals) {
  const double x = mean_of(vals);
  double var = 0.0;
  for (double v : vals) var += (v - x) * (v - x);
  const double sd = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sd + kEps);
}

inline double quadrant_ssim(const Grid& s, const Grid& g, std::size_t r0, std::size_t r1, std::size_t c0,
                            std::size_t c1) {
  std::vector<double> a, b;
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) {
      a.push_back(s[r][c]);
      b.push_back(g[r][c]);
    }
  if (a.empty()) return 0.0;
  const double N = static_cast<double>(a.size());
  const double x = mean_of(a), y = mean_of(b);
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sx += (a[i] - x) * (a[i] - x);
    sy += (b[i] - y) * (b[i] - y);
    sxy += (a[i] - x) * (b[i] - y);
  }
  sx /= (N - 1 + kEps);
  sy /= (N - 1 + kEps);
  sxy /= (N - 1 + kEps);
  const double alpha = 4 * x * y * sxy, beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0) return alpha / (beta + kEps);
  if (beta == 0) return 1.0;
  return 0.0;
}

inline double s_measure(const Grid& s, const Grid& g) {
  const std::size_t rows = g.size(), cols = g[0].size();
  double total = 0.0, ssum = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      total += g[r][c];
      ssum += s[r][c];
    }
  const double area = static_cast<double>(rows * cols);
  const double y = total / area;
  if (y == 0) return 1.0 - ssum / area;
  if (y == 1) return ssum / area;

  std::vector<double> fg, bg;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      if (g[r][c] > 0.5) fg.push_back(s[r][c]);
      else bg.push_back(1.0 - s[r][c]);
    }
  const double object = y * object_term(fg) + (1 - y) * object_term(bg);

  // 1-based centroid, MATLAB round (half away from zero).
  double sx = 0, sy = 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      sx += g[r][c] * static_cast<double>(c + 1);
      sy += g[r][c] * static_cast<double>(r + 1);
    }
  const std::size_t X = static_cast<std::size_t>(std::round(sx / total));
  const std::size_t Y = static_cast<std::size_t>(std::round(sy / total));
  const double w1 = static_cast<double>(X * Y) / area;
  const double w2 = static_cast<double>((cols - X) * Y) / area;
  const double w3 = static_cast<double>(X * (rows - Y)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double region = w1 * quadrant_ssim(s, g, 0, Y, 0, X) + w2 * quadrant_ssim(s, g, 0, Y, X, cols) +
                        w3 * quadrant_ssim(s, g, Y, rows, 0, X) + w4 * quadrant_ssim(s, g, Y, rows, X, cols);
  const double q = 0.5 * object + 0.5 * region;
  return q < 0 ? 0.0 : q;
}

// Enhanced alignment at one binarization; averaged over all N pixels.
inline double e_measure_at(const Grid& s, const Grid& g, double t) {
  const std::size_t rows = g.size(), cols = g[0].size();
  const double N = static_cast<double>(rows * cols);
  double muF = 0, muG = 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      muF += s[r][c] >= t ? 1.0 : 0.0;
      muG += g[r][c];
    }
  muF /= N;
  muG /= N;
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double F = s[r][c] >= t ? 1.0 : 0.0;
      double e;
      if (muG == 0) e = 1.0 - F;
      else if (muG == 1) e = F;
      else {
        const double a = F - muF, b = g[r][c] - muG;
        const double align = 2 * a * b / (a * a + b * b + kEps);
        e = (align + 1) * (align + 1) / 4;
      }
      acc += e;
    }
  return acc / N;
}

struct EResult {
  double mean = 0, max = 0;
  std::vector<double> curve;
};

inline EResult e_measure(const Grid& s, const Grid& g) {
  EResult out;
  for (int k = 0; k < 256; ++k) out.curve.push_back(e_measure_at(s, g, k / 255.0));
  out.mean = mean_of(out.curve);
  out.max = *std::max_element(out.curve.begin(), out.curve.end());
  return out;
}

// Weighted F-measure with a 5×5, σ = 5 dependency kernel. Nearest-foreground
// ties resolve to the lowest row-major index.
inline double weighted_f(const Grid& s, const Grid& g) {
  const long rows = static_cast<long>(g.size()), cols = static_cast<long>(g[0].size());
  bool any = false;
  for (const auto& row : g)
    for (double v : row) any = any || v > 0.5;
  if (!any) return 0.0;

  Grid E(g.size(), std::vector<double>(g[0].size())), Et = E, D = E;
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) E[r][c] = std::abs(s[r][c] - g[r][c]);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      if (g[r][c] > 0.5) {
        Et[r][c] = E[r][c];
        D[r][c] = 0;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      long br = -1, bc = -1;
      for (long rr = 0; rr < rows; ++rr)
        for (long cc = 0; cc < cols; ++cc) {
          if (g[rr][cc] <= 0.5) continue;
          const double d = static_cast<double>((rr - r) * (rr - r) + (cc - c) * (cc - c));
          if (d < best) {
            best = d;
            br = rr;
            bc = cc;
          }
        }
      Et[r][c] = E[br][bc];
      D[r][c] = std::sqrt(best);
    }

  double K[5][5], kmax = 0, ksum = 0;
  for (int y = -2; y <= 2; ++y)
    for (int x = -2; x <= 2; ++x) kmax = std::max(kmax, K[y + 2][x + 2] = std::exp(-(x * x + y * y) / 50.0));
  for (auto& row : K)
    for (double& v : row) ksum += (v = v < kEps * kmax ? 0.0 : v);
  for (auto& row : K)
    for (double& v : row) v /= ksum;

  double fg_sum = 0, fp = 0, count = 0;
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      if (g[r][c] > 0.5) {
        double ea = 0;
        for (int y = -2; y <= 2; ++y)
          for (int x = -2; x <= 2; ++x) {
            const long rr = r + y, cc = c + x;
            if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
            ea += K[y + 2][x + 2] * Et[rr][cc];
          }
        fg_sum += std::min(ea, E[r][c]);
        count += 1;
      } else {
        fp += E[r][c] * (2.0 - std::exp(std::log(0.5) / 5.0 * D[r][c]));
      }
    }
  const double tp = count - fg_sum;
  const double R = 1.0 - fg_sum / count;
  const double P = tp / (kEps + tp + fp);
  return 2.0 * R * P / (kEps + R + P);
}

struct PR {
  double precision, recall;
};

inline std::vector<PR> pr_curve(const Grid& s, const Grid& g) {
  std::vector<PR> out;
  for (int k = 0; k < 256; ++k) {
    const double t = k / 255.0;
    double tp = 0, pp = 0, gp = 0;
    for (std::size_t r = 0; r < g.size(); ++r)
      for (std::size_t c = 0; c < g[0].size(); ++c) {
        const bool p = s[r][c] >= t, q = g[r][c] > 0.5;
        tp += p && q;
        pp += p;
        gp += q;
      }
    out.push_back({pp > 0 ? tp / pp : 0.0, gp > 0 ? tp / gp : 0.0});
  }
  return out;
}

// ---- optimizer ------------------------------------------------------------

struct AdamState {
  double m = 0, v = 0;
  int t = 0;
};

// One AdamW step on a scalar parameter (decay applied to the weight first).
inline double adamw(double x, double grad, AdamState& st, double lr, double wd, double b1 = 0.9,
                    double b2 = 0.999, double eps = 1e-8) {
  st.t += 1;
  x = x - lr * wd * x;
  st.m = b1 * st.m + (1 - b1) * grad;
  st.v = b2 * st.v + (1 - b2) * grad * grad;
  const double mh = st.m / (1 - std::pow(b1, st.t)), vh = st.v / (1 - std::pow(b2, st.t));
  return x - lr * mh / (std::sqrt(vh) + eps);
}

// ---- random fixtures ------------------------------------------------------

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Binary mask made of one or two random rectangles; never empty or full.
inline std::vector<double> random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::uniform_int_distribution<std::size_t> rr(0, h - 1), cc(0, w - 1);
  std::vector<double> m(h * w, 0.0);
  const int blobs = 1 + static_cast<int>(rng() % 2);
  for (int b = 0; b < blobs; ++b) {
    std::size_t r0 = rr(rng), r1 = rr(rng), c0 = cc(rng), c1 = cc(rng);
    if (r0 > r1) std::swap(r0, r1);
    if (c0 > c1) std::swap(c0, c1);
    for (std::size_t r = r0; r <= r1; ++r)
      for (std::size_t c = c0; c <= c1; ++c) m[r * w + c] = 1.0;
  }
  if (std::all_of(m.begin(), m.end(), [](double v) { return v == 1.0; })) m[0] = 0.0;
  return m;
}

}  // namespace oracle

#endif  // SACNET_TESTS_ORACLES_HPP
