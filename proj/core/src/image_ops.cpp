// Spatial primitives on C×H×W maps: convolution, resampling, token gather/scatter.

#include <algorithm>
#include <cmath>

#include "sacnet/autograd.hpp"
#include "sacnet/errors.hpp"
#include "sacnet/sampling.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet {

using autograd::grad_of;
using autograd::make_result;
using autograd::wants_grad;

namespace {

void require_chw(const Tensor& x, const char* op) {
  if (x.rank() != 3) {
    throw DimensionError(std::string(op) + " expects a C×H×W map, got " + shape_str(x.shape()));
  }
}

// Range of output columns/rows [lo, hi) whose input index o*stride + k - pad is in [0, n).
std::pair<long, long> valid_range(long n_out, long n_in, long k, long stride, long pad) {
  long lo = 0;
  if (pad > k) lo = (pad - k + stride - 1) / stride;
  long hi = (n_in - 1 + pad - k);
  hi = hi < 0 ? 0 : hi / stride + 1;
  return {std::min(lo, n_out), std::min(hi, n_out)};
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t padding) {
  require_chw(x, "conv2d");
  if (w.rank() != 4 || w.dim(1) != x.dim(0) || w.dim(2) != w.dim(3)) {
    throw DimensionError("conv2d: weight " + shape_str(w.shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  if (w.dim(2) % 2 == 0) throw ParameterError("conv2d: kernel size must be odd");
  if (stride == 0) throw ParameterError("conv2d: stride must be positive");
  const long cin = static_cast<long>(x.dim(0)), h = static_cast<long>(x.dim(1)),
             wd = static_cast<long>(x.dim(2));
  const long cout = static_cast<long>(w.dim(0)), k = static_cast<long>(w.dim(2));
  const long s = static_cast<long>(stride), p = static_cast<long>(padding);
  if (h + 2 * p < k || wd + 2 * p < k) {
    throw DimensionError("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                         shape_str(x.shape()));
  }
  if (b.defined() && (b.rank() != 1 || static_cast<long>(b.dim(0)) != cout)) {
    throw DimensionError("conv2d: bias " + shape_str(b.shape()) + " for " + std::to_string(cout) +
                         " output channels");
  }
  const long ho = (h + 2 * p - k) / s + 1, wo = (wd + 2 * p - k) / s + 1;

  std::vector<double> out(static_cast<std::size_t>(cout * ho * wo), 0.0);
  const double* xd = x.data().data();
  const double* wdat = w.data().data();
  for (long co = 0; co < cout; ++co) {
    double* o = out.data() + co * ho * wo;
    if (b.defined()) std::fill(o, o + ho * wo, b.data()[co]);
    for (long ci = 0; ci < cin; ++ci) {
      const double* xp = xd + ci * h * wd;
      for (long ky = 0; ky < k; ++ky) {
        const auto [oy0, oy1] = valid_range(ho, h, ky, s, p);
        for (long kx = 0; kx < k; ++kx) {
          const double wv = wdat[((co * cin + ci) * k + ky) * k + kx];
          if (wv == 0.0) continue;
          const auto [ox0, ox1] = valid_range(wo, wd, kx, s, p);
          for (long oy = oy0; oy < oy1; ++oy) {
            const double* xrow = xp + (oy * s + ky - p) * wd + (kx - p);
            double* orow = o + oy * wo;
            if (s == 1) {
              for (long ox = ox0; ox < ox1; ++ox) orow[ox] += wv * xrow[ox];
            } else {
              for (long ox = ox0; ox < ox1; ++ox) orow[ox] += wv * xrow[ox * s];
            }
          }
        }
      }
    }
  }

  Shape out_shape{static_cast<std::size_t>(cout), static_cast<std::size_t>(ho),
                  static_cast<std::size_t>(wo)};
  return make_result(out_shape, std::move(out), {x, w, b}, [=](const TapeNode& n) {
    const auto& g = n.output->grad;
    const double* xv = n.inputs[0]->data.data();
    const double* wv_all = n.inputs[1]->data.data();
    double* gx = wants_grad(n.inputs[0]) ? grad_of(*n.inputs[0]).data() : nullptr;
    double* gw = wants_grad(n.inputs[1]) ? grad_of(*n.inputs[1]).data() : nullptr;
    if (wants_grad(n.inputs[2])) {
      auto& gb = grad_of(*n.inputs[2]);
      for (long co = 0; co < cout; ++co) {
        double acc = 0.0;
        for (long i = 0; i < ho * wo; ++i) acc += g[co * ho * wo + i];
        gb[co] += acc;
      }
    }
    for (long co = 0; co < cout; ++co) {
      const double* go = g.data() + co * ho * wo;
      for (long ci = 0; ci < cin; ++ci) {
        for (long ky = 0; ky < k; ++ky) {
          const auto [oy0, oy1] = valid_range(ho, h, ky, s, p);
          for (long kx = 0; kx < k; ++kx) {
            const long widx = ((co * cin + ci) * k + ky) * k + kx;
            const double wv = wv_all[widx];
            const auto [ox0, ox1] = valid_range(wo, wd, kx, s, p);
            double acc = 0.0;
            for (long oy = oy0; oy < oy1; ++oy) {
              const long row = (oy * s + ky - p) * wd + (kx - p);
              const double* grow = go + oy * wo;
              if (gw) {
                const double* xrow = xv + ci * h * wd + row;
                if (s == 1) {
                  for (long ox = ox0; ox < ox1; ++ox) acc += grow[ox] * xrow[ox];
                } else {
                  for (long ox = ox0; ox < ox1; ++ox) acc += grow[ox] * xrow[ox * s];
                }
              }
              if (gx && wv != 0.0) {
                double* gxrow = gx + ci * h * wd + row;
                if (s == 1) {
                  for (long ox = ox0; ox < ox1; ++ox) gxrow[ox] += wv * grow[ox];
                } else {
                  for (long ox = ox0; ox < ox1; ++ox) gxrow[ox * s] += wv * grow[ox];
                }
              }
            }
            if (gw) gw[widx] += acc;
          }
        }
      }
    }
  });
}

namespace {
struct AxisTaps {
  std::vector<std::size_t> i0, i1;
  std::vector<double> frac;
};

AxisTaps upsample_taps(std::size_t n_in, std::size_t factor) {
  AxisTaps t;
  const std::size_t n_out = n_in * factor;
  t.i0.resize(n_out);
  t.i1.resize(n_out);
  t.frac.resize(n_out);
  for (std::size_t d = 0; d < n_out; ++d) {
    double src = (static_cast<double>(d) + 0.5) / static_cast<double>(factor) - 0.5;
    if (src < 0.0) src = 0.0;
    const auto lo = static_cast<std::size_t>(std::floor(src));
    t.i0[d] = std::min(lo, n_in - 1);
    t.i1[d] = std::min(lo + 1, n_in - 1);
    t.frac[d] = src - static_cast<double>(lo);
  }
  return t;
}
}  // namespace

Tensor upsample_bilinear(const Tensor& x, std::size_t factor) {
  require_chw(x, "upsample_bilinear");
  if (factor < 1) throw ParameterError("upsample_bilinear: factor must be >= 1");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t ho = h * factor, wo = w * factor;
  const AxisTaps ty = upsample_taps(h, factor);
  const AxisTaps tx = upsample_taps(w, factor);
  const double* xd = x.data().data();
  std::vector<double> out(c * ho * wo);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = xd + ch * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      const double ly = ty.frac[oy];
      const double* r0 = plane + ty.i0[oy] * w;
      const double* r1 = plane + ty.i1[oy] * w;
      double* orow = out.data() + (ch * ho + oy) * wo;
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const double lx = tx.frac[ox];
        const std::size_t a = tx.i0[ox], bb = tx.i1[ox];
        orow[ox] = (1.0 - ly) * ((1.0 - lx) * r0[a] + lx * r0[bb]) +
                   ly * ((1.0 - lx) * r1[a] + lx * r1[bb]);
      }
    }
  }
  return make_result({c, ho, wo}, std::move(out), {x}, [=](const TapeNode& n) {
    if (!wants_grad(n.inputs[0])) return;
    auto& gi = grad_of(*n.inputs[0]);
    const auto& g = n.output->grad;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* plane = gi.data() + ch * h * w;
      for (std::size_t oy = 0; oy < ho; ++oy) {
        const double ly = ty.frac[oy];
        double* r0 = plane + ty.i0[oy] * w;
        double* r1 = plane + ty.i1[oy] * w;
        const double* grow = g.data() + (ch * ho + oy) * wo;
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double lx = tx.frac[ox];
          const std::size_t a = tx.i0[ox], bb = tx.i1[ox];
          const double gv = grow[ox];
          r0[a] += gv * (1.0 - ly) * (1.0 - lx);
          r0[bb] += gv * (1.0 - ly) * lx;
          r1[a] += gv * ly * (1.0 - lx);
          r1[bb] += gv * ly * lx;
        }
      }
    }
  });
}

BilinearTaps bilinear_taps(std::size_t height, std::size_t width, double px, double py) {
  BilinearTaps b{};
  const double fx = std::floor(px), fy = std::floor(py);
  const double lx = px - fx, ly = py - fy;
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
  const double w[4] = {(1 - ly) * (1 - lx), (1 - ly) * lx, ly * (1 - lx), ly * lx};
  const double ddx[4] = {-(1 - ly), (1 - ly), -ly, ly};
  const double ddy[4] = {-(1 - lx), -lx, (1 - lx), lx};
  const long h = static_cast<long>(height), wd = static_cast<long>(width);
  for (int i = 0; i < 4; ++i) {
    const bool inside = xs[i] >= 0 && xs[i] < wd && ys[i] >= 0 && ys[i] < h;
    b.index[i] = inside ? ys[i] * wd + xs[i] : -1;
    b.weight[i] = w[i];
    b.d_dx[i] = ddx[i];
    b.d_dy[i] = ddy[i];
  }
  return b;
}

double bilinear_value(std::span<const double> plane, std::size_t height, std::size_t width,
                      double px, double py) {
  if (!std::isfinite(px) || !std::isfinite(py)) return 0.0;
  const BilinearTaps b = bilinear_taps(height, width, px, py);
  double v = 0.0;
  for (int i = 0; i < 4; ++i)
    if (b.index[i] >= 0) v += b.weight[i] * plane[static_cast<std::size_t>(b.index[i])];
  return v;
}

Tensor bilinear_sample(const Tensor& x, const Tensor& px, const Tensor& py) {
  require_chw(x, "bilinear_sample");
  if (px.numel() != 1 || py.numel() != 1) {
    throw DimensionError("bilinear_sample: coordinates must be single-element tensors");
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const BilinearTaps b = bilinear_taps(h, w, px.item(), py.item());
  const auto xd = x.data();
  std::vector<double> out(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (int i = 0; i < 4; ++i)
      if (b.index[i] >= 0) out[ch] += b.weight[i] * xd[ch * h * w + static_cast<std::size_t>(b.index[i])];
  }
  return make_result({c}, std::move(out), {x, px, py}, [=](const TapeNode& n) {
    const auto& g = n.output->grad;
    const auto& xv = n.inputs[0]->data;
    if (wants_grad(n.inputs[0])) {
      auto& gx = grad_of(*n.inputs[0]);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (int i = 0; i < 4; ++i)
          if (b.index[i] >= 0) gx[ch * h * w + static_cast<std::size_t>(b.index[i])] += g[ch] * b.weight[i];
    }
    double gpx = 0.0, gpy = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (int i = 0; i < 4; ++i)
        if (b.index[i] >= 0) {
          const double v = xv[ch * h * w + static_cast<std::size_t>(b.index[i])];
          gpx += g[ch] * b.d_dx[i] * v;
          gpy += g[ch] * b.d_dy[i] * v;
        }
    if (wants_grad(n.inputs[1])) grad_of(*n.inputs[1])[0] += gpx;
    if (wants_grad(n.inputs[2])) grad_of(*n.inputs[2])[0] += gpy;
  });
}

Tensor bilinear_sample(const Tensor& x, double px, double py) {
  return bilinear_sample(x, Tensor::scalar(px), Tensor::scalar(py));
}

Tensor gather_tokens(const Tensor& x, std::span<const long> positions) {
  require_chw(x, "gather_tokens");
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  const std::size_t n = positions.size();
  std::vector<long> pos(positions.begin(), positions.end());
  for (long p : pos) {
    if (p < -1 || p >= static_cast<long>(hw)) {
      throw DimensionError("gather_tokens: position " + std::to_string(p) + " outside map " +
                           shape_str(x.shape()));
    }
  }
  const auto xd = x.data();
  std::vector<double> out(n * c, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (pos[r] < 0) continue;
    for (std::size_t ch = 0; ch < c; ++ch) out[r * c + ch] = xd[ch * hw + static_cast<std::size_t>(pos[r])];
  }
  return make_result({n, c}, std::move(out), {x}, [pos, c, hw](const TapeNode& node) {
    if (!wants_grad(node.inputs[0])) return;
    auto& gi = grad_of(*node.inputs[0]);
    const auto& g = node.output->grad;
    for (std::size_t r = 0; r < pos.size(); ++r) {
      if (pos[r] < 0) continue;
      for (std::size_t ch = 0; ch < c; ++ch) gi[ch * hw + static_cast<std::size_t>(pos[r])] += g[r * c + ch];
    }
  });
}

Tensor scatter_tokens(const Tensor& tokens, std::span<const long> positions, std::size_t height,
                      std::size_t width) {
  if (tokens.rank() != 2 || tokens.dim(0) != positions.size()) {
    throw DimensionError("scatter_tokens: " + shape_str(tokens.shape()) + " tokens for " +
                         std::to_string(positions.size()) + " positions");
  }
  const std::size_t c = tokens.dim(1), hw = height * width, n = positions.size();
  std::vector<long> pos(positions.begin(), positions.end());
  std::vector<char> seen(hw, 0);
  for (long p : pos) {
    if (p < 0 || p >= static_cast<long>(hw)) {
      throw DimensionError("scatter_tokens: position " + std::to_string(p) + " outside " +
                           std::to_string(height) + "x" + std::to_string(width));
    }
    if (seen[static_cast<std::size_t>(p)]++) {
      throw DimensionError("scatter_tokens: position " + std::to_string(p) + " written twice");
    }
  }
  const auto td = tokens.data();
  std::vector<double> out(c * hw, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t ch = 0; ch < c; ++ch) out[ch * hw + static_cast<std::size_t>(pos[r])] = td[r * c + ch];
  return make_result({c, height, width}, std::move(out), {tokens}, [pos, c, hw](const TapeNode& node) {
    if (!wants_grad(node.inputs[0])) return;
    auto& gi = grad_of(*node.inputs[0]);
    const auto& g = node.output->grad;
    for (std::size_t r = 0; r < pos.size(); ++r)
      for (std::size_t ch = 0; ch < c; ++ch) gi[r * c + ch] += g[ch * hw + static_cast<std::size_t>(pos[r])];
  });
}

Tensor map_to_tokens(const Tensor& x) {
  require_chw(x, "map_to_tokens");
  return transpose(reshape(x, {x.dim(0), x.dim(1) * x.dim(2)}));
}

Tensor tokens_to_map(const Tensor& tokens, std::size_t height, std::size_t width) {
  if (tokens.rank() != 2 || tokens.dim(0) != height * width) {
    throw DimensionError("tokens_to_map: " + shape_str(tokens.shape()) + " tokens for a " +
                         std::to_string(height) + "x" + std::to_string(width) + " map");
  }
  return reshape(transpose(tokens), {tokens.dim(1), height, width});
}

}  // namespace sacnet
