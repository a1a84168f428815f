#include "sacnet/afsm.hpp"

#include <cmath>

#include "sacnet/autograd.hpp"
#include "sacnet/errors.hpp"
#include "sacnet/sampling.hpp"

namespace sacnet {

using autograd::grad_of;
using autograd::make_result;
using autograd::wants_grad;

DeformableLayer make_deformable_layer(ParamStore& store, Initializer& init,
                                      const std::string& prefix, std::size_t channels,
                                      std::size_t out_channels) {
  DeformableLayer layer;
  layer.offset_w = store.add(prefix + ".offset.w", zeros({2 * kDeformTaps, 2 * channels, 3, 3}));
  layer.offset_b = store.add(prefix + ".offset.b", zeros({2 * kDeformTaps}));
  layer.weight = store.add(prefix + ".w", init.conv_weight(out_channels, channels, 3, 1.0));
  layer.bias = store.add(prefix + ".b", zeros({out_channels}));
  return layer;
}

OffsetField predict_offsets(const Tensor& f_t, const Tensor& f_rgb, const DeformableLayer& layer) {
  if (f_t.shape() != f_rgb.shape()) {
    throw DimensionError("predict_offsets: thermal " + shape_str(f_t.shape()) + " vs rgb " +
                         shape_str(f_rgb.shape()));
  }
  return {conv2d(concat({f_t, f_rgb}, 0), layer.offset_w, layer.offset_b, 1, 1)};
}

Tensor deformable_conv2d(const Tensor& x, const Tensor& offsets, const Tensor& weight,
                         const Tensor& bias) {
  if (x.rank() != 3) throw DimensionError("deformable_conv: input must be C×H×W, got " + shape_str(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), hw = h * w;
  if (weight.rank() != 4 || weight.dim(1) != c || weight.dim(2) != weight.dim(3) ||
      weight.dim(2) % 2 == 0) {
    throw DimensionError("deformable_conv: kernel " + shape_str(weight.shape()) + " for input " +
                         shape_str(x.shape()));
  }
  const std::size_t k = weight.dim(2), taps = k * k, cout = weight.dim(0);
  const long pad = static_cast<long>(k / 2);
  if (offsets.shape() != Shape{2 * taps, h, w}) {
    throw DimensionError("deformable_conv: offsets " + shape_str(offsets.shape()) + ", expected " +
                         shape_str({2 * taps, h, w}));
  }
  if (bias.defined() && bias.shape() != Shape{cout}) {
    throw DimensionError("deformable_conv: bias " + shape_str(bias.shape()));
  }

  const std::size_t rows = c * taps;
  const auto xd = x.data();
  const auto od = offsets.data();
  std::vector<double> cols(rows * hw, 0.0);
  for (std::size_t n = 0; n < taps; ++n) {
    const long ky = static_cast<long>(n / k), kx = static_cast<long>(n % k);
    for (std::size_t p = 0; p < hw; ++p) {
      const long oy = static_cast<long>(p / w), ox = static_cast<long>(p % w);
      const double px = static_cast<double>(ox - pad + kx) + od[(2 * n) * hw + p];
      const double py = static_cast<double>(oy - pad + ky) + od[(2 * n + 1) * hw + p];
      if (!std::isfinite(px) || !std::isfinite(py)) continue;
      const BilinearTaps t = bilinear_taps(h, w, px, py);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double v = 0.0;
        for (int i = 0; i < 4; ++i)
          if (t.index[i] >= 0) v += t.weight[i] * xd[ch * hw + static_cast<std::size_t>(t.index[i])];
        cols[(ch * taps + n) * hw + p] = v;
      }
    }
  }

  std::vector<double> out(cout * hw, 0.0);
  const auto wd = weight.data();
  for (std::size_t co = 0; co < cout; ++co) {
    double* orow = out.data() + co * hw;
    if (bias.defined()) std::fill(orow, orow + hw, bias.data()[co]);
    for (std::size_t r = 0; r < rows; ++r) {
      const double wv = wd[co * rows + r];
      if (wv == 0.0) continue;
      const double* crow = cols.data() + r * hw;
      for (std::size_t p = 0; p < hw; ++p) orow[p] += wv * crow[p];
    }
  }

  return make_result(
      {cout, h, w}, std::move(out), {x, offsets, weight, bias},
      [c, h, w, hw, k, taps, cout, rows, pad, cols = std::move(cols)](const TapeNode& node) {
        const auto& g = node.output->grad;
        const auto& xv = node.inputs[0]->data;
        const auto& ov = node.inputs[1]->data;
        const auto& wv = node.inputs[2]->data;
        if (wants_grad(node.inputs[3])) {
          auto& gb = grad_of(*node.inputs[3]);
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t p = 0; p < hw; ++p) gb[co] += g[co * hw + p];
        }
        if (wants_grad(node.inputs[2])) {
          auto& gw = grad_of(*node.inputs[2]);
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t r = 0; r < rows; ++r) {
              double acc = 0.0;
              const double* crow = cols.data() + r * hw;
              const double* grow = g.data() + co * hw;
              for (std::size_t p = 0; p < hw; ++p) acc += grow[p] * crow[p];
              gw[co * rows + r] += acc;
            }
        }
        const bool need_x = wants_grad(node.inputs[0]);
        const bool need_off = wants_grad(node.inputs[1]);
        if (!need_x && !need_off) return;
        // d(loss)/d(cols) = Wᵀ · g
        std::vector<double> gcols(rows * hw, 0.0);
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t r = 0; r < rows; ++r) {
            const double wgt = wv[co * rows + r];
            if (wgt == 0.0) continue;
            double* dst = gcols.data() + r * hw;
            const double* grow = g.data() + co * hw;
            for (std::size_t p = 0; p < hw; ++p) dst[p] += wgt * grow[p];
          }
        double* gx = need_x ? grad_of(*node.inputs[0]).data() : nullptr;
        double* goff = need_off ? grad_of(*node.inputs[1]).data() : nullptr;
        for (std::size_t n = 0; n < taps; ++n) {
          const long ky = static_cast<long>(n / k), kx = static_cast<long>(n % k);
          for (std::size_t p = 0; p < hw; ++p) {
            const long oy = static_cast<long>(p / w), ox = static_cast<long>(p % w);
            const double px = static_cast<double>(ox - pad + kx) + ov[(2 * n) * hw + p];
            const double py = static_cast<double>(oy - pad + ky) + ov[(2 * n + 1) * hw + p];
            if (!std::isfinite(px) || !std::isfinite(py)) continue;
            const BilinearTaps t = bilinear_taps(h, w, px, py);
            double gpx = 0.0, gpy = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double gc = gcols[(ch * taps + n) * hw + p];
              if (gc == 0.0) continue;
              for (int i = 0; i < 4; ++i) {
                if (t.index[i] < 0) continue;
                const std::size_t idx = ch * hw + static_cast<std::size_t>(t.index[i]);
                if (gx) gx[idx] += gc * t.weight[i];
                gpx += gc * t.d_dx[i] * xv[idx];
                gpy += gc * t.d_dy[i] * xv[idx];
              }
            }
            if (goff) {
              goff[(2 * n) * hw + p] += gpx;
              goff[(2 * n + 1) * hw + p] += gpy;
            }
          }
        }
      });
}

Tensor deformable_conv(const Tensor& f_t, const OffsetField& offsets, const DeformableLayer& layer) {
  return deformable_conv2d(f_t, offsets.value, layer.weight, layer.bias);
}

AfsmParams make_afsm_params(ParamStore& store, Initializer& init, const std::string& prefix,
                            std::size_t channels, std::size_t out_channels, std::size_t depth) {
  if (depth < 1) throw ParameterError("afsm: cascade depth must be >= 1");
  AfsmParams p;
  for (std::size_t i = 0; i < depth; ++i) {
    p.layers.push_back(
        make_deformable_layer(store, init, prefix + ".dconv" + std::to_string(i), channels, channels));
  }
  p.fuse_w = store.add(prefix + ".fuse.w", init.conv_weight(out_channels, 2 * channels, 3));
  p.fuse_b = store.add(prefix + ".fuse.b", zeros({out_channels}));
  return p;
}

AfsmOutput afsm_forward(const Tensor& f_t, const Tensor& f_rgb, const AfsmParams& params) {
  if (params.layers.empty()) throw ParameterError("afsm: cascade needs at least one layer");
  if (f_t.shape() != f_rgb.shape()) {
    throw DimensionError("afsm: thermal " + shape_str(f_t.shape()) + " vs rgb " +
                         shape_str(f_rgb.shape()));
  }
  AfsmOutput out;
  Tensor current = f_t;
  for (const auto& layer : params.layers) {
    OffsetField offsets = predict_offsets(current, f_rgb, layer);
    current = deformable_conv(current, offsets, layer);
    out.offsets.push_back(std::move(offsets));
  }
  out.sampled = current;
  out.fused = conv2d(concat({current, f_rgb}, 0), params.fuse_w, params.fuse_b, 1, 1);
  return out;
}

}  // namespace sacnet
