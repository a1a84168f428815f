#include "sacnet/acm.hpp"

#include <algorithm>
#include <cmath>

#include "sacnet/errors.hpp"

namespace sacnet {

std::vector<long> WindowPairGrid::small_positions(std::size_t k) const {
  const WindowOrigin o = small_windows.at(k);
  std::vector<long> out;
  out.reserve(small * small);
  for (long r = o.row; r < o.row + static_cast<long>(small); ++r) {
    if (r < 0 || r >= static_cast<long>(height)) continue;
    for (long c = o.col; c < o.col + static_cast<long>(small); ++c) {
      if (c < 0 || c >= static_cast<long>(width)) continue;
      out.push_back(r * static_cast<long>(width) + c);
    }
  }
  return out;
}

std::vector<long> WindowPairGrid::large_positions(std::size_t k) const {
  const WindowOrigin o = large_windows.at(k);
  std::vector<long> out;
  out.reserve(large * large);
  for (long r = o.row; r < o.row + static_cast<long>(large); ++r) {
    for (long c = o.col; c < o.col + static_cast<long>(large); ++c) {
      const bool inside =
          r >= 0 && r < static_cast<long>(height) && c >= 0 && c < static_cast<long>(width);
      out.push_back(inside ? r * static_cast<long>(width) + c : -1);
    }
  }
  return out;
}

WindowPairGrid build_window_grid(std::size_t height, std::size_t width, std::size_t small,
                                 std::size_t large) {
  if (small > large) {
    throw ParameterError("window grid: small window " + std::to_string(small) +
                         " exceeds large window " + std::to_string(large));
  }
  if (small < 1 || large > std::max(height, width)) {
    throw ParameterError("window grid: need 1 <= M <= N <= max(H, W), got M=" +
                         std::to_string(small) + " N=" + std::to_string(large) + " for " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  WindowPairGrid g;
  g.height = height;
  g.width = width;
  g.small = small;
  g.large = large;
  const std::size_t rows = (height + small - 1) / small;
  const std::size_t cols = (width + small - 1) / small;
  const long shift = static_cast<long>((large - small) / 2);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const WindowOrigin s{static_cast<long>(i * small), static_cast<long>(j * small)};
      g.small_windows.push_back(s);
      g.large_windows.push_back({s.row - shift, s.col - shift});
    }
  }
  return g;
}

// ---- correlation ----------------------------------------------------------

CorrelationParams make_correlation_params(ParamStore& store, Initializer& init,
                                          const std::string& prefix, std::size_t dim,
                                          std::size_t heads) {
  if (heads == 0 || dim % heads != 0) {
    throw ParameterError("correlation: " + std::to_string(dim) + " channels not divisible into " +
                         std::to_string(heads) + " heads");
  }
  CorrelationParams p;
  p.heads = heads;
  p.wq = store.add(prefix + ".wq", init.projection(dim, dim));
  p.bq = store.add(prefix + ".bq", zeros({dim}));
  p.wk = store.add(prefix + ".wk", init.projection(dim, dim));
  p.bk = store.add(prefix + ".bk", zeros({dim}));
  p.wv = store.add(prefix + ".wv", init.projection(dim, dim));
  p.bv = store.add(prefix + ".bv", zeros({dim}));
  return p;
}

Tensor correlation(const Tensor& q_src, const Tensor& kv_src, const CorrelationParams& params,
                   const CorrelationOptions& options) {
  const std::size_t d = params.dim();
  if (q_src.rank() != 2 || kv_src.rank() != 2 || q_src.dim(1) != d || kv_src.dim(1) != d) {
    throw DimensionError("correlation: d_k=" + std::to_string(d) + " but query tokens " +
                         shape_str(q_src.shape()) + ", key/value tokens " +
                         shape_str(kv_src.shape()));
  }
  const std::size_t heads = params.heads;
  const std::size_t dh = d / heads;
  const double logit_scale = options.logit_scale.value_or(1.0 / std::sqrt(static_cast<double>(dh)));

  const Tensor q = linear(q_src, params.wq, params.bq);
  const Tensor k = linear(kv_src, params.wk, params.bk);
  const Tensor v = linear(kv_src, params.wv, params.bv);

  std::vector<Tensor> outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? q : slice(q, 1, h * dh, (h + 1) * dh);
    const Tensor kh = heads == 1 ? k : slice(k, 1, h * dh, (h + 1) * dh);
    const Tensor vh = heads == 1 ? v : slice(v, 1, h * dh, (h + 1) * dh);
    const Tensor logits = scale(matmul(qh, transpose(kh)), logit_scale);
    outputs.push_back(matmul(softmax(logits, 1), vh));
  }
  const Tensor attended = heads == 1 ? outputs.front() : concat(outputs, 1);
  return add(attended, q_src);
}

// ---- semantic guidance ----------------------------------------------------

SemanticGuidanceParams make_semantic_guidance_params(ParamStore& store, Initializer& init,
                                                     const std::array<std::size_t, 4>& channels,
                                                     std::size_t heads) {
  SemanticGuidanceParams p;
  const std::size_t top = channels[3];
  p.global = make_correlation_params(store, init, "sgm.global", top, heads);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t level = i + 2;
    const std::size_t c = channels[level - 1];
    const std::string tag = "sgm.l" + std::to_string(level);
    p.rgb_w[i] = store.add(tag + ".rgb.w", init.conv_weight(c, top, 3, 1.0));
    p.rgb_b[i] = store.add(tag + ".rgb.b", ones({c}));
    p.t_w[i] = store.add(tag + ".t.w", init.conv_weight(c, top, 3, 1.0));
    p.t_b[i] = store.add(tag + ".t.b", ones({c}));
  }
  return p;
}

SemanticGuidance semantic_guidance(const FeatureMapSet& rgb, const FeatureMapSet& thermal,
                                   const SemanticGuidanceParams& params) {
  const Tensor& rgb4 = rgb.level(4);
  const Tensor& t4 = thermal.level(4);
  if (rgb4.shape() != t4.shape() || rgb4.rank() != 3) {
    throw DimensionError("semantic guidance: level-4 shapes differ: " + shape_str(rgb4.shape()) +
                         " vs " + shape_str(t4.shape()));
  }
  const std::size_t h4 = rgb4.dim(1), w4 = rgb4.dim(2), n4 = h4 * w4;

  SemanticGuidance out;
  out.cat4 = concat({map_to_tokens(rgb4), map_to_tokens(t4)}, 0);
  out.cat_global = correlation(out.cat4, out.cat4, params.global);
  out.rgb_global = tokens_to_map(slice(out.cat_global, 0, 0, n4), h4, w4);
  out.t_global = tokens_to_map(slice(out.cat_global, 0, n4, 2 * n4), h4, w4);

  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t level = i + 2;
    const std::size_t factor = std::size_t{1} << (4 - level);
    auto enhance = [&](const Tensor& global, const Tensor& w, const Tensor& b, const Tensor& f) {
      const Tensor up = factor == 1 ? global : upsample_bilinear(global, factor);
      const Tensor guide = conv2d(up, w, b, 1, 1);
      if (guide.shape() != f.shape()) {
        throw DimensionError("semantic guidance: level " + std::to_string(level) + " guide " +
                             shape_str(guide.shape()) + " vs feature " + shape_str(f.shape()));
      }
      return mul(guide, f);
    };
    out.rgb_enhanced[i] = enhance(out.rgb_global, params.rgb_w[i], params.rgb_b[i], rgb.level(level));
    out.t_enhanced[i] = enhance(out.t_global, params.t_w[i], params.t_b[i], thermal.level(level));
  }
  return out;
}

// ---- windowed cross-modal correlation ----------------------------------------

AcmParams make_acm_params(ParamStore& store, Initializer& init, const std::string& prefix,
                          std::size_t dim, std::size_t heads) {
  AcmParams p;
  p.rgb_queries = make_correlation_params(store, init, prefix + ".rgb_q", dim, heads);
  p.t_queries = make_correlation_params(store, init, prefix + ".t_q", dim, heads);
  return p;
}

AcmOutput acm_forward(const Tensor& f_rgb, const Tensor& f_t, const Tensor& enhanced_rgb,
                      const Tensor& enhanced_t, const WindowPairGrid& grid, const AcmParams& params) {
  const Shape& shape = f_rgb.shape();
  if (shape.size() != 3 || f_t.shape() != shape || enhanced_rgb.shape() != shape ||
      enhanced_t.shape() != shape) {
    throw DimensionError("acm: feature shapes differ: " + shape_str(shape) + ", " +
                         shape_str(f_t.shape()) + ", " + shape_str(enhanced_rgb.shape()) + ", " +
                         shape_str(enhanced_t.shape()));
  }
  if (grid.height != shape[1] || grid.width != shape[2]) {
    throw DimensionError("acm: grid built for " + std::to_string(grid.height) + "x" +
                         std::to_string(grid.width) + ", features are " + shape_str(shape));
  }
  std::vector<Tensor> rgb_out, t_out;
  std::vector<long> order;
  for (std::size_t k = 0; k < grid.count(); ++k) {
    const std::vector<long> small = grid.small_positions(k);
    const std::vector<long> large = grid.large_positions(k);
    const Tensor s_rgb = gather_tokens(f_rgb, small);
    const Tensor s_t = gather_tokens(f_t, small);
    const Tensor l_rgb = gather_tokens(enhanced_rgb, large);
    const Tensor l_t = gather_tokens(enhanced_t, large);
    rgb_out.push_back(correlation(s_rgb, l_t, params.rgb_queries));
    t_out.push_back(correlation(s_t, l_rgb, params.t_queries));
    order.insert(order.end(), small.begin(), small.end());
  }
  AcmOutput out;
  out.rgb = scatter_tokens(concat(rgb_out, 0), order, shape[1], shape[2]);
  out.thermal = scatter_tokens(concat(t_out, 0), order, shape[1], shape[2]);
  return out;
}

}  // namespace sacnet
