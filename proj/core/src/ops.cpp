// Elementwise, reduction, shape and linear-algebra primitives.

#include <algorithm>
#include <cmath>
#include <limits>

#include "sacnet/autograd.hpp"
#include "sacnet/errors.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet {

using autograd::grad_of;
using autograd::make_result;
using autograd::wants_grad;

namespace {

enum class BinaryKind { kSame, kScalarA, kScalarB };

BinaryKind binary_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return BinaryKind::kSame;
  if (b.numel() == 1) return BinaryKind::kScalarB;
  if (a.numel() == 1) return BinaryKind::kScalarA;
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
}

// Accumulates g into the gradient of `in`, summing when `in` was broadcast.
void accumulate(const detail::ImplPtr& in, std::span<const double> g, bool broadcast,
                double factor = 1.0) {
  if (!wants_grad(in)) return;
  auto& gi = grad_of(*in);
  if (broadcast) {
    double total = 0.0;
    for (double v : g) total += v;
    gi[0] += factor * total;
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += factor * g[i];
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](const TapeNode& n) {
    const auto& in = n.inputs[0];
    if (!wants_grad(in)) return;
    auto& gi = grad_of(*in);
    const auto& g = n.output->grad;
    const auto& xv = in->data;
    const auto& yv = n.output->data;
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const auto kind = binary_kind(a, b, "add");
  const Tensor& big = kind == BinaryKind::kScalarA ? b : a;
  std::vector<double> out(big.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = ad[kind == BinaryKind::kScalarA ? 0 : i] + bd[kind == BinaryKind::kScalarB ? 0 : i];
  }
  return make_result(big.shape(), std::move(out), {a, b}, [kind](const TapeNode& n) {
    accumulate(n.inputs[0], n.output->grad, kind == BinaryKind::kScalarA);
    accumulate(n.inputs[1], n.output->grad, kind == BinaryKind::kScalarB);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const auto kind = binary_kind(a, b, "sub");
  const Tensor& big = kind == BinaryKind::kScalarA ? b : a;
  std::vector<double> out(big.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = ad[kind == BinaryKind::kScalarA ? 0 : i] - bd[kind == BinaryKind::kScalarB ? 0 : i];
  }
  return make_result(big.shape(), std::move(out), {a, b}, [kind](const TapeNode& n) {
    accumulate(n.inputs[0], n.output->grad, kind == BinaryKind::kScalarA);
    accumulate(n.inputs[1], n.output->grad, kind == BinaryKind::kScalarB, -1.0);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto kind = binary_kind(a, b, "mul");
  const Tensor& big = kind == BinaryKind::kScalarA ? b : a;
  std::vector<double> out(big.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = ad[kind == BinaryKind::kScalarA ? 0 : i] * bd[kind == BinaryKind::kScalarB ? 0 : i];
  }
  return make_result(big.shape(), std::move(out), {a, b}, [kind](const TapeNode& n) {
    const auto& g = n.output->grad;
    const auto& av = n.inputs[0]->data;
    const auto& bv = n.inputs[1]->data;
    const bool sa = kind == BinaryKind::kScalarA;
    const bool sb = kind == BinaryKind::kScalarB;
    if (wants_grad(n.inputs[0])) {
      auto& ga = grad_of(*n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[sa ? 0 : i] += g[i] * bv[sb ? 0 : i];
    }
    if (wants_grad(n.inputs[1])) {
      auto& gb = grad_of(*n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[sb ? 0 : i] += g[i] * av[sa ? 0 : i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v < lo || v > hi) ? 0.0 : 1.0; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result(Shape{}, {total}, {x}, [](const TapeNode& n) {
    if (!wants_grad(n.inputs[0])) return;
    auto& gi = grad_of(*n.inputs[0]);
    const double g = n.output->grad[0];
    for (auto& v : gi) v += g;
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

// ---- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                         ": element count differs");
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](const TapeNode& n) {
    accumulate(n.inputs[0], n.output->grad, false);
  });
}

Tensor flatten(const Tensor& x) { return reshape(x, {x.numel()}); }

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose expects rank 2, got " + shape_str(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  const auto xd = x.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xd[i * c + j];
  return make_result({c, r}, std::move(out), {x}, [r, c](const TapeNode& n) {
    if (!wants_grad(n.inputs[0])) return;
    auto& gi = grad_of(*n.inputs[0]);
    const auto& g = n.output->grad;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gi[i * c + j] += g[j * r + i];
  });
}

namespace {
struct AxisSplit {
  std::size_t outer = 1, axis = 1, inner = 1;
};
AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.axis = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}
}  // namespace

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of an empty list");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw DimensionError("concat axis " + std::to_string(axis) + " out of range for " +
                         shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: incompatible shapes " + shape_str(first) + " and " +
                           shape_str(s) + " on axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit total = split_axis(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(axis) * total.inner;
    const auto pd = p.data();
    for (std::size_t o = 0; o < total.outer; ++o) {
      std::copy_n(pd.begin() + o * w, w, out.begin() + o * total.axis * total.inner + offset);
    }
    widths.push_back(w);
    offset += w;
  }
  return make_result(out_shape, std::move(out), parts, [total, widths](const TapeNode& n) {
    const auto& g = n.output->grad;
    std::size_t off = 0;
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::size_t w = widths[k];
      if (wants_grad(n.inputs[k])) {
        auto& gi = grad_of(*n.inputs[k]);
        for (std::size_t o = 0; o < total.outer; ++o) {
          const double* src = g.data() + o * total.axis * total.inner + off;
          double* dst = gi.data() + o * w;
          for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
        }
      }
      off += w;
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& shape = x.shape();
  if (axis >= shape.size() || begin > end || end > shape[axis]) {
    throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") on axis " + std::to_string(axis) + " of " + shape_str(shape));
  }
  const AxisSplit s = split_axis(shape, axis);
  Shape out_shape = shape;
  out_shape[axis] = end - begin;
  const std::size_t w = (end - begin) * s.inner;
  const std::size_t off = begin * s.inner;
  const auto xd = x.data();
  std::vector<double> out(s.outer * w);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xd.begin() + o * s.axis * s.inner + off, w, out.begin() + o * w);
  }
  return make_result(out_shape, std::move(out), {x}, [s, w, off](const TapeNode& n) {
    if (!wants_grad(n.inputs[0])) return;
    auto& gi = grad_of(*n.inputs[0]);
    const auto& g = n.output->grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = gi.data() + o * s.axis * s.inner + off;
      for (std::size_t i = 0; i < w; ++i) dst[i] += g[o * w + i];
    }
  });
}

// ---- linear algebra -------------------------------------------------------

namespace {
// c[m×n] += a[m×k] · b[k×n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}
// c[m×k] += g[m×n] · bᵀ   (b is k×n)
void gemm_acc_bt(const double* g, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
      c[i * k + p] += acc;
    }
}
// c[k×n] += aᵀ · g   (a is m×k, g is m×n)
void gemm_acc_at(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      const double* grow = g + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](const TapeNode& node) {
    const auto& g = node.output->grad;
    if (wants_grad(node.inputs[0])) {
      gemm_acc_bt(g.data(), node.inputs[1]->data.data(), grad_of(*node.inputs[0]).data(), m, k, n);
    }
    if (wants_grad(node.inputs[1])) {
      gemm_acc_at(node.inputs[0]->data.data(), g.data(), grad_of(*node.inputs[1]).data(), m, k, n);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
    throw DimensionError("linear: incompatible shapes " + shape_str(x.shape()) + " and " +
                         shape_str(w.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (b.defined() && (b.rank() != 1 || b.dim(0) != n)) {
    throw DimensionError("linear: bias shape " + shape_str(b.shape()) + " for output width " +
                         std::to_string(n));
  }
  std::vector<double> out(m * n, 0.0);
  if (b.defined()) {
    const auto bd = b.data();
    for (std::size_t i = 0; i < m; ++i) std::copy(bd.begin(), bd.end(), out.begin() + i * n);
  }
  gemm_acc(x.data().data(), w.data().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {x, w, b}, [m, k, n](const TapeNode& node) {
    const auto& g = node.output->grad;
    if (wants_grad(node.inputs[0])) {
      gemm_acc_bt(g.data(), node.inputs[1]->data.data(), grad_of(*node.inputs[0]).data(), m, k, n);
    }
    if (wants_grad(node.inputs[1])) {
      gemm_acc_at(node.inputs[0]->data.data(), g.data(), grad_of(*node.inputs[1]).data(), m, k, n);
    }
    if (wants_grad(node.inputs[2])) {
      auto& gb = grad_of(*node.inputs[2]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.axis * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      bool nan = false;
      for (std::size_t a = 0; a < s.axis; ++a) {
        const double v = xd[base + a * s.inner];
        nan = nan || std::isnan(v);
        mx = std::max(mx, v);
      }
      if (nan) {
        for (std::size_t a = 0; a < s.axis; ++a)
          out[base + a * s.inner] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double total = 0.0;
      for (std::size_t a = 0; a < s.axis; ++a) {
        const double e = std::exp(xd[base + a * s.inner] - mx);
        out[base + a * s.inner] = e;
        total += e;
      }
      for (std::size_t a = 0; a < s.axis; ++a) out[base + a * s.inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [s](const TapeNode& n) {
    if (!wants_grad(n.inputs[0])) return;
    auto& gi = grad_of(*n.inputs[0]);
    const auto& g = n.output->grad;
    const auto& y = n.output->data;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.axis * s.inner + in;
        double dot = 0.0;
        for (std::size_t a = 0; a < s.axis; ++a) {
          const std::size_t i = base + a * s.inner;
          dot += g[i] * y[i];
        }
        for (std::size_t a = 0; a < s.axis; ++a) {
          const std::size_t i = base + a * s.inner;
          gi[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

}  // namespace sacnet
