#include "sacnet/losses.hpp"

#include <cmath>

#include "sacnet/errors.hpp"

namespace sacnet {

void LossConfig::validate() const {
  if (bce_weight < 0 || smooth_weight < 0 || dice_weight < 0)
    throw ParameterError("loss weights must be non-negative");
  if (!(dice_eps > 0)) throw ParameterError("dice epsilon must be positive");
  if (smooth_lambda < 0) throw ParameterError("smoothness lambda must be non-negative");
}

namespace {
void check_pair(const Tensor& s, const Tensor& g, const char* who) {
  if (s.shape() != g.shape()) {
    throw DimensionError(std::string(who) + ": prediction " + shape_str(s.shape()) +
                         " vs ground truth " + shape_str(g.shape()));
  }
}

// exp(−λ|Δ|) of the ground-truth forward difference along `axis`; a constant.
Tensor edge_gate(const Tensor& g, std::size_t axis, double lambda) {
  const Tensor d = sub(slice(g, axis, 1, g.dim(axis)), slice(g, axis, 0, g.dim(axis) - 1));
  std::vector<double> out(d.numel());
  const auto dd = d.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(-lambda * std::abs(dd[i]));
  return Tensor(d.shape(), std::move(out));
}
}  // namespace

Tensor bce_loss(const Tensor& s, const Tensor& g) {
  check_pair(s, g, "bce_loss");
  const Tensor p = clamp(s, kBceClamp, 1.0 - kBceClamp);
  const Tensor gd = g.detach();
  const Tensor one_minus_g = add_scalar(scale(gd, -1.0), 1.0);
  const Tensor pos = mul(gd, log(p));
  const Tensor neg = mul(one_minus_g, log(add_scalar(scale(p, -1.0), 1.0)));
  return scale(mean(add(pos, neg)), -1.0);
}

Tensor smoothness_loss(const Tensor& s, const Tensor& g, double lambda) {
  check_pair(s, g, "smoothness_loss");
  if (s.rank() < 2) throw DimensionError("smoothness_loss: needs at least two spatial axes");
  const Tensor gd = g.detach();
  Tensor total;
  for (std::size_t axis : {s.rank() - 1, s.rank() - 2}) {
    if (s.dim(axis) < 2) continue;
    const Tensor ds = sub(slice(s, axis, 1, s.dim(axis)), slice(s, axis, 0, s.dim(axis) - 1));
    const Tensor psi = sqrt(add_scalar(square(ds), kCharbonnierEps));
    const Tensor term = mean(mul(psi, edge_gate(gd, axis, lambda)));
    total = total.defined() ? add(total, term) : term;
  }
  if (!total.defined()) return Tensor::scalar(0.0);
  return scale(total, 0.5);
}

Tensor dice_loss(const Tensor& s, const Tensor& g, double eps) {
  check_pair(s, g, "dice_loss");
  const Tensor inter = add_scalar(scale(sum(mul(s, g)), 2.0), eps);
  const Tensor denom = add_scalar(add(sum(s), sum(g)), eps);
  // 1 − a/b written as (b − a)/b keeps the op set small.
  return mul(sub(denom, inter), exp(scale(log(denom), -1.0)));
}

LossBreakdown total_loss(const Tensor& s, const Tensor& g, const LossConfig& cfg) {
  cfg.validate();
  LossBreakdown out;
  out.bce = bce_loss(s, g);
  out.smooth = smoothness_loss(s, g, cfg.smooth_lambda);
  out.dice = dice_loss(s, g, cfg.dice_eps);
  out.total = add(add(scale(out.bce, cfg.bce_weight), scale(out.smooth, cfg.smooth_weight)),
                  scale(out.dice, cfg.dice_weight));
  return out;
}

LossBreakdown sacnet_backward(Tape& tape, const Tensor& s, const Tensor& g, ParamStore& params,
                              const LossConfig& cfg) {
  LossBreakdown loss = total_loss(s, g, cfg);
  if (!std::isfinite(loss.total.item())) throw NumericError("loss is not finite");
  tape.backward(loss.total);
  for (const auto& [name, p] : params.entries()) {
    if (!p.has_grad()) throw NumericError("parameter " + name + " received no gradient");
    for (double v : p.grad())
      if (!std::isfinite(v)) throw NumericError("parameter " + name + " has a non-finite gradient");
  }
  return loss;
}

void adamw_step(const std::vector<Tensor>& params, OptimizerState& st) {
  if (!(st.lr > 0)) throw ParameterError("adamw: learning rate must be positive");
  if (st.m.empty()) {
    st.m.resize(params.size());
    st.v.resize(params.size());
  }
  if (st.m.size() != params.size()) throw ParameterError("adamw: parameter count changed");
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    auto& m = st.m[k];
    auto& v = st.v[k];
    if (m.empty()) {
      m.assign(p.numel(), 0.0);
      v.assign(p.numel(), 0.0);
    }
    if (m.size() != p.numel()) throw DimensionError("adamw: moment shape mismatch");
    const bool has = p.has_grad();
    const auto g = has ? p.grad() : std::span<const double>{};
    auto x = p.mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gi = has ? g[i] : 0.0;
      x[i] *= 1.0 - st.lr * st.weight_decay;
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * gi;
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      x[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

void adamw_step(ParamStore& params, OptimizerState& state) {
  std::vector<Tensor> list;
  list.reserve(params.size());
  for (const auto& [name, p] : params.entries()) list.push_back(p);
  adamw_step(list, state);
}

}  // namespace sacnet
