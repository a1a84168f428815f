#include "suites.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "sacnet/acm.hpp"
#include "sacnet/afsm.hpp"
#include "sacnet/datagen.hpp"
#include "sacnet/errors.hpp"
#include "sacnet/losses.hpp"
#include "sacnet/network.hpp"

namespace sacnet::tools {

namespace {

class Fixture {
 public:
  explicit Fixture(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = d(rng_);
    return Tensor(std::move(shape), std::move(v));
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Weighted sum with fixed, index-dependent weights so every output entry
// contributes a distinct amount to the scalar.
Tensor probe(const Tensor& y) {
  std::vector<double> w(y.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + std::sin(1.7 * static_cast<double>(i) + 0.3);
  return sum(mul(y, Tensor(y.shape(), std::move(w))));
}

struct Runner {
  double tol;
  std::uint64_t seed;
  std::vector<SuiteCase> cases;

  void check(const std::string& name, const ScalarFn& f, std::vector<Tensor> inputs,
             std::size_t max_entries = 0, double eps = 1e-5) {
    GradCheckOptions opt;
    opt.tol = tol;
    opt.eps = eps;
    opt.max_entries = max_entries;
    opt.seed = seed;
    cases.push_back({name, grad_check(f, std::move(inputs), opt)});
  }
};

void ops_suite(Runner& r, Fixture& fx) {
  using V = const std::vector<Tensor>&;
  r.check("add", [](V in) { return probe(add(in[0], in[1])); }, {fx.uniform({3, 4}), fx.uniform({3, 4})});
  r.check("add_broadcast", [](V in) { return probe(add(in[0], in[1])); }, {fx.uniform({3, 4}), fx.uniform({1})});
  r.check("sub", [](V in) { return probe(sub(in[0], in[1])); }, {fx.uniform({3, 4}), fx.uniform({3, 4})});
  r.check("mul", [](V in) { return probe(mul(in[0], in[1])); }, {fx.uniform({3, 4}), fx.uniform({3, 4})});
  r.check("scale", [](V in) { return probe(scale(in[0], -1.5)); }, {fx.uniform({5})});
  r.check("add_scalar", [](V in) { return probe(add_scalar(in[0], 0.25)); }, {fx.uniform({5})});
  r.check("square", [](V in) { return probe(square(in[0])); }, {fx.uniform({6})});
  r.check("sqrt", [](V in) { return probe(sqrt(in[0])); }, {fx.uniform({6}, 0.2, 2.0)});
  r.check("exp", [](V in) { return probe(exp(in[0])); }, {fx.uniform({6})});
  r.check("log", [](V in) { return probe(log(in[0])); }, {fx.uniform({6}, 0.2, 2.0)});
  r.check("sigmoid", [](V in) { return probe(sigmoid(in[0])); }, {fx.uniform({6}, -3, 3)});
  r.check("silu", [](V in) { return probe(silu(in[0])); }, {fx.uniform({6}, -3, 3)});
  r.check("clamp", [](V in) { return probe(clamp(in[0], -0.5, 0.5)); },
          {Tensor({6}, {-0.9, -0.3, -0.1, 0.2, 0.4, 0.8})});
  r.check("sum", [](V in) { return sum(in[0]); }, {fx.uniform({2, 3})});
  r.check("mean", [](V in) { return mean(in[0]); }, {fx.uniform({2, 3})});
  r.check("reshape", [](V in) { return probe(reshape(in[0], {3, 2})); }, {fx.uniform({2, 3})});
  r.check("flatten", [](V in) { return probe(flatten(in[0])); }, {fx.uniform({2, 3, 2})});
  r.check("transpose", [](V in) { return probe(transpose(in[0])); }, {fx.uniform({2, 3})});
  r.check("concat", [](V in) { return probe(concat({in[0], in[1]}, 1)); }, {fx.uniform({2, 3, 2}), fx.uniform({2, 1, 2})});
  r.check("slice", [](V in) { return probe(slice(in[0], 1, 1, 3)); }, {fx.uniform({2, 4, 2})});
  r.check("matmul", [](V in) { return probe(matmul(in[0], in[1])); }, {fx.uniform({3, 4}), fx.uniform({4, 2})});
  r.check("linear", [](V in) { return probe(linear(in[0], in[1], in[2])); },
          {fx.uniform({3, 4}), fx.uniform({4, 2}), fx.uniform({2})});
  r.check("softmax", [](V in) { return probe(softmax(in[0], 1)); }, {fx.uniform({3, 5}, -2, 2)});
  r.check("conv2d_3x3", [](V in) { return probe(conv2d(in[0], in[1], in[2], 1, 1)); },
          {fx.uniform({2, 5, 6}), fx.uniform({3, 2, 3, 3}), fx.uniform({3})});
  r.check("conv2d_stride2", [](V in) { return probe(conv2d(in[0], in[1], in[2], 2, 1)); },
          {fx.uniform({2, 7, 6}), fx.uniform({2, 2, 3, 3}), fx.uniform({2})});
  r.check("conv2d_stride4", [](V in) { return probe(conv2d(in[0], in[1], Tensor(), 4, 1)); },
          {fx.uniform({3, 8, 8}), fx.uniform({2, 3, 3, 3})});
  r.check("conv2d_1x1", [](V in) { return probe(conv2d(in[0], in[1], in[2], 1, 0)); },
          {fx.uniform({3, 4, 4}), fx.uniform({2, 3, 1, 1}), fx.uniform({2})});
  r.check("upsample_x2", [](V in) { return probe(upsample_bilinear(in[0], 2)); }, {fx.uniform({2, 3, 4})});
  r.check("upsample_x4", [](V in) { return probe(upsample_bilinear(in[0], 4)); }, {fx.uniform({1, 2, 3})});
  r.check("bilinear_sample", [](V in) { return probe(bilinear_sample(in[0], in[1], in[2])); },
          {fx.uniform({2, 4, 5}), Tensor({1}, {1.37}), Tensor({1}, {2.61})});
  r.check("bilinear_sample_border", [](V in) { return probe(bilinear_sample(in[0], in[1], in[2])); },
          {fx.uniform({2, 4, 5}), Tensor({1}, {-0.4}), Tensor({1}, {3.3})});
  const std::vector<long> pos{5, -1, 0, 7, 3};
  r.check("gather_tokens", [pos](V in) { return probe(gather_tokens(in[0], pos)); }, {fx.uniform({3, 2, 4})});
  const std::vector<long> dst{6, 1, 0, 3};
  r.check("scatter_tokens", [dst](V in) { return probe(scatter_tokens(in[0], dst, 2, 4)); }, {fx.uniform({4, 3})});
  r.check("map_to_tokens", [](V in) { return probe(map_to_tokens(in[0])); }, {fx.uniform({3, 2, 3})});
  r.check("tokens_to_map", [](V in) { return probe(tokens_to_map(in[0], 2, 3)); }, {fx.uniform({6, 3})});
  // Offsets kept off the integer lattice, where bilinear reads are differentiable.
  Tensor off = fx.uniform({18, 4, 5}, 0.15, 0.85);
  r.check("deformable_conv2d", [](V in) { return probe(deformable_conv2d(in[0], in[1], in[2], in[3])); },
          {fx.uniform({2, 4, 5}), off, fx.uniform({3, 2, 3, 3}), fx.uniform({3})});
}

CorrelationParams random_correlation(Fixture& fx, std::size_t dim, std::size_t heads) {
  CorrelationParams p;
  p.wq = fx.uniform({dim, dim}, -0.6, 0.6);
  p.bq = fx.uniform({dim}, -0.2, 0.2);
  p.wk = fx.uniform({dim, dim}, -0.6, 0.6);
  p.bk = fx.uniform({dim}, -0.2, 0.2);
  p.wv = fx.uniform({dim, dim}, -0.6, 0.6);
  p.bv = fx.uniform({dim}, -0.2, 0.2);
  p.heads = heads;
  return p;
}

std::vector<Tensor> correlation_tensors(const CorrelationParams& p) { return {p.wq, p.bq, p.wk, p.bk, p.wv, p.bv}; }

CorrelationParams correlation_from(const std::vector<Tensor>& in, std::size_t at, std::size_t heads) {
  CorrelationParams p;
  p.wq = in[at];
  p.bq = in[at + 1];
  p.wk = in[at + 2];
  p.bk = in[at + 3];
  p.wv = in[at + 4];
  p.bv = in[at + 5];
  p.heads = heads;
  return p;
}

void acm_suite(Runner& r, Fixture& fx) {
  using V = const std::vector<Tensor>&;
  for (std::size_t heads : {1, 2}) {
    auto p = random_correlation(fx, 4, heads);
    std::vector<Tensor> in{fx.uniform({3, 4}), fx.uniform({5, 4})};
    for (auto& t : correlation_tensors(p)) in.push_back(t);
    r.check("correlation_heads" + std::to_string(heads),
            [heads](V v) { return probe(correlation(v[0], v[1], correlation_from(v, 2, heads))); }, in);
  }
  {
    const std::array<std::size_t, 4> ch{2, 3, 3, 4};
    FeatureMapSet rgb, th;
    std::vector<Tensor> in;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t side = std::size_t(16) >> i;
      in.push_back(fx.uniform({ch[i], side, side}));
      in.push_back(fx.uniform({ch[i], side, side}));
    }
    auto gp = random_correlation(fx, ch[3], 1);
    for (auto& t : correlation_tensors(gp)) in.push_back(t);
    for (std::size_t i = 0; i < 3; ++i) {
      in.push_back(fx.uniform({ch[i + 1], ch[3], 3, 3}, -0.4, 0.4));
      in.push_back(fx.uniform({ch[i + 1]}, 0.5, 1.5));
      in.push_back(fx.uniform({ch[i + 1], ch[3], 3, 3}, -0.4, 0.4));
      in.push_back(fx.uniform({ch[i + 1]}, 0.5, 1.5));
    }
    r.check("semantic_guidance",
            [](V v) {
              FeatureMapSet a, b;
              for (std::size_t i = 0; i < 4; ++i) {
                a.levels[i] = v[2 * i];
                b.levels[i] = v[2 * i + 1];
              }
              SemanticGuidanceParams p;
              p.global = correlation_from(v, 8, 1);
              for (std::size_t i = 0; i < 3; ++i) {
                p.rgb_w[i] = v[14 + 4 * i];
                p.rgb_b[i] = v[15 + 4 * i];
                p.t_w[i] = v[16 + 4 * i];
                p.t_b[i] = v[17 + 4 * i];
              }
              const SemanticGuidance g = semantic_guidance(a, b, p);
              Tensor acc = probe(g.cat_global);
              for (std::size_t i = 0; i < 3; ++i) acc = add(acc, add(probe(g.rgb_enhanced[i]), probe(g.t_enhanced[i])));
              // Many summed outputs: keep the scalar small so round-off in the
              // difference quotient stays below the comparison floor.
              return scale(acc, 0.01);
            },
            in);
  }
  {
    const std::size_t c = 3;
    const WindowPairGrid grid = build_window_grid(4, 6, 2, 4);
    std::vector<Tensor> in{fx.uniform({c, 4, 6}), fx.uniform({c, 4, 6}), fx.uniform({c, 4, 6}), fx.uniform({c, 4, 6})};
    for (auto& t : correlation_tensors(random_correlation(fx, c, 1))) in.push_back(t);
    for (auto& t : correlation_tensors(random_correlation(fx, c, 1))) in.push_back(t);
    r.check("acm_forward",
            [grid](V v) {
              AcmParams p{correlation_from(v, 4, 1), correlation_from(v, 10, 1)};
              const AcmOutput o = acm_forward(v[0], v[1], v[2], v[3], grid, p);
              return add(probe(o.rgb), probe(o.thermal));
            },
            in);
  }
}

void afsm_suite(Runner& r, Fixture& fx) {
  using V = const std::vector<Tensor>&;
  const std::size_t c = 2, depth = 2, cout = 3;
  std::vector<Tensor> in{fx.uniform({c, 5, 5}), fx.uniform({c, 5, 5})};
  for (std::size_t l = 0; l < depth; ++l) {
    // Small offset weights around a fractional bias keep samples off the lattice.
    in.push_back(fx.uniform({2 * kDeformTaps, 2 * c, 3, 3}, -0.01, 0.01));
    in.push_back(fx.uniform({2 * kDeformTaps}, 0.3, 0.7));
    in.push_back(fx.uniform({c, c, 3, 3}, -0.5, 0.5));
    in.push_back(fx.uniform({c}, -0.1, 0.1));
  }
  in.push_back(fx.uniform({cout, 2 * c, 3, 3}, -0.5, 0.5));
  in.push_back(fx.uniform({cout}, -0.1, 0.1));
  r.check("afsm_forward",
          [depth](V v) {
            AfsmParams p;
            for (std::size_t l = 0; l < depth; ++l)
              p.layers.push_back({v[2 + 4 * l], v[3 + 4 * l], v[4 + 4 * l], v[5 + 4 * l]});
            p.fuse_w = v[2 + 4 * depth];
            p.fuse_b = v[3 + 4 * depth];
            return probe(afsm_forward(v[0], v[1], p).fused);
          },
          in);
}

Tensor binary_mask(Fixture& fx, Shape shape) {
  Tensor t = fx.uniform(std::move(shape), 0.0, 1.0);
  for (double& v : t.mutable_data()) v = v < 0.4 ? 1.0 : 0.0;
  return t;
}

void losses_suite(Runner& r, Fixture& fx) {
  using V = const std::vector<Tensor>&;
  const Tensor g = binary_mask(fx, {1, 6, 7});
  r.check("bce_loss", [g](V v) { return bce_loss(v[0], g); }, {fx.uniform({1, 6, 7}, 0.05, 0.95)});
  r.check("smoothness_loss", [g](V v) { return smoothness_loss(v[0], g, 10.0); }, {fx.uniform({1, 6, 7}, 0.05, 0.95)});
  r.check("dice_loss", [g](V v) { return dice_loss(v[0], g, 1e-6); }, {fx.uniform({1, 6, 7}, 0.05, 0.95)});
  r.check("total_loss", [g](V v) { return total_loss(v[0], g).total; }, {fx.uniform({1, 6, 7}, 0.05, 0.95)});
}

void model_suite(Runner& r, Fixture& fx, std::size_t entries) {
  SACNetConfig cfg;
  cfg.input_size = 64;
  cfg.seed = r.seed;
  auto net = std::make_shared<SACNet>(cfg);
  // Zero-initialized offset predictors sample exactly on the pixel lattice,
  // where bilinear reads have a kink; move them to fractional positions.
  std::vector<Tensor> params;
  for (const auto& [name, p] : net->params().entries()) {
    if (name.ends_with(".offset.b")) {
      auto d = fx.uniform(p.shape(), 0.3, 0.7);
      std::copy(d.data().begin(), d.data().end(), Tensor(p).mutable_data().begin());
    } else if (name.ends_with(".offset.w")) {
      auto d = fx.uniform(p.shape(), -1e-3, 1e-3);
      std::copy(d.data().begin(), d.data().end(), Tensor(p).mutable_data().begin());
    }
    params.push_back(p);
  }
  SceneConfig sc;
  sc.size = 64;
  const SyntheticPair pair = gen_unaligned_pair(r.seed + 1, sc, AffineRanges{});
  r.check("model_64x64",
          [net, pair](const std::vector<Tensor>&) {
            return total_loss(net->forward(pair.rgb, pair.thermal), pair.gt).total;
          },
          params, entries);
}

}  // namespace

const std::vector<std::string>& gradcheck_modules() {
  static const std::vector<std::string> names{"ops", "acm", "afsm", "losses", "model"};
  return names;
}

std::vector<SuiteCase> run_gradcheck_module(const std::string& module, double tol, std::uint64_t seed,
                                            std::size_t model_entries) {
  Runner r{tol, seed, {}};
  Fixture fx(seed * 7919 + 17);
  if (module == "ops") ops_suite(r, fx);
  else if (module == "acm") acm_suite(r, fx);
  else if (module == "afsm") afsm_suite(r, fx);
  else if (module == "losses") losses_suite(r, fx);
  else if (module == "model") model_suite(r, fx, model_entries);
  else throw ParameterError("unknown gradcheck module '" + module + "' (ops|acm|afsm|losses|model)");
  return r.cases;
}

}  // namespace sacnet::tools
