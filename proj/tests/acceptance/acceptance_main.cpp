// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails. Usage: sacnet_acceptance [work-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "oracles.hpp"
#include "sacnet/acm.hpp"
#include "sacnet/afsm.hpp"
#include "sacnet/datagen.hpp"
#include "sacnet/image_io.hpp"
#include "sacnet/metrics.hpp"
#include "sacnet/network.hpp"
#include "suites.hpp"
#include "toy.hpp"

namespace fs = std::filesystem;
using namespace sacnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "  failed: " << what << "\n";
    }
  }
};

void report(int id, const std::string& title, const Outcome& o) {
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " " << title << "\n";
  const std::string d = o.detail.str();
  if (!d.empty()) std::cout << d;
  std::cout.flush();
}

double max_abs_diff(const std::vector<double>& a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor tensor_of(const std::vector<double>& v, Shape s) { return Tensor(std::move(s), v); }

// ---- 1 --------------------------------------------------------------------

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  for (const auto& m : tools::gradcheck_modules()) {
    const bool model = m == "model";
    const auto cases = tools::run_gradcheck_module(m, model ? 1e-3 : 1e-4, 7, 256);
    double worst = 0.0;
    for (const auto& c : cases) {
      worst = std::max(worst, c.report.max_rel_error);
      o.require(c.report.passed, m + "/" + c.name + " " + c.report.summary());
      if (model) o.require(c.report.checked >= 200, "model check sampled fewer than 200 entries");
    }
    o.detail << "  " << m << ": " << cases.size() << " cases, max rel err " << worst << "\n";
  }
  const double secs = seconds_since(t0);
  o.detail << "  runtime " << secs << " s\n";
  o.require(secs < 120.0, "gradient suite took longer than 2 minutes");
  return o;
}

// ---- 2 --------------------------------------------------------------------

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(2024);
  const int instances = 25;
  double conv_err = 0, corr_err = 0, deform_zero_err = 0, deform_err = 0;
  double m_mae = 0, m_s = 0, m_e = 0, m_f = 0, m_pr = 0;

  for (int it = 0; it < instances; ++it) {
    // conv2d
    {
      const std::size_t cin = 1 + rng() % 3, cout = 1 + rng() % 3, h = 4 + rng() % 5, w = 4 + rng() % 5;
      const std::size_t k = (rng() % 2) ? 3 : 1, stride = 1 + rng() % 2, pad = k == 3 ? rng() % 2 : 0;
      const auto x = oracle::random_values(rng, cin * h * w);
      const auto wt = oracle::random_values(rng, cout * cin * k * k);
      const auto b = oracle::random_values(rng, cout);
      const Tensor y = conv2d(tensor_of(x, {cin, h, w}), tensor_of(wt, {cout, cin, k, k}), tensor_of(b, {cout}),
                              stride, pad);
      const auto ref = oracle::flatten(oracle::conv2d(oracle::to_maps(x, cin, h, w), wt, cout, k, b, stride, pad));
      conv_err = std::max(conv_err, max_abs_diff(ref, y.data()));
    }
    // correlation
    {
      const std::size_t heads = 1 + rng() % 2, d = heads * (1 + rng() % 3), n = 1 + rng() % 5, m = 1 + rng() % 9;
      const auto q = oracle::random_values(rng, n * d), kv = oracle::random_values(rng, m * d);
      oracle::AttentionWeights aw{oracle::random_values(rng, d * d), oracle::random_values(rng, d),
                                  oracle::random_values(rng, d * d), oracle::random_values(rng, d),
                                  oracle::random_values(rng, d * d), oracle::random_values(rng, d)};
      CorrelationParams p{tensor_of(aw.wq, {d, d}), tensor_of(aw.bq, {d}), tensor_of(aw.wk, {d, d}),
                          tensor_of(aw.bk, {d}),    tensor_of(aw.wv, {d, d}), tensor_of(aw.bv, {d}), heads};
      const Tensor y = correlation(tensor_of(q, {n, d}), tensor_of(kv, {m, d}), p);
      const auto ref = oracle::correlation(oracle::to_grid(q, n, d), oracle::to_grid(kv, m, d), aw, heads);
      std::vector<double> flat;
      for (const auto& row : ref) flat.insert(flat.end(), row.begin(), row.end());
      corr_err = std::max(corr_err, max_abs_diff(flat, y.data()));
    }
    // deformable conv: zero offsets against a plain conv, random offsets against a direct sum
    {
      const std::size_t cin = 1 + rng() % 3, cout = 1 + rng() % 3, h = 3 + rng() % 5, w = 3 + rng() % 5;
      const auto x = oracle::random_values(rng, cin * h * w);
      const auto wt = oracle::random_values(rng, cout * cin * 9);
      const auto b = oracle::random_values(rng, cout);
      const Tensor zero_off = zeros({18, h, w});
      const Tensor y0 = deformable_conv2d(tensor_of(x, {cin, h, w}), zero_off, tensor_of(wt, {cout, cin, 3, 3}),
                                          tensor_of(b, {cout}));
      const auto ref0 = oracle::flatten(oracle::conv2d(oracle::to_maps(x, cin, h, w), wt, cout, 3, b, 1, 1));
      deform_zero_err = std::max(deform_zero_err, max_abs_diff(ref0, y0.data()));
      const auto off = oracle::random_values(rng, 18 * h * w, -2.5, 2.5);
      const Tensor y1 = deformable_conv2d(tensor_of(x, {cin, h, w}), tensor_of(off, {18, h, w}),
                                          tensor_of(wt, {cout, cin, 3, 3}), tensor_of(b, {cout}));
      const auto ref1 = oracle::flatten(
          oracle::deform_conv(oracle::to_maps(x, cin, h, w), oracle::to_maps(off, 18, h, w), wt, cout, b));
      deform_err = std::max(deform_err, max_abs_diff(ref1, y1.data()));
    }
    // metrics on 8×8 maps
    {
      const auto g = oracle::random_mask(rng, 8, 8);
      auto s = oracle::random_values(rng, 64, 0.0, 1.0);
      if (it % 5 == 0) for (std::size_t i = 0; i < 64; ++i) s[i] = 0.6 * g[i] + 0.4 * s[i];
      const Tensor S = tensor_of(s, {1, 8, 8}), G = tensor_of(g, {1, 8, 8});
      const auto sg = oracle::to_grid(s, 8, 8), gg = oracle::to_grid(g, 8, 8);
      m_mae = std::max(m_mae, std::abs(mae(S, G) - oracle::mae(sg, gg)));
      m_s = std::max(m_s, std::abs(s_measure(S, G) - oracle::s_measure(sg, gg)));
      const auto e = e_measure(S, G);
      const auto er = oracle::e_measure(sg, gg);
      m_e = std::max({m_e, std::abs(e.mean - er.mean), std::abs(e.max - er.max)});
      m_f = std::max(m_f, std::abs(weighted_f(S, G).value - oracle::weighted_f(sg, gg)));
      const auto pr = pr_curve(S, G);
      const auto prr = oracle::pr_curve(sg, gg);
      for (std::size_t k = 0; k < 256; ++k)
        m_pr = std::max({m_pr, std::abs(pr[k].precision - prr[k].precision), std::abs(pr[k].recall - prr[k].recall)});
    }
  }
  o.detail << "  " << instances << " instances each; max abs diff conv " << conv_err << ", correlation " << corr_err
           << ", deformable(zero offsets) " << deform_zero_err << ", deformable(random offsets) " << deform_err
           << "\n  metrics: mae " << m_mae << ", s " << m_s << ", e " << m_e << ", weighted_f " << m_f << ", pr "
           << m_pr << "\n";
  o.require(conv_err <= 1e-12, "conv2d differs from oracle beyond 1e-12");
  o.require(corr_err <= 1e-10, "correlation differs from oracle beyond 1e-10");
  o.require(deform_zero_err <= 1e-10, "zero-offset deformable conv differs from conv oracle beyond 1e-10");
  o.require(deform_err <= 1e-10, "deformable conv differs from oracle beyond 1e-10");
  o.require(std::max({m_mae, m_s, m_e, m_f, m_pr}) <= 1e-6, "a metric differs from its oracle beyond 1e-6");
  return o;
}

// ---- 3 --------------------------------------------------------------------

Outcome geometry() {
  Outcome o;
  const WindowPairGrid g = build_window_grid(8, 8, 2, 4);
  o.require(g.count() == 16, "8x8 map with M=2 should give 16 windows, got " + std::to_string(g.count()));
  bool centred = true;
  for (std::size_t k = 0; k < g.count(); ++k) {
    centred = centred && g.large_positions(k).size() == 16 && g.small_positions(k).size() == 4 &&
              g.large_windows[k].row == g.small_windows[k].row - 1 && g.large_windows[k].col == g.small_windows[k].col - 1;
  }
  o.require(centred, "large windows are not 4x4 and centred on their small windows");

  std::mt19937_64 rng(11);
  struct Cfg {
    std::size_t h, w, m, n;
  };
  std::vector<Cfg> cfgs{{12, 12, 4, 6}, {8, 8, 2, 4}};
  while (cfgs.size() < 10) {
    const std::size_t h = 3 + rng() % 14, w = 3 + rng() % 14;
    const std::size_t m = 1 + rng() % std::min<std::size_t>(5, std::max(h, w));
    const std::size_t n = std::min(std::max(h, w), m + rng() % 4);
    cfgs.push_back({h, w, m, n});
  }
  for (const auto& c : cfgs) {
    const WindowPairGrid grid = build_window_grid(c.h, c.w, c.m, c.n);
    std::vector<long> order;
    for (std::size_t k = 0; k < grid.count(); ++k) {
      const auto p = grid.small_positions(k);
      order.insert(order.end(), p.begin(), p.end());
    }
    std::vector<long> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    bool perm = sorted.size() == c.h * c.w;
    for (std::size_t i = 0; perm && i < sorted.size(); ++i) perm = sorted[i] == static_cast<long>(i);
    std::vector<double> vals(2 * c.h * c.w);
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>(i) + 0.5;
    const Tensor x({2, c.h, c.w}, vals);
    const Tensor back = scatter_tokens(gather_tokens(x, order), order, c.h, c.w);
    const bool round_trip = std::equal(back.data().begin(), back.data().end(), x.data().begin());
    std::ostringstream tag;
    tag << "(H=" << c.h << ", W=" << c.w << ", M=" << c.m << ", N=" << c.n << ")";
    o.require(perm && round_trip, "scatter-back is not a permutation for " + tag.str());
  }
  o.detail << "  16 windows with centred 4x4 partners on 8x8/M=2; " << cfgs.size()
           << " configs round-trip (M=4, N=6 included)\n";
  return o;
}

// ---- 4 & 5 ----------------------------------------------------------------

struct ToyProtocol {
  std::vector<TrainSample> samples;
  TrainOptions options;
  std::uint64_t seed = 3;

  ToyProtocol() {
    SceneConfig sc;
    sc.size = 64;
    samples = tools::to_samples(tools::make_toy_pairs(seed, 4, sc, AffineRanges{}));
    options.steps = 300;
    options.lr = 1e-3;
  }

  tools::ToyRun run(const Ablation& ablation) const {
    SACNetConfig cfg;
    cfg.input_size = 64;
    cfg.seed = seed;
    cfg.ablation = ablation;
    SACNet net(cfg);
    return tools::run_toy(net, samples, options);
  }
};

Outcome convergence(const ToyProtocol& proto, tools::ToyRun& full) {
  Outcome o;
  const auto t0 = Clock::now();
  full = proto.run(Ablation{});
  const double secs = seconds_since(t0);
  o.detail << "  initial loss " << full.initial_loss << ", final loss " << full.final_loss << " (ratio "
           << full.final_loss / full.initial_loss << "), mean IoU " << full.mean_iou << ", runtime " << secs << " s\n";
  o.require(full.final_loss < 0.5 * full.initial_loss, "final loss is not below half the initial loss");
  o.require(full.mean_iou > 0.8, "IoU on the training pairs is not above 0.8");
  o.require(secs < 600.0, "training took longer than 10 minutes");
  return o;
}

Outcome ablation_direction(const ToyProtocol& proto, const tools::ToyRun& full) {
  Outcome o;
  o.detail << "  full model final loss " << full.final_loss << "\n";
  for (const char* name : {"acm", "awp", "sgm", "afsm"}) {
    const tools::ToyRun r = proto.run(Ablation::parse(name));
    const bool ok = r.final_loss >= full.final_loss;
    o.detail << "  w/o " << name << ": final loss " << r.final_loss << ", IoU " << r.mean_iou
             << (ok ? "" : "  <-- lower than the full model") << "\n";
    o.require(ok, std::string("w/o ") + name + " trains to a lower loss than the full model");
  }
  return o;
}

// ---- 6 --------------------------------------------------------------------

Outcome metric_sanity() {
  Outcome o;
  std::mt19937_64 rng(6);
  double worst = 0.0;
  bool monotone = true;
  for (int it = 0; it < 20; ++it) {
    const std::size_t h = 8 + rng() % 24, w = 8 + rng() % 24;
    const Tensor g({1, h, w}, oracle::random_mask(rng, h, w));
    worst = std::max({worst, mae(g, g), std::abs(s_measure(g, g) - 1.0), std::abs(e_measure(g, g).max - 1.0),
                      std::abs(weighted_f(g, g).value - 1.0)});
    const Tensor s({1, h, w}, oracle::random_values(rng, h * w, 0.0, 1.0));
    const PrCurve pr = pr_curve(s, g);
    for (std::size_t k = 1; k < kThresholds; ++k) monotone = monotone && pr[k].recall <= pr[k - 1].recall;
  }
  o.detail << "  perfect prediction max deviation " << worst << " over 20 maps\n";
  o.require(worst <= 1e-6, "perfect prediction does not score MAE 0 / S 1 / E_max 1 / F 1 within 1e-6");
  o.require(monotone, "PR recall increases with the threshold somewhere");
  return o;
}

// ---- 7 --------------------------------------------------------------------

std::vector<std::pair<std::string, std::vector<std::uint8_t>>> snapshot(const fs::path& root) {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), root).string(), read_file_bytes(e.path()));
  std::sort(files.begin(), files.end());
  return files;
}

Outcome determinism(const fs::path& work) {
  Outcome o;
  auto run = [&](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int rc = tools::run_cli(args, out, err);
    if (rc != 0) o.require(false, "command failed (" + std::to_string(rc) + "): " + err.str());
    return out.str();
  };
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = work / ("run" + std::to_string(rep));
    fs::remove_all(d);
    run({"gen-pairs", "--n", "2", "--size", "64", "--seed", "5", "--out-dir", (d / "pairs").string()});
    run({"forward", "--size", "64", "--seed", "5", "--rgb", (d / "pairs/pair_0000/rgb.ppm").string(), "--thermal",
         (d / "pairs/pair_0000/thermal.ppm").string(), "--out", (d / "forward/sal.pgm").string()});
    run({"train-toy", "--size", "64", "--seed", "5", "--steps", "3", "--pairs-dir", (d / "pairs").string(),
         "--out-ckpt", (d / "ckpt").string()});
  }
  std::size_t files = 0;
  for (const char* part : {"pairs", "forward", "ckpt"}) {
    const auto a = snapshot(work / "run0" / part), b = snapshot(work / "run1" / part);
    files += a.size();
    o.require(!a.empty() && a == b, std::string(part) + " outputs differ between runs");
  }
  o.detail << "  " << files << " files compared byte-for-byte across two runs\n";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "sacnet_acceptance";
  fs::create_directories(work);
  bool all = true;
  auto record = [&](int id, const std::string& title, const Outcome& o) {
    report(id, title, o);
    all = all && o.pass;
  };

  record(1, "gradient checks (ops, acm, afsm, losses at 1e-4; 64x64 model at 1e-3)", gradient_suite());
  record(2, "brute-force oracle equivalence", oracle_equivalence());
  record(3, "window geometry and scatter-back permutation", geometry());
  const ToyProtocol proto;
  tools::ToyRun full;
  record(4, "overfit convergence on 4 toy pairs", convergence(proto, full));
  record(5, "ablation direction (each ablation loss >= full model)", ablation_direction(proto, full));
  record(6, "metric sanity (perfect scores, monotone PR recall)", metric_sanity());
  record(7, "byte-identical forward / train-toy / gen-pairs reruns", determinism(work));
  return all ? 0 : 1;
}
