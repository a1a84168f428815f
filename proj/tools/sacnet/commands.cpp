#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "sacnet/datagen.hpp"
#include "sacnet/errors.hpp"
#include "sacnet/image_io.hpp"
#include "sacnet/metrics.hpp"
#include "sacnet/network.hpp"
#include "suites.hpp"
#include "toy.hpp"

namespace fs = std::filesystem;

namespace sacnet::tools {

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---- shared option groups -------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  std::string config;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "RNG seed")->envname("SACNET_SEED")->capture_default_str();
  sub->add_option("--config", c.config, "key=value file; each key mirrors a long flag");
}

struct ModelOpts {
  std::size_t size;
  std::size_t window_small = 4;
  std::size_t window_large = 6;
  std::string channels = "16,32,64,128";
  std::size_t decoder_channels = 32;
  std::size_t cascade_depth = 4;
  std::size_t heads = 1;
  std::string drop = "none";

  explicit ModelOpts(std::size_t default_size) : size(default_size) {}

  SACNetConfig config(std::uint64_t seed) const {
    KeyValues kv{{"input_size", std::to_string(size)},
                 {"window_small", std::to_string(window_small)},
                 {"window_large", std::to_string(window_large)},
                 {"channels", channels},
                 {"decoder_channels", std::to_string(decoder_channels)},
                 {"cascade_depth", std::to_string(cascade_depth)},
                 {"heads", std::to_string(heads)},
                 {"seed", std::to_string(seed)},
                 {"ablation", drop}};
    SACNetConfig cfg = SACNetConfig::from_key_values(kv);
    cfg.validate();
    return cfg;
  }
};

void add_model(CLI::App* sub, ModelOpts& m, bool with_drop) {
  sub->add_option("--size", m.size, "input side length (multiple of 32)")->capture_default_str();
  sub->add_option("--window-small", m.window_small, "small window side M")->capture_default_str();
  sub->add_option("--window-large", m.window_large, "large window side N")->capture_default_str();
  sub->add_option("--channels", m.channels, "encoder widths c1,c2,c3,c4")->capture_default_str();
  sub->add_option("--decoder-channels", m.decoder_channels, "decoder width")->capture_default_str();
  sub->add_option("--cascade-depth", m.cascade_depth, "deformable layers per level")->capture_default_str();
  sub->add_option("--heads", m.heads, "attention heads")->capture_default_str();
  if (with_drop)
    sub->add_option("--drop", m.drop, "disable a component: none|acm|awp|sgm|afsm")->capture_default_str();
}

struct SceneOpts {
  std::size_t objects = 1;
  double max_translation = 0.1;
  double max_rotation = 10.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double noise = 0.02;

  SceneConfig scene(std::size_t size) const {
    SceneConfig sc;
    sc.size = size;
    sc.n_objects = objects;
    sc.noise = noise;
    return sc;
  }
  AffineRanges ranges() const { return {max_translation, max_rotation, scale_min, scale_max}; }
};

void add_scene(CLI::App* sub, SceneOpts& s) {
  sub->add_option("--objects", s.objects, "salient objects per scene")->capture_default_str();
  sub->add_option("--max-translation", s.max_translation, "max |t| as a fraction of the size")->capture_default_str();
  sub->add_option("--max-rotation", s.max_rotation, "max |rotation| in degrees")->capture_default_str();
  sub->add_option("--scale-min", s.scale_min, "minimum scale")->capture_default_str();
  sub->add_option("--scale-max", s.scale_max, "maximum scale")->capture_default_str();
  sub->add_option("--noise", s.noise, "pixel noise standard deviation")->capture_default_str();
}

struct TrainOpts {
  std::string pairs_dir;
  std::size_t n_pairs = 4;
  std::size_t steps = 300;
  double lr = 1e-3;
  double weight_decay = 1e-4;
};

void add_train(CLI::App* sub, TrainOpts& t) {
  sub->add_option("--pairs-dir", t.pairs_dir, "training pairs (generated in memory when omitted)");
  sub->add_option("--n-pairs", t.n_pairs, "pairs to generate when --pairs-dir is omitted")->capture_default_str();
  sub->add_option("--steps", t.steps, "optimizer steps")->capture_default_str();
  sub->add_option("--lr", t.lr, "AdamW learning rate")->capture_default_str();
  sub->add_option("--weight-decay", t.weight_decay, "AdamW decoupled weight decay")->capture_default_str();
}

std::vector<TrainSample> training_samples(const TrainOpts& t, const SceneOpts& s, std::size_t size,
                                          std::uint64_t seed) {
  if (!t.pairs_dir.empty()) return to_samples(load_pairs(t.pairs_dir));
  return to_samples(make_toy_pairs(seed, t.n_pairs, s.scene(size), s.ranges()));
}

// ---- config expansion -----------------------------------------------------

// Turns `--config file` into `--key=value` arguments placed right after the
// subcommand so that flags given on the command line still win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path) return args;
  const KeyValues kv = read_key_values(*path);
  std::vector<std::string> extra;
  for (const auto& [key, value] : kv) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "config") continue;
    extra.push_back("--" + flag + "=" + value);
  }
  std::vector<std::string> out;
  bool inserted = false;
  for (const auto& a : args) {
    out.push_back(a);
    if (!inserted && !a.empty() && a[0] != '-') {
      out.insert(out.end(), extra.begin(), extra.end());
      inserted = true;
    }
  }
  return out;
}

// ---- commands -------------------------------------------------------------

Tensor three_channel(const Tensor& img) {
  if (img.dim(0) == 3) return img;
  if (img.dim(0) != 1) throw DimensionError("expected a 1- or 3-channel image, got " + shape_str(img.shape()));
  return concat({img, img, img}, 0);
}

void write_map(const fs::path& out, const Tensor& s) {
  fs::path pgm = out, stf = out;
  if (out.extension() == ".pgm") {
    stf.replace_extension(".stf");
  } else {
    pgm += ".pgm";
    stf += ".stf";
  }
  if (pgm.has_parent_path()) fs::create_directories(pgm.parent_path());
  write_image(pgm, s);
  write_stf(stf, s);
}

struct ForwardArgs {
  Common common;
  ModelOpts model{384};
  std::string rgb, thermal, out, ckpt, pairs_dir, out_dir;
};

int cmd_forward(const ForwardArgs& a, std::ostream& out) {
  const SACNet net = a.ckpt.empty() ? SACNet(a.model.config(a.common.seed)) : SACNet::load(a.ckpt);
  if (!a.pairs_dir.empty()) {
    if (a.out_dir.empty()) throw ParameterError("forward: --pairs-dir needs --out-dir");
    for (const auto& dir : list_pair_dirs(a.pairs_dir)) {
      const SyntheticPair p = read_pair(dir);
      const fs::path dst = fs::path(a.out_dir) / (dir.filename().string() + ".pgm");
      write_map(dst, net.forward(p.rgb, p.thermal));
      out << "wrote " << dst.string() << "\n";
    }
    return kExitOk;
  }
  if (a.rgb.empty() || a.thermal.empty() || a.out.empty())
    throw ParameterError("forward: --rgb, --thermal and --out are required (or --pairs-dir/--out-dir)");
  const Tensor rgb = three_channel(read_image(a.rgb));
  const Tensor th = three_channel(read_image(a.thermal));
  const Tensor s = net.forward(rgb, th);
  write_map(a.out, s);
  out << "wrote saliency " << s.dim(1) << "x" << s.dim(2) << " to " << a.out << "\n";
  return kExitOk;
}

struct GradcheckArgs {
  Common common;
  std::string module = "all";
  std::optional<double> tol;
  std::size_t entries = 256;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  std::vector<std::string> modules;
  if (a.module == "all") modules = gradcheck_modules();
  else modules.push_back(a.module);
  bool ok = true;
  for (const auto& m : modules) {
    const double tol = a.tol.value_or(m == "model" ? 1e-3 : 1e-4);
    for (const auto& c : run_gradcheck_module(m, tol, a.common.seed, a.entries)) {
      out << m << "/" << c.name << ": " << c.report.summary() << "\n";
      ok = ok && c.report.passed;
    }
  }
  out << (ok ? "all gradient checks passed" : "gradient check FAILED") << "\n";
  return ok ? kExitOk : kExitNumeric;
}

struct TrainArgs {
  Common common;
  ModelOpts model{64};
  SceneOpts scene;
  TrainOpts train;
  std::string out_ckpt, log;
};

int cmd_train_toy(const TrainArgs& a, std::ostream& out) {
  SACNet net(a.model.config(a.common.seed));
  const auto samples = training_samples(a.train, a.scene, a.model.size, a.common.seed);
  TrainOptions opt;
  opt.steps = a.train.steps;
  opt.lr = a.train.lr;
  opt.weight_decay = a.train.weight_decay;
  if (!a.out_ckpt.empty()) fs::create_directories(a.out_ckpt);
  if (!a.log.empty()) opt.log_csv = a.log;
  else if (!a.out_ckpt.empty()) opt.log_csv = fs::path(a.out_ckpt) / "train_log.csv";
  const ToyRun run = run_toy(net, samples, opt);
  if (!a.out_ckpt.empty()) net.save(a.out_ckpt);
  out << "pairs=" << samples.size() << " steps=" << a.train.steps << " initial_loss=" << fmt_g(run.initial_loss)
      << " final_loss=" << fmt_g(run.final_loss) << " iou=" << fmt_g(run.mean_iou) << "\n";
  return kExitOk;
}

struct AblateArgs : TrainArgs {
  bool no_baseline = false;
  std::string csv;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  const Ablation drop = Ablation::parse(a.model.drop);
  if (!drop.any()) throw ParameterError("ablate: --drop must name acm, awp, sgm or afsm");
  const auto samples = training_samples(a.train, a.scene, a.model.size, a.common.seed);
  TrainOptions opt;
  opt.steps = a.train.steps;
  opt.lr = a.train.lr;
  opt.weight_decay = a.train.weight_decay;

  struct Row {
    std::string variant;
    ToyRun run;
  };
  std::vector<Row> rows;
  if (!a.no_baseline) {
    ModelOpts full = a.model;
    full.drop = "none";
    SACNet net(full.config(a.common.seed));
    rows.push_back({"full", run_toy(net, samples, opt)});
  }
  SACNet net(a.model.config(a.common.seed));
  rows.push_back({"w/o " + drop.name(), run_toy(net, samples, opt)});

  std::ostringstream table;
  table << "variant,initial_loss,final_loss,iou\n";
  for (const auto& r : rows)
    table << r.variant << ',' << fmt_g(r.run.initial_loss) << ',' << fmt_g(r.run.final_loss) << ','
          << fmt_g(r.run.mean_iou) << '\n';
  out << table.str();
  if (rows.size() == 2) {
    const bool consistent = rows[1].run.final_loss >= rows[0].run.final_loss;
    out << "direction: " << (consistent ? "ablation loss >= full model loss" : "VIOLATED (ablation trains lower)")
        << "\n";
  }
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw IoError("cannot write " + a.csv);
    f << table.str();
  }
  return kExitOk;
}

struct EvalArgs {
  Common common;
  std::string pred_dir, gt_dir, out, pr_out;
};

std::map<std::string, fs::path> ground_truth_index(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> gt;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "gt.pgm")) gt[e.path().filename().string()] = e.path() / "gt.pgm";
    else if (e.is_regular_file() && e.path().extension() == ".pgm") gt[e.path().stem().string()] = e.path();
  }
  return gt;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (!fs::is_directory(a.pred_dir)) throw IoError("not a directory: " + a.pred_dir);
  std::map<std::string, fs::path> preds;
  for (const auto& e : fs::directory_iterator(a.pred_dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") preds[e.path().stem().string()] = e.path();
  const auto gts = ground_truth_index(a.gt_dir);
  if (preds.size() != gts.size()) {
    throw ProtocolError("eval: " + std::to_string(preds.size()) + " predictions vs " + std::to_string(gts.size()) +
                        " ground-truth maps");
  }
  if (preds.empty()) throw ProtocolError("eval: no prediction maps in " + a.pred_dir);

  std::vector<std::pair<Tensor, Tensor>> pairs;
  std::ostringstream csv;
  csv << "name,mae,s_measure,e_measure_mean,e_measure_max,weighted_f\n";
  for (const auto& [name, path] : preds) {
    auto it = gts.find(name);
    if (it == gts.end()) throw ProtocolError("eval: no ground truth for prediction '" + name + "'");
    const Tensor s = read_image(path);
    Tensor g = read_image(it->second);
    std::vector<double> bin(g.data().begin(), g.data().end());
    for (double& v : bin) v = v > 0.5 ? 1.0 : 0.0;
    g = Tensor(g.shape(), std::move(bin));
    if (s.shape() != g.shape())
      throw DimensionError("eval: '" + name + "' prediction " + shape_str(s.shape()) + " vs ground truth " +
                           shape_str(g.shape()));
    const EMeasureResult e = e_measure(s, g);
    csv << name << ',' << fmt6(mae(s, g)) << ',' << fmt6(s_measure(s, g)) << ',' << fmt6(e.mean) << ','
        << fmt6(e.max) << ',' << fmt6(weighted_f(s, g).value) << '\n';
    pairs.emplace_back(s, g);
  }
  const MetricReport rep = evaluate_dataset(pairs);
  csv << "mean," << fmt6(rep.mae) << ',' << fmt6(rep.s_measure) << ',' << fmt6(rep.e_measure_mean) << ','
      << fmt6(rep.e_measure_max) << ',' << fmt6(rep.weighted_f) << '\n';

  std::ostringstream pr;
  pr << "threshold,precision,recall\n";
  for (std::size_t k = 0; k < kThresholds; ++k)
    pr << k << ',' << fmt6(rep.pr_curve[k].precision) << ',' << fmt6(rep.pr_curve[k].recall) << '\n';

  fs::path pr_path = a.pr_out;
  if (pr_path.empty()) {
    pr_path = a.out;
    pr_path.replace_filename(pr_path.stem().string() + "_pr.csv");
  }
  for (const auto& [path, text] : {std::pair{fs::path(a.out), csv.str()}, std::pair{pr_path, pr.str()}}) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
  }
  out << "images=" << rep.images << " mae=" << fmt6(rep.mae) << " s_measure=" << fmt6(rep.s_measure)
      << " e_mean=" << fmt6(rep.e_measure_mean) << " e_max=" << fmt6(rep.e_measure_max)
      << " weighted_f=" << fmt6(rep.weighted_f);
  if (rep.degenerate_gt) out << " (" << rep.degenerate_gt << " ground-truth maps without foreground)";
  out << "\n";
  return kExitOk;
}

struct GenArgs {
  Common common;
  SceneOpts scene;
  std::size_t n = 4;
  std::size_t size = 384;
  std::string out_dir;
};

int cmd_gen_pairs(const GenArgs& a, std::ostream& out, std::ostream& err) {
  const SceneConfig sc = a.scene.scene(a.size);
  fs::create_directories(a.out_dir);
  for (std::size_t i = 0; i < a.n; ++i) {
    const std::uint64_t seed = pair_seed(a.common.seed, i);
    char name[32];
    std::snprintf(name, sizeof name, "pair_%04zu", i);
    const Scene scene = gen_scene(seed, sc);
    for (const auto& w : scene.warnings) err << "warning: " << name << ": " << w << "\n";
    write_pair(fs::path(a.out_dir) / name, gen_unaligned_pair(seed, sc, a.scene.ranges()));
  }
  out << "wrote " << a.n << " pairs to " << a.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SACNet: alignment-free RGB-thermal salient object detection"};
  app.name("sacnet");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  ForwardArgs fwd;
  auto* c_fwd = app.add_subcommand("forward", "Predict a saliency map (PGM + STF)");
  add_common(c_fwd, fwd.common);
  add_model(c_fwd, fwd.model, true);
  c_fwd->add_option("--rgb", fwd.rgb, "RGB image (PPM)");
  c_fwd->add_option("--thermal", fwd.thermal, "thermal image (PPM or PGM)");
  c_fwd->add_option("--out", fwd.out, "output path; .pgm and .stf are written");
  c_fwd->add_option("--ckpt", fwd.ckpt, "checkpoint directory (its config wins over model flags)");
  c_fwd->add_option("--pairs-dir", fwd.pairs_dir, "predict every pair directory under this path");
  c_fwd->add_option("--out-dir", fwd.out_dir, "output directory for --pairs-dir");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  add_common(c_gc, gc.common);
  c_gc->add_option("--module", gc.module, "ops|acm|afsm|losses|model|all")->capture_default_str();
  c_gc->add_option("--tol", gc.tol, "relative tolerance (default 1e-4, model 1e-3)");
  c_gc->add_option("--entries", gc.entries, "sampled parameter entries for the model check")->capture_default_str();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train-toy", "Full-batch AdamW training on toy pairs");
  add_common(c_tr, tr.common);
  add_model(c_tr, tr.model, true);
  add_scene(c_tr, tr.scene);
  add_train(c_tr, tr.train);
  c_tr->add_option("--out-ckpt", tr.out_ckpt, "checkpoint directory to write");
  c_tr->add_option("--log", tr.log, "per-step CSV log (default <out-ckpt>/train_log.csv)");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Score predicted maps against ground truth");
  add_common(c_ev, ev.common);
  c_ev->add_option("--pred-dir", ev.pred_dir, "directory of predicted .pgm maps")->required();
  c_ev->add_option("--gt-dir", ev.gt_dir, "ground-truth .pgm maps or pair directories")->required();
  c_ev->add_option("--out", ev.out, "metric CSV")->required();
  c_ev->add_option("--pr-out", ev.pr_out, "PR-curve CSV (default <out>_pr.csv)");

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-pairs", "Generate synthetic misaligned RGB-thermal pairs");
  add_common(c_gen, gen.common);
  add_scene(c_gen, gen.scene);
  c_gen->add_option("--n", gen.n, "number of pairs")->capture_default_str();
  c_gen->add_option("--size", gen.size, "image side length (multiple of 32)")->capture_default_str();
  c_gen->add_option("--out-dir", gen.out_dir, "output directory")->required();

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "Train with one component disabled and compare to the full model");
  add_common(c_ab, ab.common);
  add_model(c_ab, ab.model, true);
  add_scene(c_ab, ab.scene);
  add_train(c_ab, ab.train);
  c_ab->get_option("--drop")->required();
  c_ab->add_flag("--no-baseline", ab.no_baseline, "skip the full-model reference run");
  c_ab->add_option("--out", ab.csv, "summary CSV");

  try {
    const std::vector<std::string> args = expand_config(raw_args);
    std::vector<std::string> argv_store{"sacnet"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitUsage;
    }
    if (c_fwd->parsed()) return cmd_forward(fwd, out);
    if (c_gc->parsed()) return cmd_gradcheck(gc, out);
    if (c_tr->parsed()) return cmd_train_toy(tr, out);
    if (c_ev->parsed()) return cmd_eval(ev, out);
    if (c_gen->parsed()) return cmd_gen_pairs(gen, out, err);
    if (c_ab->parsed()) return cmd_ablate(ab, out);
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitShape;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ProtocolError& e) {
    err << "error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace sacnet::tools
