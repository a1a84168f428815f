#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "doctest.h"
#include "sacnet/image_io.hpp"
#include "sacnet/network.hpp"
#include "sacnet/params.hpp"

using namespace sacnet;
using sacnet::tools::run_cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sacnet_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Two 64×64 pairs shared by the tests below.
const fs::path& pairs() {
  static const fs::path dir = [] {
    const fs::path d = scratch_dir("pairs");
    const Result r = cli({"gen-pairs", "--n", "2", "--size", "64", "--seed", "3", "--out-dir", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"gen-pairs", "--out-dir", "x", "--bogus", "1"}).code == 1);
  CHECK(cli({"eval", "--pred-dir", "a"}).code == 1);
  CHECK(cli({"train-toy", "--size", "50", "--steps", "0"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  for (const char* sub : {"forward", "gradcheck", "train-toy", "eval", "gen-pairs", "ablate"}) {
    const Result r = cli({sub, "--help"});
    CAPTURE(sub);
    CHECK(r.code == 0);
    CHECK(r.out.find("--seed") != std::string::npos);
    CHECK(r.out.find("--config") != std::string::npos);
  }
}

TEST_CASE("gen-pairs") {
  const fs::path d = pairs();
  for (const char* f : {"rgb.ppm", "thermal.ppm", "gt.pgm", "params.txt"}) CHECK(fs::exists(d / "pair_0000" / f));
  CHECK(fs::exists(d / "pair_0001"));
  const fs::path again = scratch_dir("pairs_again");
  REQUIRE(cli({"gen-pairs", "--n", "2", "--size", "64", "--seed", "3", "--out-dir", again.string()}).code == 0);
  for (const char* f : {"rgb.ppm", "thermal.ppm", "gt.pgm", "params.txt"})
    CHECK(slurp(d / "pair_0001" / f) == slurp(again / "pair_0001" / f));
  CHECK(cli({"gen-pairs", "--n", "1", "--size", "48", "--out-dir", again.string()}).code == 1);
}

TEST_CASE("forward") {
  const fs::path d = pairs();
  const fs::path out = scratch_dir("forward");
  const std::string rgb = (d / "pair_0000/rgb.ppm").string(), th = (d / "pair_0000/thermal.ppm").string();
  auto run = [&](const std::string& dst) {
    return cli({"forward", "--size", "64", "--seed", "4", "--rgb", rgb, "--thermal", th, "--out", dst});
  };
  REQUIRE(run((out / "a.pgm").string()).code == 0);
  REQUIRE(run((out / "b").string()).code == 0);
  const RawImage img = decode_pnm(read_file_bytes(out / "a.pgm"));
  CHECK(img.channels == 1);
  CHECK(img.height == 64);
  CHECK(img.width == 64);
  CHECK(fs::exists(out / "a.stf"));
  CHECK(slurp(out / "a.pgm") == slurp(out / "b.pgm"));
  CHECK(slurp(out / "a.stf") == slurp(out / "b.stf"));

  const Result missing = cli({"forward", "--size", "64", "--rgb", (d / "nope.ppm").string(), "--thermal", th,
                              "--out", (out / "c.pgm").string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.ppm") != std::string::npos);
  CHECK(cli({"forward", "--size", "96", "--rgb", rgb, "--thermal", th, "--out", (out / "c.pgm").string()}).code == 3);

  const fs::path batch = out / "batch";
  REQUIRE(cli({"forward", "--size", "64", "--pairs-dir", d.string(), "--out-dir", batch.string()}).code == 0);
  CHECK(fs::exists(batch / "pair_0000.pgm"));
  CHECK(fs::exists(batch / "pair_0001.pgm"));
}

TEST_CASE("forward at the default size") {
  const fs::path d = scratch_dir("pairs384");
  REQUIRE(cli({"gen-pairs", "--n", "1", "--out-dir", d.string()}).code == 0);
  const fs::path out = d / "sal.pgm";
  REQUIRE(cli({"forward", "--rgb", (d / "pair_0000/rgb.ppm").string(), "--thermal",
               (d / "pair_0000/thermal.ppm").string(), "--out", out.string()})
              .code == 0);
  const RawImage img = decode_pnm(read_file_bytes(out));
  CHECK(img.height == 384);
  CHECK(img.width == 384);
}

TEST_CASE("train-toy") {
  const fs::path d = pairs();
  const fs::path out = scratch_dir("train");

  SUBCASE("zero steps saves the initialization") {
    const Result r = cli({"train-toy", "--pairs-dir", d.string(), "--steps", "0", "--seed", "8", "--out-ckpt",
                          (out / "ck0").string()});
    REQUIRE(r.code == 0);
    const SACNet loaded = SACNet::load((out / "ck0").string());
    SACNetConfig cfg;
    cfg.input_size = 64;
    cfg.seed = 8;
    const SACNet fresh(cfg);
    for (const auto& [name, t] : fresh.params().entries()) {
      const Tensor& l = loaded.params().get(name);
      bool eq = true;
      for (std::size_t i = 0; i < t.numel(); ++i) eq = eq && l[i] == static_cast<double>(static_cast<float>(t[i]));
      CHECK(eq);
    }
  }
  SUBCASE("the log has one row per step and reruns are byte-identical") {
    for (const char* name : {"a", "b"}) {
      const Result r = cli({"train-toy", "--pairs-dir", d.string(), "--steps", "3", "--out-ckpt",
                            (out / name).string()});
      REQUIRE(r.code == 0);
      CHECK(r.out.find("initial_loss=") != std::string::npos);
    }
    const std::string log = slurp(out / "a/train_log.csv");
    CHECK(line_count(log) == 4);
    CHECK(log.rfind("step,bce,smooth,dice,total\n", 0) == 0);
    for (const auto& e : fs::directory_iterator(out / "a"))
      CHECK(slurp(e.path()) == slurp(out / "b" / e.path().filename()));
  }
  SUBCASE("divergence exits with the numeric code and names the step") {
    const Result r = cli({"train-toy", "--pairs-dir", d.string(), "--steps", "5", "--lr", "1e300", "--out-ckpt",
                          (out / "nan").string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("step") != std::string::npos);
  }
  SUBCASE("missing pairs directory") {
    CHECK(cli({"train-toy", "--pairs-dir", (out / "none").string(), "--steps", "1"}).code == 2);
  }
}

TEST_CASE("eval") {
  const fs::path d = pairs();
  const fs::path out = scratch_dir("eval");
  fs::create_directories(out / "pred");
  for (const char* p : {"pair_0000", "pair_0001"}) fs::copy_file(d / p / "gt.pgm", out / "pred" / (std::string(p) + ".pgm"));
  const Result r = cli({"eval", "--pred-dir", (out / "pred").string(), "--gt-dir", d.string(), "--out",
                        (out / "m.csv").string()});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(out / "m.csv");
  CHECK(csv.find("mean,0.000000,1.000000") != std::string::npos);
  CHECK(line_count(slurp(out / "m_pr.csv")) == 257);

  fs::remove(out / "pred" / "pair_0001.pgm");
  CHECK(cli({"eval", "--pred-dir", (out / "pred").string(), "--gt-dir", d.string(), "--out",
             (out / "m2.csv").string()})
            .code == 5);
  fs::copy_file(d / "pair_0000" / "gt.pgm", out / "pred" / "other.pgm");
  CHECK(cli({"eval", "--pred-dir", (out / "pred").string(), "--gt-dir", d.string(), "--out",
             (out / "m3.csv").string()})
            .code == 5);
}

TEST_CASE("gradcheck") {
  const Result r = cli({"gradcheck", "--module", "acm", "--tol", "1e-4"});
  CHECK(r.code == 0);
  CHECK(r.out.find("all gradient checks passed") != std::string::npos);
  CHECK(cli({"gradcheck", "--module", "nope"}).code == 1);
}

TEST_CASE("ablate") {
  const Result r = cli({"ablate", "--drop", "afsm", "--n-pairs", "1", "--steps", "2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("direction:") != std::string::npos);
  CHECK(cli({"ablate", "--drop", "everything", "--steps", "1"}).code == 1);
}

TEST_CASE("config file and seed fallback") {
  const fs::path d = scratch_dir("config");
  {
    std::ofstream cfg(d / "gen.cfg");
    cfg << "# generator settings\nn=1\nsize=64\nseed=21\nout_dir=" << (d / "from_cfg").string() << "\n";
  }
  REQUIRE(cli({"gen-pairs", "--config", (d / "gen.cfg").string()}).code == 0);
  REQUIRE(cli({"gen-pairs", "--n", "1", "--size", "64", "--seed", "21", "--out-dir", (d / "flags").string()}).code == 0);
  CHECK(slurp(d / "from_cfg/pair_0000/rgb.ppm") == slurp(d / "flags/pair_0000/rgb.ppm"));

  // the command line wins over the file
  REQUIRE(cli({"gen-pairs", "--config", (d / "gen.cfg").string(), "--seed", "22", "--out-dir",
               (d / "override").string()})
              .code == 0);
  CHECK(slurp(d / "override/pair_0000/rgb.ppm") != slurp(d / "flags/pair_0000/rgb.ppm"));

  ::setenv("SACNET_SEED", "21", 1);
  REQUIRE(cli({"gen-pairs", "--n", "1", "--size", "64", "--out-dir", (d / "env").string()}).code == 0);
  ::unsetenv("SACNET_SEED");
  CHECK(slurp(d / "env/pair_0000/rgb.ppm") == slurp(d / "flags/pair_0000/rgb.ppm"));

  CHECK(cli({"gen-pairs", "--config", (d / "missing.cfg").string()}).code == 2);
}
