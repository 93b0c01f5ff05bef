#include <doctest.h>

#include <sstream>

#include "cropref/cli.hpp"
#include "cropref/error.hpp"
#include "cropref/textio.hpp"
#include "test_util.hpp"

using namespace cropref;
using namespace cropref::cli;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cropref");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = Config::parse("# comment\nseed = 7\nregion = il  # trailing\n\nmapper.features = EVI, SWIR1\n");
  CHECK(c.get_int("seed", 0) == 7);
  CHECK(c.get_or("region", "") == "il");
  CHECK(c.get_list("mapper.features") == std::vector<std::string>{"EVI", "SWIR1"});
  CHECK(c.get_double("synth.sigma", 0.5) == 0.5);
  CHECK_THROWS_AS(Config::parse("seed = 1\nseed = 2\n"), Error);
  CHECK_THROWS_AS(Config::parse("nonsense.key = 1\n"), Error);
  CHECK_THROWS_AS(Config::parse("seed 1\n"), Error);
  CHECK_THROWS_AS(Config::parse("seed = x\n").get_int("seed", 0), Error);
}

TEST_CASE("config canonical form and hash ignore layout") {
  const auto a = Config::parse("seed=1\nregion = ca\n");
  const auto b = Config::parse("# x\nregion=ca\n  seed = 1\n");
  CHECK(a.canonical() == "region = ca\nseed = 1\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != Config::parse("seed=2\nregion=ca\n").hash());
}

TEST_CASE("usage errors exit 1, help exits 0") {
  CHECK(invoke({}).code == kUsage);
  CHECK(invoke({"frobnicate"}).code == kUsage);
  CHECK(invoke({"synth", "--bogus"}).code == kUsage);
  const auto help = invoke({"--help"});
  CHECK(help.code == kOk);
  CHECK(help.out.find("train-mapper") != std::string::npos);
  std::ostringstream out, err;
  CHECK(run_command("nope", Config{}, "out", out, err) == kUsage);
}

TEST_CASE("data errors exit 2") {
  TempDir dir("cli_err");
  const auto out = dir.path.string();
  // no seed anywhere
  CHECK(invoke({"grid", "--out", out}).code == kDataError);
  // grid without a bbox
  CHECK(invoke({"grid", "--seed", "1", "--out", out}).code == kDataError);
  // missing config file
  CHECK(invoke({"grid", "--config", (dir.path / "none.conf").string()}).code == kDataError);
  // missing scene directory
  textio::write_file(dir.path / "refs.csv", "lat,lon,label,source_image,confidence,shift_m,extra_steps\n");
  textio::write_file(dir.path / "c.conf", "seed = 1\nmapper.refpoints = " + (dir.path / "refs.csv").string() +
                                              "\nscenes.dir = " + (dir.path / "no_scenes").string() + "\n");
  const auto r = invoke({"select-features", "--config", (dir.path / "c.conf").string(), "--out", out});
  CHECK(r.code == kDataError);
  CHECK(r.err.find("no_scenes") != std::string::npos);
}

TEST_CASE("grid command writes points and a run manifest") {
  TempDir dir("cli_grid");
  textio::write_file(dir.path / "g.conf", "seed = 4\ngrid.bbox = 40.0,-88.0,40.01,-87.99\ngrid.spacing_m = 500\n");
  const auto r = invoke({"grid", "--config", (dir.path / "g.conf").string(), "--out", dir.path.string()});
  REQUIRE(r.code == kOk);
  const auto pts = textio::read_file(dir.path / "grid" / "points.csv");
  CHECK(pts.rfind("lat,lon\n", 0) == 0);
  const auto m = textio::read_file(dir.path / "manifests" / "grid.manifest");
  CHECK(m.find("command = grid\nseed = 4\nconfig_hash = ") == 0);
  CHECK(m.find("config.grid.spacing_m = 500") != std::string::npos);
  CHECK(m.find("grid/points.csv fnv1a64=" + textio::hex64(textio::fnv1a64(pts))) != std::string::npos);

  // --seed overrides the config
  const auto r2 = invoke({"grid", "--config", (dir.path / "g.conf").string(), "--seed", "9", "--out",
                       dir.path.string()});
  CHECK(r2.code == kOk);
  CHECK(textio::read_file(dir.path / "manifests" / "grid.manifest").find("seed = 9\n") != std::string::npos);
}
