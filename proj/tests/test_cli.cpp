#include "tubescore/cli.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace tubescore;

namespace {

namespace fs = std::filesystem;

const char* kMinimal = R"(# binomial, fixed lambda
[null]
family = binomial2
supports = 0.5
[perturbation]
family = binomial2
lower = 0
upper = 1
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("tubescore_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = (path_ / name).string();
    std::ofstream(p) << text;
    return p;
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "tubescore");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  const auto c = parse_config(kMinimal);
  EXPECT_EQ(c.null_family, "binomial2");
  EXPECT_DOUBLE_EQ(c.alpha, 0.05);
  EXPECT_EQ(c.grid, 401);
  EXPECT_EQ(c.replicates, 100000u);
  ASSERT_TRUE(c.domain.has_value());
  EXPECT_DOUBLE_EQ(c.domain->upper()[0], 1.0);
  EXPECT_TRUE(c.warnings.empty());
  const auto spec = c.test_spec();
  EXPECT_EQ(spec.null.estimation(), NullEstimation::None);
}

TEST(Config, AlphaOutOfRange) {
  EXPECT_NE(error_of(std::string(kMinimal) + "[test]\nalpha = 0.7\n").find("alpha"), std::string::npos);
  EXPECT_NE(error_of(std::string(kMinimal) + "[test]\nalpha = 0\n"), "");
}

TEST(Config, DuplicateKeyLastWins) {
  const auto c = parse_config(std::string(kMinimal) + "[test]\nalpha = 0.1\nalpha = 0.01\n");
  EXPECT_DOUBLE_EQ(c.alpha, 0.01);
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_NE(c.warnings[0].find("test.alpha"), std::string::npos);
}

TEST(Config, UnknownKeyIsNamed) {
  const auto e = error_of(std::string(kMinimal) + "[test]\nalpah = 0.1\n");
  EXPECT_NE(e.find("test.alpah"), std::string::npos);
  EXPECT_NE(error_of("[nul]\nfamily = normal\n").find("nul"), std::string::npos);
}

TEST(Config, MalformedNumberHasLine) {
  const auto e = error_of(std::string(kMinimal) + "[test]\ngrid = 4o1\n");
  EXPECT_NE(e.find("line 10"), std::string::npos) << e;
  EXPECT_NE(e.find("4o1"), std::string::npos);
}

TEST(Config, MissingRequiredKey) {
  EXPECT_NE(error_of("[null]\nfamily = normal\nsupports = 0\n[perturbation]\nfamily = normal\n").find("perturbation"),
            std::string::npos);
  EXPECT_NE(error_of("[perturbation]\nfamily = normal\nlower = 0\nupper = 1\n").find("null.family"),
            std::string::npos);
}

TEST(Config, FamilyMismatchAndBounds) {
  EXPECT_NE(error_of("[null]\nfamily = normal\nsupports = 0\n[perturbation]\nfamily = poisson\nlower = 0\nupper = 1\n"),
            "");
  EXPECT_NE(error_of("[null]\nfamily = normal\nsupports = 0\n[perturbation]\nfamily = normal\nlower = 2\nupper = 1\n"),
            "");
  EXPECT_NE(error_of("[null]\nfamily = normal\nsupports = 0\n[perturbation]\nfamily = normal\nlower = -inf\nupper = 1\n"),
            "");
}

TEST(Config, BivariateAndMixtures) {
  const auto c = parse_config(
      "[null]\nfamily = normal\ndim = 2\nsupports = 0 0\n[perturbation]\nfamily = normal\nradius = 2\n");
  EXPECT_EQ(c.domain->shape(), ThetaDomain::Shape::Disk);
  EXPECT_EQ(c.family().param_dim(), 2);

  const auto m = parse_config(
      "[null]\nfamily = normal\nestimation = weights_and_supports\nsupports = -2, 2\nweights = 0.3, 0.7\n"
      "[perturbation]\nfamily = normal\nlower = -4\nupper = 4\n");
  const auto null = m.null_model();
  EXPECT_EQ(null.components(), 2u);
  EXPECT_DOUBLE_EQ(null.mixing().weights()[1], 0.7);
  EXPECT_EQ(null.estimation(), NullEstimation::WeightsAndSupports);
}

TEST(Config, ConstantsOnly) {
  const auto c = parse_config("[constants]\nkappa0 = 0\nell0 = 2\n");
  ASSERT_TRUE(c.constants.has_value());
  EXPECT_FALSE(c.has_model());
}

TEST(Csv, Univariate) {
  const auto d = parse_csv("x1\n0.5\n-1\n2e-3\n");
  EXPECT_EQ(d.dim(), 1);
  EXPECT_EQ(d.values(), (std::vector<double>{0.5, -1, 2e-3}));
}

TEST(Csv, Bivariate) {
  const auto d = parse_csv("x1,x2\n1,2\n3,4\n");
  EXPECT_EQ(d.dim(), 2);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.row(1)[0], 3.0);
}

TEST(Csv, Errors) {
  EXPECT_THROW(parse_csv("x1\n"), ConfigError);
  EXPECT_THROW(parse_csv("x1,x2\n1,2\n3\n"), ConfigError);
  EXPECT_THROW(parse_csv("y1\n1\n"), ConfigError);
  try {
    parse_csv("x1,x2\n1,2\n3,abc\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3 column 2"), std::string::npos) << e.what();
  }
}

TEST(Cli, CriticalForCaseTwoConstants) {
  TempDir dir;
  const auto cfg = dir.write("k.ini", "[constants]\nd = 1\nkappa0 = 0\nell0 = 2\n[test]\nalpha = 0.05\n");
  const auto out = dir.file("k.json");
  ASSERT_EQ(run({"critical", "--config", cfg, "--output", out}), 0);
  const auto j = Json::parse(slurp(out));
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_NEAR(j["results"]["critical_value"].get<double>(), 1.6449, 1e-4);
  for (const char* key : {"schema_version", "command", "config_echo", "results", "warnings", "wall_clock_seconds"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run({"frobnicate"}), 1);
  EXPECT_EQ(run({}), 1);
  const auto bad = dir.write("bad.ini", "[test]\nalpha = 0.9\n[constants]\nkappa0 = 1\nell0 = 2\n");
  EXPECT_EQ(run({"critical", "--config", bad}), 1);
  EXPECT_EQ(run({"critical", "--config", dir.file("missing.ini")}), 1);
  const auto cfg = dir.write("m.ini", kMinimal);
  EXPECT_EQ(run({"test", "--config", cfg}), 1);  // needs --data
  // Every observation at x = 1 while lambda = 1 puts data off the null's support.
  const auto data = dir.write("d.csv", "x1\n1\n1\n");
  const auto edge = dir.write("e.ini",
                              "[null]\nfamily = binomial2\nsupports = 1\n[perturbation]\nfamily = binomial2\n"
                              "lower = 0\nupper = 1\n");
  EXPECT_EQ(run({"test", "--config", edge, "--data", data, "--output", dir.file("o.json")}), 1);
}

TEST(Cli, ReportsAreByteIdenticalApartFromWallClock) {
  TempDir dir;
  const auto cfg = dir.write("c.ini", std::string(kMinimal) + "[mc]\nreplicates = 2000\nthresholds = 1.5, 2\n");
  const auto data = dir.write("d.csv", "x1\n0\n1\n2\n2\n1\n1\n0\n2\n");
  for (const std::string cmd : {"test", "oracle", "constants", "build"}) {
    // Same output path both times: the path is part of the echoed config.
    const auto out = dir.file(cmd + ".json");
    ASSERT_EQ(run({cmd, "-c", cfg, "-d", data, "-o", out}), 0) << cmd;
    auto ja = Json::parse(slurp(out));
    ASSERT_EQ(run({cmd, "-c", cfg, "-d", data, "-o", out}), 0) << cmd;
    auto jb = Json::parse(slurp(out));
    EXPECT_EQ(ja["command"], cmd);
    ja.erase("wall_clock_seconds");
    jb.erase("wall_clock_seconds");
    EXPECT_EQ(ja.dump(), jb.dump()) << cmd;
    // Round trip: the dump re-parses to the same document.
    EXPECT_EQ(Json::parse(ja.dump(2)), ja);
  }
}

TEST(Cli, FloatsRoundTripExactly) {
  TempDir dir;
  const auto cfg = dir.write("k.ini", "[constants]\nkappa0 = 1.2309594173407747\nell0 = 4\n[test]\nalpha = 0.05\n");
  const auto out = dir.file("k.json");
  ASSERT_EQ(run({"critical", "-c", cfg, "-o", out}), 0);
  const auto j = Json::parse(slurp(out));
  const double c = j["results"]["critical_value"].get<double>();
  EXPECT_EQ(c, critical_value(0.05, make_constants(1, 1.2309594173407747, 4)));
  EXPECT_EQ(j["config_echo"]["constants"]["kappa0"].get<double>(), 1.2309594173407747);
}

TEST(Cli, SimulateSmallSuite) {
  TempDir dir;
  const auto cfg = dir.write("s.ini", "[simulate]\nmodels = 1, 3\netas = 0\nsizes = 200\nreps = 3\n[test]\ngrid = 101\n");
  const auto out = dir.file("s.json");
  ASSERT_EQ(run({"simulate", "-c", cfg, "-o", out, "--seed", "5"}), 0);
  const auto j = Json::parse(slurp(out));
  EXPECT_EQ(j["results"]["reports"].size(), 2u);
  EXPECT_EQ(j["config_echo"]["mc"]["seed"], 5);
}
