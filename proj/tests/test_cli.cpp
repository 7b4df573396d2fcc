#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlslab/cli.hpp"

using namespace nlslab;
using namespace nlslab::cli;
namespace fs = std::filesystem;

namespace {

const char* kSmallNls = R"(# small NLS run
[equation]
kind = NLS
N = 3
p = 3

[grid]
R_max = 30
J = 512

[sim]
dt = 2e-3
t_end = 0.5
output_every = 10

[initial]
kind = SCALED_GROUND_STATE
scale = 0.5

[diagnostics]
radii = 5, 10
eps = 0.05
)";

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("nlslab_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string write(const std::string& file, const std::string& text) const {
    std::ofstream(dir / file) << text;
    return (dir / file).string();
  }
  std::string out(const std::string& sub = "out") const { return (dir / sub).string(); }
};

struct Invocation {
  int code;
  std::string out, err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "nlslab");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string expect_config_error(const std::string& text) {
  try {
    build_run_config(parse_ini(text, "cfg.ini"));
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError for:\n" << text;
  return "";
}

class EnvGuard {
 public:
  EnvGuard() { unsetenv(kOutEnv); }
  ~EnvGuard() { unsetenv(kOutEnv); }
};

}  // namespace

TEST(Ini, SectionsKeysAndComments) {
  const auto doc = parse_ini("; header\n[a]\nx = 1  # trailing\n\n[b]\ny=two words\n", "f");
  ASSERT_EQ(doc.sections.size(), 2u);
  EXPECT_EQ(doc.sections.at("a").at("x").text, "1");
  EXPECT_EQ(doc.sections.at("a").at("x").line, 3);
  EXPECT_EQ(doc.sections.at("b").at("y").text, "two words");
}

TEST(Ini, SyntaxErrorsCarryLineNumbers) {
  auto msg = [](const std::string& text) {
    try {
      parse_ini(text, "f.ini");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_EQ(msg("[a]\nx 1\n").rfind("f.ini:2:", 0), 0u);
  EXPECT_EQ(msg("x = 1\n").rfind("f.ini:1:", 0), 0u);
  EXPECT_EQ(msg("[a]\nx = 1\nx = 2\n").rfind("f.ini:3:", 0), 0u);
  EXPECT_EQ(msg("[a\n").rfind("f.ini:1:", 0), 0u);
}

TEST(RunConfig, DefaultsWithoutAnyConfig) {
  const auto rc = build_run_config(ConfigDocument{});
  EXPECT_EQ(rc.spec, EquationSpec::nls(3, Rational(3)));
  EXPECT_EQ(rc.J, 4096);
  EXPECT_DOUBLE_EQ(rc.R_max, 60.0);
  EXPECT_DOUBLE_EQ(rc.sim.dt, 5e-4);
  EXPECT_EQ(rc.init.kind, InitialKind::SCALED_GROUND_STATE);
}

TEST(RunConfig, ParsesEverySection) {
  const auto rc = build_run_config(parse_ini(std::string(kSmallNls) + R"(
[sweep]
scales = 0.25, 0.75
[ground]
path = gs/q
max_iterations = 77
[verify]
seed = 9
ground_J = 1024
)", "cfg.ini"));
  EXPECT_EQ(rc.J, 512);
  EXPECT_DOUBLE_EQ(rc.sim.t_end, 0.5);
  EXPECT_EQ(rc.sim.output_every, 10);
  EXPECT_DOUBLE_EQ(rc.init.scale, 0.5);
  EXPECT_EQ(rc.radii, (std::vector<double>{5, 10}));
  EXPECT_EQ(rc.sweep_scales, (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(rc.ground_path, "gs/q");
  EXPECT_EQ(rc.ground_max_iterations, 77);
  EXPECT_EQ(rc.verify.seed, 9u);
  EXPECT_EQ(rc.verify.ground_J, 1024);
}

TEST(RunConfig, GhartreeNeedsGamma) {
  const auto msg = expect_config_error("[equation]\nkind = GHARTREE\nN = 3\np = 3\n");
  EXPECT_NE(msg.find("gamma"), std::string::npos);
  const auto rc = build_run_config(parse_ini("[equation]\nkind = GHARTREE\nN = 3\np = 3\ngamma = 2\n"));
  EXPECT_EQ(rc.spec, EquationSpec::ghartree(3, Rational(3), Rational(2)));
}

TEST(RunConfig, SemanticErrorsPointAtTheLine) {
  EXPECT_EQ(expect_config_error("[grid]\nJ = 8\n").rfind("cfg.ini:2:", 0), 0u);
  EXPECT_EQ(expect_config_error("[sim]\n\ndt = fast\n").rfind("cfg.ini:3:", 0), 0u);
  EXPECT_EQ(expect_config_error("[sim]\nsponge = maybe\n").rfind("cfg.ini:2:", 0), 0u);
  EXPECT_EQ(expect_config_error("[grid]\nR_max = 30\nJJ = 5\n").rfind("cfg.ini:3:", 0), 0u);
  EXPECT_EQ(expect_config_error("[grid]\nR_max = 30\n[diagnostics]\nradii = 5, 40\n").rfind("cfg.ini:4:", 0), 0u);
  EXPECT_EQ(expect_config_error("[initial]\nkind = FILE\npath = /nonexistent/u.txt\n").rfind("cfg.ini:3:", 0), 0u);
  EXPECT_EQ(expect_config_error("[initial]\nkind = SPLINE\n").rfind("cfg.ini:2:", 0), 0u);
  EXPECT_NE(expect_config_error("[extras]\nx = 1\n").find("unknown section"), std::string::npos);
  EXPECT_NE(expect_config_error("[equation]\nkind = NLS\nN = 2\np = 3\n").find("cfg.ini:2:"), std::string::npos);
}

TEST(RunConfig, SimInvariantsRejected) {
  EXPECT_NE(expect_config_error("[sim]\ndt = -1\n").find("[sim]"), std::string::npos);
  EXPECT_NE(expect_config_error("[grid]\nR_max = 12\n[diagnostics]\nradii = 1\n[sim]\nsponge = true\nsponge_width = 20\n").find("[sim]"),
            std::string::npos);
}

TEST(RunConfig, JsonMatchesIni) {
  const auto ini = build_run_config(parse_ini(kSmallNls));
  const auto json = build_run_config(parse_json_config(R"({
    "equation": {"kind": "NLS", "N": 3, "p": "3"},
    "grid": {"R_max": 30, "J": 512},
    "sim": {"dt": 2e-3, "t_end": 0.5, "output_every": 10},
    "initial": {"kind": "SCALED_GROUND_STATE", "scale": 0.5},
    "diagnostics": {"radii": [5, 10], "eps": [0.05]}
  })"));
  EXPECT_EQ(config_hash(ini), config_hash(json));
  try {
    parse_json_config("{\n\"grid\": {\n\"J\": 5,,\n}}", "c.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("c.json:3:", 0), 0u) << e.what();
  }
}

TEST(Provenance, HashTracksResultsNotOutputLocation) {
  auto a = build_run_config(parse_ini(kSmallNls));
  auto b = a;
  b.out_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.sim.dt = 1e-3;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Command, CriticalityPrintsJson) {
  Scratch s("crit");
  const auto r = invoke({"criticality", "--config", s.write("c.ini", kSmallNls)});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["s_exact"], "1/2");
  EXPECT_EQ(j["classification"], "INTERCRITICAL");
  EXPECT_EQ(j["admissible"], true);
  EXPECT_EQ(j["provenance"]["version"], kVersion);
}

TEST(Command, ExitCodes) {
  EnvGuard env;
  Scratch s("codes");
  EXPECT_EQ(invoke({}).code, kConfigError);
  EXPECT_EQ(invoke({"bogus"}).code, kConfigError);
  EXPECT_EQ(invoke({"ground", "--config", (s.dir / "missing.ini").string()}).code, kConfigError);
  EXPECT_EQ(invoke({"ground", "--config", s.write("bad.ini", "[grid]\nJ = x\n")}).code, kConfigError);
  EXPECT_EQ(invoke({"--help"}).code, kOk);
  // Mass-critical spec: valid but no ground state in the intercritical family.
  const auto crit = s.write("mc.ini", "[equation]\nkind = NLS\nN = 3\np = 7/3\n[grid]\nR_max = 30\nJ = 256\n");
  EXPECT_EQ(invoke({"criticality", "--config", crit}).code, kOk);
  EXPECT_EQ(invoke({"ground", "--config", crit, "--out", s.out()}).code, kConfigError);
  // Iteration cap too small to converge.
  const auto capped = s.write("cap.ini", std::string(kSmallNls) + "[ground]\nmax_iterations = 3\n");
  EXPECT_EQ(invoke({"ground", "--config", capped, "--out", s.out()}).code, kNonConvergence);
  // classify needs the sidecar written by ground.
  const auto cls = invoke({"classify", "--config", s.write("c.ini", kSmallNls), "--out", s.out("fresh")});
  EXPECT_EQ(cls.code, kConfigError);
  EXPECT_NE(cls.err.find("nlslab ground"), std::string::npos);
}

TEST(Command, NaNGuardExit) {
  Scratch s("nan");
  const auto cfg = s.write("blow.ini", R"(
[grid]
R_max = 20
J = 256
[sim]
dt = 1e-2
t_end = 5
growth_limit = 2
[initial]
kind = GAUSSIAN
amplitude = 8
width = 0.6
)");
  EXPECT_EQ(invoke({"evolve", "--config", cfg, "--out", s.out()}).code, kNaNGuard);
}

TEST(Command, GroundIsDeterministicAndCarriesProvenance) {
  EnvGuard env;
  Scratch s("ground");
  const auto cfg = s.write("c.ini", kSmallNls);
  ASSERT_EQ(invoke({"ground", "--config", cfg, "--out", s.out("a")}).code, kOk);
  ASSERT_EQ(invoke({"ground", "--config", cfg, "--out", s.out("b")}).code, kOk);
  EXPECT_EQ(slurp(s.dir / "a" / "ground.bin"), slurp(s.dir / "b" / "ground.bin"));
  EXPECT_EQ(slurp(s.dir / "a" / "ground.json"), slurp(s.dir / "b" / "ground.json"));
  const auto rc = load_run_config(cfg);
  EXPECT_EQ(read_profile_trailer((s.dir / "a" / "ground.bin").string()), provenance_line(rc));
  const auto j = nlohmann::json::parse(slurp(s.dir / "a" / "ground.json"));
  EXPECT_EQ(j["provenance"]["config_hash"], config_hash(rc));
  const auto gs = load_ground_state((s.dir / "a" / "ground").string());
  EXPECT_EQ(gs.spec, rc.spec);
}

TEST(Command, OutputDirectoryPrecedence) {
  EnvGuard env;
  Scratch s("outdir");
  const auto cfg = s.write("c.ini", std::string(kSmallNls) + "out = " + s.out("from_config") + "\n");
  ASSERT_EQ(invoke({"ground", "--config", cfg}).code, kOk);
  EXPECT_TRUE(fs::exists(s.dir / "from_config" / "ground.json"));
  setenv(kOutEnv, s.out("from_env").c_str(), 1);
  ASSERT_EQ(invoke({"ground", "--config", cfg}).code, kOk);
  EXPECT_TRUE(fs::exists(s.dir / "from_env" / "ground.json"));
  ASSERT_EQ(invoke({"ground", "--config", cfg, "--out", s.out("from_flag")}).code, kOk);
  EXPECT_TRUE(fs::exists(s.dir / "from_flag" / "ground.json"));
}

TEST(Command, EvolveWritesSeriesSummaryAndSnapshots) {
  EnvGuard env;
  Scratch s("evolve");
  const auto cfg = s.write("c.ini", std::string(kSmallNls) + "snapshot_every = 10\n");
  const auto r = invoke({"evolve", "--config", cfg, "--out", s.out()});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto rc = load_run_config(cfg);
  const auto csv = slurp(s.dir / "out" / "series.csv");
  EXPECT_EQ(csv.rfind("# " + provenance_line(rc) + "\n", 0), 0u);
  const auto j = nlohmann::json::parse(slurp(s.dir / "out" / "summary.json"));
  EXPECT_EQ(j["provenance"]["config_hash"], config_hash(rc));
  EXPECT_LT(j["mass_drift"].get<double>(), 1e-8);
  EXPECT_EQ(j["classification"]["verdict"], "SCATTER_PREDICTED");
  EXPECT_EQ(j["radii"].size(), 2u);
  EXPECT_TRUE(j["radii"][0]["identity_residual"].is_number());
  // The ground state computed on the way is reused by classify.
  EXPECT_TRUE(fs::exists(s.dir / "out" / "ground.json"));
  EXPECT_EQ(invoke({"classify", "--config", cfg, "--out", s.out()}).code, kOk);
  EXPECT_TRUE(fs::exists(s.dir / "out" / "classify.json"));
  std::size_t snaps = 0;
  for (const auto& e : fs::directory_iterator(s.dir / "out" / "snapshots")) {
    ++snaps;
    EXPECT_EQ(read_profile_trailer(e.path().string()), provenance_line(rc));
  }
  EXPECT_GE(snaps, 2u);
}

TEST(Command, EvolveLinearAllowsInadmissibleSpec) {
  EnvGuard env;
  Scratch s("linear");
  const auto cfg = s.write("c.ini", R"(
[equation]
kind = NLS
N = 3
p = 2
[grid]
R_max = 30
J = 512
[sim]
dt = 2e-3
t_end = 0.2
[initial]
kind = GAUSSIAN
)");
  EXPECT_EQ(invoke({"evolve", "--config", cfg, "--out", s.out("a")}).code, kConfigError);
  const auto r = invoke({"evolve", "--config", cfg, "--out", s.out("b"), "--linear"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto j = nlohmann::json::parse(slurp(s.dir / "b" / "summary.json"));
  EXPECT_EQ(j["linear"], true);
  EXPECT_FALSE(j.contains("classification"));
}

TEST(Command, EvolveFromFile) {
  EnvGuard env;
  Scratch s("file");
  const auto g = make_grid(3, 30.0, 512);
  write_profile_text(RadialProfile::from_function(g, [](double r) { return 0.3 * std::exp(-r * r); }),
                     (s.dir / "u0.txt").string());
  // Relative paths resolve against the config file's directory.
  const auto cfg = s.write("c.ini", "[grid]\nR_max = 30\nJ = 512\n[sim]\ndt = 2e-3\nt_end = 0.1\n"
                                    "[initial]\nkind = FILE\npath = u0.txt\n");
  const auto r = invoke({"evolve", "--config", cfg, "--out", s.out()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_FALSE(fs::exists(s.dir / "out" / "ground.json"));
  const auto wrong = s.write("w.ini", "[grid]\nR_max = 30\nJ = 256\n[initial]\nkind = FILE\npath = u0.txt\n");
  EXPECT_EQ(invoke({"evolve", "--config", wrong, "--out", s.out()}).code, kConfigError);
}

TEST(Command, SweepIsDeterministicAcrossThreadCounts) {
  EnvGuard env;
  Scratch s("sweep");
  const auto cfg = s.write("c.ini", std::string(kSmallNls) + "[sweep]\nscales = 0.3, 0.5, 1.1\n");
  ASSERT_EQ(invoke({"sweep", "--config", cfg, "--out", s.out("one"), "--threads", "1"}).code, kOk);
  ASSERT_EQ(invoke({"sweep", "--config", cfg, "--out", s.out("three"), "--threads", "3"}).code, kOk);
  EXPECT_EQ(slurp(s.dir / "one" / "sweep_summary.csv"), slurp(s.dir / "three" / "sweep_summary.csv"));
  EXPECT_EQ(slurp(s.dir / "one" / "sweep_summary.json"), slurp(s.dir / "three" / "sweep_summary.json"));
  EXPECT_EQ(slurp(s.dir / "one" / "sweep" / "c_0.5" / "series.csv"),
            slurp(s.dir / "three" / "sweep" / "c_0.5" / "series.csv"));
  const auto j = nlohmann::json::parse(slurp(s.dir / "one" / "sweep_summary.json"));
  ASSERT_EQ(j["rows"].size(), 3u);
  EXPECT_EQ(j["rows"][0]["verdict"], "SCATTER_PREDICTED");
  EXPECT_EQ(j["rows"][2]["verdict"], "OUTSIDE_THEOREM");
  EXPECT_EQ(invoke({"sweep", "--config", cfg, "--threads", "0"}).code, kConfigError);
}

TEST(Command, EmptySweepSucceeds) {
  EnvGuard env;
  Scratch s("empty");
  const auto cfg = s.write("c.ini", std::string(kSmallNls) + "[sweep]\nscales =\n");
  ASSERT_EQ(invoke({"sweep", "--config", cfg, "--out", s.out()}).code, kOk);
  const auto j = nlohmann::json::parse(slurp(s.dir / "out" / "sweep_summary.json"));
  EXPECT_TRUE(j["rows"].empty());
  EXPECT_FALSE(fs::exists(s.dir / "out" / "ground.json"));
}

TEST(Command, VerifyFailureExitsFive) {
  EnvGuard env;
  Scratch s("verify");
  // A ground-state grid this coarse cannot meet the Pohozaev tolerance.
  const auto cfg = s.write("c.ini", std::string(kSmallNls) + R"(
[verify]
ground_R_max = 20
ground_J = 128
weinstein_samples = 5
sobolev_samples = 5
morawetz_t_end = 0.5
)");
  const auto r = invoke({"verify", "--config", cfg, "--out", s.out()});
  EXPECT_EQ(r.code, kVerifyFailed);
  EXPECT_NE(r.out.find("FAIL  ground.NLS.p3.pohozaev1"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(s.dir / "out" / "verify.json"));
  EXPECT_EQ(j["passed"], false);
  for (const auto& c : j["checks"]) EXPECT_FALSE(c["anchor"].get<std::string>().empty());
}

TEST(Verify, CorruptedGroundStateFailsPohozaev) {
  auto gs = solve_ground(EquationSpec::nls(3, Rational(3)), make_grid(3, 20.0, 49152));
  EXPECT_TRUE(all_passed(check_ground_state(gs)));
  gs.Q = gs.Q.scaled(1.01);
  populate_ground_state(gs, Nonlinearity(gs.spec, gs.Q.grid_ptr()));
  const auto checks = check_ground_state(gs);
  EXPECT_FALSE(all_passed(checks));
  bool poh = false;
  for (const auto& c : checks)
    if (c.id.find("pohozaev") != std::string::npos) poh = poh || !c.passed;
  EXPECT_TRUE(poh);
}

TEST(Verify, PropertyChecksPass) {
  EXPECT_TRUE(all_passed(check_criticality_table()));
  EXPECT_TRUE(all_passed(check_threshold_function(20)));
  EXPECT_EQ(sample_admissible_specs(20).size(), 20u);
  EXPECT_TRUE(all_passed(check_cutoff_identity(10, 3)));
  EXPECT_TRUE(all_passed(check_radial_sobolev(100, 4)));
  EXPECT_TRUE(all_passed(check_weight_invariants(make_grid(3, 30.0, 1024), {2.0, 10.0})));
}

TEST(Command, CriticalityReportsInadmissibleSpec) {
  Scratch s("crit_gh");
  const auto r = invoke({"criticality", "--config", s.write("g.ini", "[equation]\nkind = GHARTREE\nN = 3\np = 2\ngamma = 2\n")});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["admissible"], false);
  EXPECT_EQ(invoke({"criticality", "--config", s.write("m.ini", "[equation]\nkind NLS\n")}).code, kConfigError);
}

TEST(Command, ClassifyZeroData) {
  EnvGuard env;
  Scratch s("zero");
  const auto cfg = s.write("z.ini", "[grid]\nR_max = 30\nJ = 512\n[initial]\nkind = GAUSSIAN\namplitude = 0\n");
  ASSERT_EQ(invoke({"ground", "--config", cfg, "--out", s.out()}).code, kOk);
  const auto r = invoke({"classify", "--config", cfg, "--out", s.out()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["verdict"], "SCATTER_PREDICTED");
}

TEST(Command, LinearRunHasDecayColumn) {
  EnvGuard env;
  Scratch s("decay");
  const auto cfg = s.write("l.ini", "[grid]\nR_max = 30\nJ = 512\n[sim]\ndt = 2e-3\nt_end = 0.1\n[initial]\nkind = GAUSSIAN\n");
  ASSERT_EQ(invoke({"evolve", "--config", cfg, "--out", s.out(), "--linear"}).code, kOk);
  const auto csv = slurp(s.dir / "out" / "series.csv");
  const auto header = csv.substr(csv.find('\n') + 1, csv.find('\n', csv.find('\n') + 1) - csv.find('\n') - 1);
  EXPECT_NE(header.find("decay"), std::string::npos) << header;
}
