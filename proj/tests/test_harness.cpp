#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "evoclim/error.hpp"
#include "evoclim/harness.hpp"

using namespace evoclim;
namespace fs = std::filesystem;

namespace {

Scenario parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

std::string field_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("evoclim_test_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("config parsing with sections, comments and dotted keys") {
  const auto s = parse(R"(
name = demo   # trailing comment
seed = 12345678901234
engines = analytic, ibm
init.kind = dirac
init.x1 = 0.25

[params]
n = 2
lambda = 0.01
mu = 0.02

[trajectory]
kind = sin
delta_max = 0.3
omega = 0.05

[times]
t_end = 200
step = 10

[ibm]
N = 50
replicates = 7
)");
  CHECK(s.name == "demo");
  CHECK(s.seed == 12345678901234ull);
  CHECK(s.run_analytic);
  CHECK(s.run_ibm);
  CHECK_FALSE(s.run_ide);
  CHECK(s.params.n == 2);
  CHECK(s.params.mu() == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(s.trajectory.kind == "sin");
  CHECK(s.init.kind == "dirac");
  CHECK(s.init.x1 == 0.25);
  CHECK(s.ibm_replicates == 7);
  CHECK(s.times().size() == 21);
}

TEST_CASE("validation errors name the field") {
  CHECK(field_of("[trajectory]\nkind = wobble\n") == "trajectory.kind");
  CHECK(field_of("[params]\nlambda = fast\n") == "params.lambda");
  CHECK(field_of("[params]\nbogus = 1\n") == "params.bogus");
  CHECK(field_of("engines = analytic, telepathy\n") == "engines");
  CHECK(field_of("[params]\nlambda = -1\n") == "params.lambda");
  CHECK(field_of("[trajectory]\nkind = power\nalpha = 1\n") == "trajectory.alpha");
  CHECK(field_of("engines = ibm\n[times]\nstep = 2.5\n") == "times.step");
  CHECK(field_of("engines = ide\n[params]\nn = 1\n[ide]\nsolver = pde\n") == "ide.solver");
  CHECK(field_of("engines = analytic\n[params]\nU = 0\n") == "params.U");
  CHECK(field_of("[params\n") == "");
  CHECK_THROWS_AS(parse("just some words\n"), ConfigError);
}

TEST_CASE("canonical config text round-trips") {
  for (const auto& name : preset_names()) {
    const auto a = preset(name);
    const auto text = to_config(a);
    const auto b = parse(text);
    CHECK(to_config(b) == text);
    CHECK(b.params.U == a.params.U);
    CHECK(b.trajectory.omega == a.trajectory.omega);
    CHECK(b.trajectory.delta_max == a.trajectory.delta_max);
  }
}

TEST_CASE("figure presets") {
  const auto a = preset("fig2a");
  CHECK(a.params.n == 3);
  CHECK(a.params.lambda == 0.005);
  CHECK(a.params.U == doctest::Approx(0.1125).epsilon(1e-14));
  CHECK(a.params.mu() == doctest::Approx(0.0237171).epsilon(1e-5));
  CHECK(a.trajectory.kind == "linear");
  CHECK(a.trajectory.c == doctest::Approx(0.0063262).epsilon(1e-5));
  CHECK(a.ibm_N == 10000);
  CHECK(a.ibm_replicates == 1000);
  CHECK(a.init.kind == "clonal");

  const auto c = preset("fig2c");
  CHECK(c.trajectory.kind == "sin2");
  CHECK(c.trajectory.delta_max == doctest::Approx(0.7071068).epsilon(1e-7));
  CHECK(c.trajectory.omega == doctest::Approx(0.02371708245126284 * M_PI).epsilon(1e-14));
  CHECK(c.trajectory.omega == doctest::Approx(0.0745068).epsilon(1e-4));
  CHECK(c.ibm_N == 1000);

  const auto d = preset("fig2d");
  CHECK(d.trajectory.c == a.trajectory.c);
  CHECK(d.trajectory.delta_max == preset("fig2b").trajectory.delta_max);

  const auto f3a = preset("fig3a");
  CHECK(f3a.params.mu() == doctest::Approx(0.0075).epsilon(1e-12));
  CHECK(f3a.trajectory.kind == "ou");
  CHECK(f3a.trajectory.nu == 0.01);
  CHECK(f3a.trajectory.beta == 0.1);
  CHECK(preset("fig3b").params.U == doctest::Approx(10.0 * f3a.params.U));

  try {
    preset("fig9");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "preset");
  }
}

TEST_CASE("OU presets feed the same realized path to every engine") {
  const auto s = preset("fig3b");
  const auto a = s.trajectory.build(s.seed, s.t_end);
  const auto b = s.trajectory.build(s.seed, s.t_end);
  CHECK(std::get<traj::Tabulated>(a.variant()).values == std::get<traj::Tabulated>(b.variant()).values);
  CHECK(a.horizon() >= s.t_end);
}

TEST_CASE("single-point analytic scenario") {
  const auto s = parse("[times]\nt_end = 0\nstep = 1\n[trajectory]\nkind = linear\nc = 0\n");
  const auto r = run_scenario(s);
  REQUIRE(r.analytic);
  CHECK(r.analytic->times == std::vector<double>{0.0});
  CHECK(r.analytic->mbar == std::vector<double>{0.0});
  CHECK_FALSE(r.ibm);
  CHECK(r.deviations.empty());
}

TEST_CASE("cross-engine run, outputs and byte-identical reruns") {
  auto s = parse(R"(
name = small
seed = 99
engines = analytic, ibm, ide
[params]
n = 2
[trajectory]
kind = linear
c = 0.003
[times]
t_end = 40
step = 10
[ibm]
N = 100
replicates = 30
[ide]
M1 = 64
Mr = 32
)");
  const auto dir1 = scratch_dir("run1"), dir2 = scratch_dir("run2");
  const auto r = run_scenario(s);
  write_outputs(r, dir1.string());
  write_outputs(run_scenario(s), dir2.string());

  for (const char* f : {"analytic.csv", "ibm.csv", "ide.csv", "combined.csv", "report.json", "figure.svg",
                        "analytic.csv.json", "ibm.csv.json"}) {
    REQUIRE(fs::exists(dir1 / f));
    CHECK(slurp(dir1 / f) == slurp(dir2 / f));
  }

  for (const auto& d : r.deviations) {
    CHECK(d.sup >= 0.0);
    CHECK(d.mean >= 0.0);
  }
  REQUIRE(r.coverage);
  CHECK(*r.coverage >= 0.0);
  CHECK(*r.coverage <= 1.0);

  // combined analytic column is the standalone engine output, digit for digit
  std::istringstream combined(slurp(dir1 / "combined.csv")), standalone(slurp(dir1 / "analytic.csv"));
  std::string lc, ls;
  std::getline(combined, lc);
  std::getline(standalone, ls);
  while (std::getline(standalone, ls)) {
    REQUIRE(std::getline(combined, lc));
    const auto fields = [](const std::string& line) {
      std::vector<std::string> out;
      std::stringstream ss(line);
      std::string x;
      while (std::getline(ss, x, ',')) out.push_back(x);
      return out;
    };
    CHECK(fields(lc)[1] == fields(ls)[1]);
  }

  const auto meta = nlohmann::json::parse(slurp(dir1 / "ibm.csv.json"));
  CHECK(meta["scenario"]["params"]["n"] == 2);
  CHECK(meta["scenario"]["ibm"]["N"] == 100);
  CHECK(meta["scenario"]["seed"] == 99);
  const auto report = nlohmann::json::parse(slurp(dir1 / "report.json"));
  CHECK(report["deviations"].size() == r.deviations.size());
  CHECK(report["asymptotics"]["mutation_load"].get<double>() == doctest::Approx(-s.params.mu()));

  const auto svg = slurp(dir1 / "figure.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polygon") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("engine failures carry the engine name") {
  auto s = parse("engines = ide\n[params]\nn = 1\nU = 50\n[times]\nt_end = 1\nstep = 1\n[ide]\nM = 1024\n");
  try {
    run_scenario(s);
    FAIL("expected an engine error");
  } catch (const EngineError& e) {
    CHECK(e.engine() == "ide");
  }
}

TEST_CASE("value lists and sweeps") {
  CHECK(parse_values("1, 2.5,3") == std::vector<double>{1.0, 2.5, 3.0});
  const auto r = parse_values("0.01:0.001:0.05");
  CHECK(r.size() == 41);
  CHECK(r.back() == doctest::Approx(0.05));
  CHECK_THROWS_AS(parse_values("1:0:2"), ConfigError);
  CHECK(parabolic_vertex(-1.0, 1.0, 0.5, 0.25, 2.0, 4.0) == doctest::Approx(0.0).epsilon(1e-14));

  const auto base = parse("[trajectory]\nkind = sin\ndelta_max = 0.3\nomega = 0.01\n");
  const auto sw = sweep(base, "trajectory.omega", parse_values("0.01:0.01:0.2"));
  for (std::size_t k = 1; k < sw.rows.size(); ++k) CHECK(sw.rows[k].mbar_inf < sw.rows[k - 1].mbar_inf);
  CHECK_THROWS_AS(sweep(base, "name", {1.0}), ConfigError);

  std::ostringstream csv;
  write_sweep_csv(csv, sw);
  CHECK(csv.str().rfind("value,mbar_inf,vm_inf\n", 0) == 0);
}
