#pragma once
// Scenario configuration, figure presets, cross-engine runs and exports.
//
// Config files are flat `key = value` text. `[section]` headers prefix the
// keys that follow (`[params]` then `n = 3` is `params.n = 3`); `#` starts a
// comment. See docs/config.md for the schema.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoclim/analytic.hpp"
#include "evoclim/environment.hpp"
#include "evoclim/ibm.hpp"
#include "evoclim/ide.hpp"

namespace evoclim {

/// Trajectory as written in a config; `build` realizes it.
struct TrajectorySpec {
  std::string kind = "linear";  // linear|power|sin|sin2|linear_sin|tabulated|ou
  double c = 0.0;
  double alpha = 1.0;
  double delta_max = 0.0;
  double omega = 0.0;
  std::string file;           // tabulated: CSV with header t,delta
  double nu = 0.0;            // ou: mean reversion
  double beta = 0.0;          // ou: noise amplitude
  double dt = 0.1;            // ou: Euler-Maruyama step
  double horizon = 0.0;       // ou: 0 means times.t_end

  EnvTrajectory build(std::uint64_t seed, double t_end) const;
};

struct InitSpec {
  std::string kind = "clonal";  // clonal|dirac|gaussian
  double x1 = 0.0;              // dirac: u.x*
  double norm2 = 0.0;           // dirac: |x*|^2 (defaults to x1^2)
  double a = 0.0;               // gaussian: mean along u
  double sigma2 = 0.0;          // gaussian: variance per trait

  InitialCondition build() const;
};

struct Scenario {
  std::string name = "scenario";
  ModelParams params;
  TrajectorySpec trajectory;
  InitSpec init;
  bool run_analytic = true;
  bool run_ibm = false;
  bool run_ide = false;
  double t_end = 1000.0;
  double step = 5.0;
  std::uint64_t seed = 1;
  // analytic
  bool variance = false;
  bool skewness = false;
  // ibm
  std::size_t ibm_N = 1000;
  std::size_t ibm_replicates = 1000;
  // ide
  std::string ide_solver = "auto";  // auto|ide1d|pde
  double ide_dt = 0.05;
  std::size_t ide_M = 4096;
  std::size_t ide_M1 = 512;
  std::size_t ide_Mr = 256;
  std::string output_dir = "out";

  /// Field-level checks; throws ConfigError naming the key.
  void validate() const;
  std::vector<double> times() const;
};

Scenario parse_scenario(std::istream& in);
/// Applies one `key = value` assignment (dotted key) on top of `s`.
void apply_setting(Scenario& s, const std::string& key, const std::string& value);
Scenario load_scenario(const std::string& path);
/// Canonical config text with every field resolved; parses back to the same scenario.
std::string to_config(const Scenario& s);

/// fig2a|fig2b|fig2c|fig2d|fig3a|fig3b
Scenario preset(const std::string& name);
std::vector<std::string> preset_names();

struct Deviation {
  std::string a, b;
  double sup = 0.0;   // max |mbar_a - mbar_b| over shared times
  double mean = 0.0;  // time average of |mbar_a - mbar_b|
  double rel_sup = 0.0;  // sup divided by max |mbar_a|
};

struct ComparisonReport {
  Scenario scenario;
  std::optional<MomentTrajectory> analytic;
  std::optional<ReplicateStats> ibm;
  std::optional<MomentTrajectory> ide;
  /// Analytic mean fitness started from the grid solver's initial density.
  std::optional<MomentTrajectory> analytic_ide_init;
  std::vector<Deviation> deviations;
  std::optional<double> coverage;  // analytic inside the IBM quantile band
  AsymptoticSummary asymptotics;
  bool has_asymptotics = false;
  std::vector<std::string> warnings;
};

/// Runs the selected engines. Engine failures are rethrown as EngineError.
ComparisonReport run_scenario(const Scenario& s);

class EngineError : public std::runtime_error {
 public:
  EngineError(std::string engine, const std::string& what)
      : std::runtime_error(engine + ": " + what), engine_(std::move(engine)) {}
  const std::string& engine() const noexcept { return engine_; }

 private:
  std::string engine_;
};

/// Writes analytic.csv, ibm.csv, ide.csv, combined.csv (and .json sidecars),
/// report.json and figure.svg into `dir`.
void write_outputs(const ComparisonReport& report, const std::string& dir);
std::string report_json(const ComparisonReport& report);
std::string render_svg(const ComparisonReport& report);
void write_combined_csv(std::ostream& out, const ComparisonReport& report);

/// Parses `a,b,c` or `lo:step:hi`.
std::vector<double> parse_values(const std::string& text);

struct SweepRow {
  double value = 0.0;
  double mbar_inf = 0.0;  // limit, or period average
  double vm_inf = 0.0;    // NaN where not available
};

struct SweepResult {
  std::string axis;
  std::vector<SweepRow> rows;
  std::optional<double> argmax_mbar;  // parabolic refinement of an interior maximum
  std::optional<double> argmin_vm;    // parabolic refinement of an interior minimum
};

/// Sweeps one scalar field (params.n|lambda|U|mu|r_max, trajectory.c|alpha|
/// delta_max|omega) through the analytic asymptotics.
SweepResult sweep(const Scenario& base, const std::string& axis, const std::vector<double>& values);
void write_sweep_csv(std::ostream& out, const SweepResult& result);
/// Vertex of the parabola through three points (x ascending).
double parabolic_vertex(double x0, double y0, double x1, double y1, double x2, double y2);

}  // namespace evoclim
