#include "evoclim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "evoclim/error.hpp"

namespace evoclim {

namespace {

using json = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key, "integer out of range: '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::vector<std::string>& trajectory_kinds() {
  static const std::vector<std::string> k = {"linear", "power", "sin", "sin2", "linear_sin", "tabulated", "ou"};
  return k;
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

}  // namespace

// ---------------------------------------------------------------------------
// Specs

EnvTrajectory TrajectorySpec::build(std::uint64_t seed, double t_end) const {
  if (kind == "linear") return EnvTrajectory(traj::Linear{c});
  if (kind == "power") return EnvTrajectory(traj::Power{c, alpha});
  if (kind == "sin") return EnvTrajectory(traj::Sin{delta_max, omega});
  if (kind == "sin2") return EnvTrajectory(traj::SinSq{delta_max, omega});
  if (kind == "linear_sin") return EnvTrajectory(traj::LinearPlusSin{c, delta_max, omega});
  if (kind == "tabulated") {
    std::ifstream in(file);
    if (!in) throw ConfigError("trajectory.file", "cannot open '" + file + "'");
    return EnvTrajectory(read_trajectory_csv(in));
  }
  if (kind == "ou") {
    const double h = horizon > 0.0 ? horizon : t_end;
    // Stream 0 of the scenario seed is reserved for the environment.
    return realize_ou(nu, beta, dt, h, RngStream{seed, 0});
  }
  throw ConfigError("trajectory.kind", "unknown trajectory kind '" + kind + "'");
}

InitialCondition InitSpec::build() const {
  if (kind == "clonal") return InitialCondition::clonal();
  if (kind == "dirac") return InitialCondition(init::Dirac{x1, norm2 > 0.0 ? norm2 : x1 * x1});
  if (kind == "gaussian") return InitialCondition(init::IsotropicGaussian{a, sigma2});
  throw ConfigError("init.kind", "unknown initial condition '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Parsing

void apply_setting(Scenario& s, const std::string& key, const std::string& value) {
  const std::string& v = value;
  auto& tr = s.trajectory;
  if (key == "name") {
    s.name = v;
  } else if (key == "seed") {
    s.seed = to_u64(key, v);
  } else if (key == "engines") {
    s.run_analytic = s.run_ibm = s.run_ide = false;
    for (const auto& e : split_list(v)) {
      if (e == "analytic") s.run_analytic = true;
      else if (e == "ibm") s.run_ibm = true;
      else if (e == "ide") s.run_ide = true;
      else throw ConfigError(key, "unknown engine '" + e + "' (expected analytic, ibm, ide)");
    }
  } else if (key == "output.dir") {
    s.output_dir = v;
  } else if (key == "params.n") {
    const auto n = to_u64(key, v);
    if (n < 1 || n > 64) throw ConfigError(key, "must be an integer in [1, 64]");
    s.params.n = static_cast<int>(n);
  } else if (key == "params.lambda") {
    s.params.lambda = to_double(key, v);
  } else if (key == "params.U") {
    s.params.U = to_double(key, v);
  } else if (key == "params.mu") {
    const double mu = to_double(key, v);
    if (!(mu > 0.0)) throw ConfigError(key, "must be > 0");
    s.params.U = mu * mu / s.params.lambda;
  } else if (key == "params.U_over_Uc") {
    s.params.U = to_double(key, v) * s.params.u_c();
  } else if (key == "params.r_max") {
    s.params.r_max = to_double(key, v);
  } else if (key == "trajectory.kind") {
    if (std::find(trajectory_kinds().begin(), trajectory_kinds().end(), v) == trajectory_kinds().end()) {
      throw ConfigError(key, "unknown trajectory kind '" + v + "'");
    }
    tr.kind = v;
  } else if (key == "trajectory.c") {
    tr.c = to_double(key, v);
  } else if (key == "trajectory.alpha") {
    tr.alpha = to_double(key, v);
  } else if (key == "trajectory.delta_max") {
    tr.delta_max = to_double(key, v);
  } else if (key == "trajectory.omega") {
    tr.omega = to_double(key, v);
  } else if (key == "trajectory.file") {
    tr.file = v;
  } else if (key == "trajectory.nu") {
    tr.nu = to_double(key, v);
  } else if (key == "trajectory.beta") {
    tr.beta = to_double(key, v);
  } else if (key == "trajectory.dt") {
    tr.dt = to_double(key, v);
  } else if (key == "trajectory.horizon") {
    tr.horizon = to_double(key, v);
  } else if (key == "init.kind") {
    if (v != "clonal" && v != "dirac" && v != "gaussian") {
      throw ConfigError(key, "unknown initial condition '" + v + "' (expected clonal, dirac, gaussian)");
    }
    s.init.kind = v;
  } else if (key == "init.x1") {
    s.init.x1 = to_double(key, v);
  } else if (key == "init.norm2") {
    s.init.norm2 = to_double(key, v);
  } else if (key == "init.a") {
    s.init.a = to_double(key, v);
  } else if (key == "init.sigma2") {
    s.init.sigma2 = to_double(key, v);
  } else if (key == "times.t_end") {
    s.t_end = to_double(key, v);
  } else if (key == "times.step") {
    s.step = to_double(key, v);
  } else if (key == "analytic.moments") {
    s.variance = s.skewness = false;
    for (const auto& m : split_list(v)) {
      if (m == "mean") continue;
      if (m == "variance") s.variance = true;
      else if (m == "skewness") s.skewness = true;
      else throw ConfigError(key, "unknown moment '" + m + "' (expected mean, variance, skewness)");
    }
  } else if (key == "ibm.N") {
    s.ibm_N = to_u64(key, v);
  } else if (key == "ibm.replicates") {
    s.ibm_replicates = to_u64(key, v);
  } else if (key == "ide.solver") {
    if (v != "auto" && v != "ide1d" && v != "pde") throw ConfigError(key, "expected auto, ide1d or pde");
    s.ide_solver = v;
  } else if (key == "ide.dt") {
    s.ide_dt = to_double(key, v);
  } else if (key == "ide.M") {
    s.ide_M = to_u64(key, v);
  } else if (key == "ide.M1") {
    s.ide_M1 = to_u64(key, v);
  } else if (key == "ide.Mr") {
    s.ide_Mr = to_u64(key, v);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

Scenario parse_scenario(std::istream& in) {
  Scenario s;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    apply_setting(s, key, trim(line.substr(eq + 1)));
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  return parse_scenario(in);
}

void Scenario::validate() const {
  if (!run_analytic && !run_ibm && !run_ide) throw ConfigError("engines", "select at least one engine");
  if (params.n < 1) throw ConfigError("params.n", "must be >= 1");
  if (!(params.lambda > 0.0)) throw ConfigError("params.lambda", "must be > 0");
  if (run_analytic ? !(params.U > 0.0) : !(params.U >= 0.0)) {
    throw ConfigError("params.U", run_analytic ? "must be > 0 for the analytic engine" : "must be >= 0");
  }
  if (!(params.r_max >= 0.0)) throw ConfigError("params.r_max", "must be >= 0");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("times.t_end", "must be finite and >= 0");
  if (!(step > 0.0)) throw ConfigError("times.step", "must be > 0");

  const auto& tr = trajectory;
  if (tr.kind == "power" && (!(tr.alpha > 0.0) || tr.alpha == 1.0)) {
    throw ConfigError("trajectory.alpha", "must be > 0 and != 1 (use kind = linear for alpha = 1)");
  }
  if ((tr.kind == "sin" || tr.kind == "sin2" || tr.kind == "linear_sin") && !(tr.omega > 0.0)) {
    throw ConfigError("trajectory.omega", "must be > 0");
  }
  if (tr.kind == "tabulated" && tr.file.empty()) throw ConfigError("trajectory.file", "required for tabulated");
  if (tr.kind == "ou") {
    if (!(tr.nu >= 0.0)) throw ConfigError("trajectory.nu", "must be >= 0");
    if (!(tr.beta >= 0.0)) throw ConfigError("trajectory.beta", "must be >= 0");
    if (!(tr.dt > 0.0)) throw ConfigError("trajectory.dt", "must be > 0");
    if (tr.horizon != 0.0 && tr.horizon < t_end) {
      throw ConfigError("trajectory.horizon", "must cover times.t_end");
    }
  }
  if (init.kind == "dirac" && init.norm2 != 0.0 && init.norm2 < init.x1 * init.x1) {
    throw ConfigError("init.norm2", "must be >= x1^2");
  }
  if (init.kind == "gaussian" && !(init.sigma2 >= 0.0)) throw ConfigError("init.sigma2", "must be >= 0");

  if (run_ibm) {
    if (ibm_N < 1) throw ConfigError("ibm.N", "must be >= 1");
    if (ibm_replicates < 1) throw ConfigError("ibm.replicates", "must be >= 1");
    if (!is_integer(t_end)) throw ConfigError("times.t_end", "must be an integer number of generations for ibm");
    if (!is_integer(step)) throw ConfigError("times.step", "must be an integer number of generations for ibm");
    if (init.kind == "gaussian") throw ConfigError("init.kind", "ibm supports clonal and dirac initial conditions");
  }
  if (run_ide) {
    if (!(ide_dt > 0.0)) throw ConfigError("ide.dt", "must be > 0");
    const bool one_d = ide_solver == "ide1d" || (ide_solver == "auto" && params.n == 1);
    if (one_d && params.n != 1) throw ConfigError("ide.solver", "ide1d requires params.n = 1");
    if (!one_d && params.n < 2) throw ConfigError("ide.solver", "pde requires params.n >= 2");
    if (one_d && (ide_M < 2 || (ide_M & (ide_M - 1)) != 0)) throw ConfigError("ide.M", "must be a power of two");
    if (!one_d && (ide_M1 < 4 || ide_Mr < 4)) throw ConfigError("ide.M1", "M1 and Mr must be >= 4");
    if (init.kind == "dirac" && init.norm2 != 0.0 && init.norm2 != init.x1 * init.x1) {
      throw ConfigError("init.norm2", "grid solvers need an initial point on the optimum axis");
    }
  }
}

std::vector<double> Scenario::times() const {
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor(t_end / step + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) out.push_back(static_cast<double>(k) * step);
  if (t_end - out.back() > 1e-9 * std::max(1.0, t_end)) out.push_back(t_end);
  return out;
}

std::string to_config(const Scenario& s) {
  std::ostringstream o;
  o << "name = " << s.name << "\nseed = " << s.seed << "\nengines = ";
  std::vector<std::string> e;
  if (s.run_analytic) e.push_back("analytic");
  if (s.run_ibm) e.push_back("ibm");
  if (s.run_ide) e.push_back("ide");
  for (std::size_t i = 0; i < e.size(); ++i) o << (i ? ", " : "") << e[i];
  o << "\n\n[params]\nn = " << s.params.n << "\nlambda = " << fmt(s.params.lambda) << "\nU = " << fmt(s.params.U)
    << "\nr_max = " << fmt(s.params.r_max) << "\n";
  const auto& t = s.trajectory;
  o << "\n[trajectory]\nkind = " << t.kind << "\n";
  if (t.kind == "linear" || t.kind == "power" || t.kind == "linear_sin") o << "c = " << fmt(t.c) << "\n";
  if (t.kind == "power") o << "alpha = " << fmt(t.alpha) << "\n";
  if (t.kind == "sin" || t.kind == "sin2" || t.kind == "linear_sin") {
    o << "delta_max = " << fmt(t.delta_max) << "\nomega = " << fmt(t.omega) << "\n";
  }
  if (t.kind == "tabulated") o << "file = " << t.file << "\n";
  if (t.kind == "ou") {
    o << "nu = " << fmt(t.nu) << "\nbeta = " << fmt(t.beta) << "\ndt = " << fmt(t.dt) << "\nhorizon = "
      << fmt(t.horizon) << "\n";
  }
  o << "\n[init]\nkind = " << s.init.kind << "\n";
  if (s.init.kind == "dirac") o << "x1 = " << fmt(s.init.x1) << "\nnorm2 = " << fmt(s.init.norm2) << "\n";
  if (s.init.kind == "gaussian") o << "a = " << fmt(s.init.a) << "\nsigma2 = " << fmt(s.init.sigma2) << "\n";
  o << "\n[times]\nt_end = " << fmt(s.t_end) << "\nstep = " << fmt(s.step) << "\n";
  o << "\n[analytic]\nmoments = mean" << (s.variance ? ", variance" : "") << (s.skewness ? ", skewness" : "")
    << "\n";
  o << "\n[ibm]\nN = " << s.ibm_N << "\nreplicates = " << s.ibm_replicates << "\n";
  o << "\n[ide]\nsolver = " << s.ide_solver << "\ndt = " << fmt(s.ide_dt) << "\nM = " << s.ide_M
    << "\nM1 = " << s.ide_M1 << "\nMr = " << s.ide_Mr << "\n";
  o << "\n[output]\ndir = " << s.output_dir << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Presets

std::vector<std::string> preset_names() { return {"fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b"}; }

Scenario preset(const std::string& name) {
  Scenario s;
  s.name = name;
  s.params = ModelParams{};  // n = 3, lambda = 0.005
  s.params.U = 10.0 * s.params.u_c();
  s.run_analytic = s.run_ibm = true;
  s.run_ide = true;
  s.t_end = 1000.0;
  s.step = 5.0;
  s.ibm_replicates = 1000;
  s.ibm_N = 1000;
  s.output_dir = "out/" + name;
  const double lambda = s.params.lambda;
  auto& t = s.trajectory;
  if (name == "fig2a" || name == "fig2b" || name == "fig2c" || name == "fig2d") {
    const double mu = s.params.mu();
    const double c = std::sqrt(s.params.n * mu * mu * mu);
    if (name == "fig2a") {
      t.kind = "linear";
      t.c = c;
      s.ibm_N = 10000;
    } else if (name == "fig2b") {
      t.kind = "sin";
      t.delta_max = std::sqrt(31.0 * lambda);
      t.omega = mu * M_PI;
    } else if (name == "fig2c") {
      t.kind = "sin2";
      t.delta_max = 10.0 * std::sqrt(lambda);
      t.omega = mu * M_PI;
    } else {
      t.kind = "linear_sin";
      t.c = c;
      t.delta_max = std::sqrt(31.0 * lambda);
      t.omega = mu * M_PI;
    }
  } else if (name == "fig3a" || name == "fig3b") {
    if (name == "fig3a") s.params.U = s.params.u_c();
    t.kind = "ou";
    t.nu = 0.01;
    t.beta = 0.1;
    t.dt = 0.1;
    t.horizon = s.t_end;
  } else {
    std::string names;
    for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("preset", "unknown preset '" + name + "' (known: " + names + ")");
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Running

namespace {

Deviation compare(const std::string& an, const std::vector<double>& ta, const std::vector<double>& ma,
                  const std::string& bn, const std::vector<double>& tb, const std::vector<double>& mb) {
  Deviation d{an, bn, 0.0, 0.0, 0.0};
  double scale = 0.0, sum = 0.0;
  std::size_t count = 0, j = 0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    while (j < tb.size() && tb[j] < ta[i] - 1e-9 * std::max(1.0, ta[i])) ++j;
    if (j == tb.size()) break;
    if (std::fabs(tb[j] - ta[i]) > 1e-9 * std::max(1.0, ta[i])) continue;
    const double e = std::fabs(ma[i] - mb[j]);
    d.sup = std::max(d.sup, e);
    scale = std::max(scale, std::fabs(ma[i]));
    sum += e;
    ++count;
  }
  d.mean = count ? sum / static_cast<double>(count) : kNaN;
  d.rel_sup = scale > 0.0 ? d.sup / scale : kNaN;
  if (!count) d.sup = kNaN;
  return d;
}

IdeInit ide_init_of(const Scenario& s) {
  if (s.init.kind == "clonal") return IdeInit::near_dirac(0.0);
  if (s.init.kind == "dirac") return IdeInit::near_dirac(s.init.x1);
  return IdeInit::gaussian(s.init.a, s.init.sigma2);
}

template <class F>
auto guarded(const std::string& engine, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw EngineError(engine, e.what());
  }
}

}  // namespace

ComparisonReport run_scenario(const Scenario& s) {
  s.validate();
  ComparisonReport rep;
  rep.scenario = s;
  EnvTrajectory traj;
  try {
    traj = s.trajectory.build(s.seed, s.t_end);
  } catch (const DomainError& e) {
    throw ConfigError("trajectory", e.what());
  }
  if (traj.horizon() < s.t_end) throw ConfigError("times.t_end", "exceeds the trajectory horizon");
  const std::vector<double> times = s.times();
  const InitialCondition init = s.init.build();

  if (s.run_analytic) {
    rep.analytic = guarded("analytic", [&] {
      MomentOptions mo;
      mo.variance = s.variance || s.skewness;
      mo.skewness = s.skewness;
      return mean_fitness_trajectory(s.params, traj, init, times, mo);
    });
    for (const auto& w : rep.analytic->warnings) rep.warnings.push_back("analytic: " + w);
  }
  if (s.run_ibm) {
    rep.ibm = guarded("ibm", [&] {
      IbmConfig cfg;
      cfg.N = s.ibm_N;
      cfg.T = std::llround(s.t_end);
      cfg.replicates = s.ibm_replicates;
      // Streams 1.. of the scenario seed; stream 0 belongs to the environment.
      cfg.base_stream = RngStream{s.seed, 1};
      cfg.record_every = std::llround(s.step);
      if (s.init.kind == "dirac") {
        cfg.x0.assign(static_cast<std::size_t>(s.params.n), 0.0);
        cfg.x0[0] = s.init.x1;
        const double norm2 = s.init.norm2 > 0.0 ? s.init.norm2 : s.init.x1 * s.init.x1;
        if (s.params.n > 1) cfg.x0[1] = std::sqrt(std::max(0.0, norm2 - s.init.x1 * s.init.x1));
      }
      return run_replicates(s.params, traj, cfg);
    });
  }
  if (s.run_ide) {
    const IdeInit ii = ide_init_of(s);
    rep.ide = guarded("ide", [&] {
      IdeOptions opt;
      opt.record_every = s.step;
      IdeResult r;
      if (s.params.n == 1) {
        r = solve_ide_1d(s.params, traj, ii, s.t_end, default_grid_1d(s.params, traj, s.t_end, ii, s.ide_M),
                         s.ide_dt, opt);
      } else {
        r = solve_pde_reduced(s.params, traj, ii, s.t_end,
                              default_grid_reduced(s.params, traj, s.t_end, ii, s.ide_M1, s.ide_Mr), s.ide_dt, opt);
      }
      return r.moments;
    });
    for (const auto& w : rep.ide->warnings) rep.warnings.push_back("ide: " + w);
    if (s.params.U > 0.0) {
      rep.analytic_ide_init = guarded("analytic", [&] {
        MomentOptions mo;
        mo.variance = mo.skewness = false;
        const InitialCondition g(init::IsotropicGaussian{ii.mean, ii.variance(s.params)});
        return mean_fitness_trajectory(s.params, traj, g, rep.ide->times, mo);
      });
    }
  }

  if (rep.analytic && rep.ibm) {
    rep.deviations.push_back(
        compare("analytic", rep.analytic->times, rep.analytic->mbar, "ibm", rep.ibm->times, rep.ibm->mean_mbar));
    std::size_t inside = 0, total = 0, j = 0;
    const auto& ta = rep.analytic->times;
    for (std::size_t k = 0; k < rep.ibm->times.size(); ++k) {
      const double t = rep.ibm->times[k];
      while (j < ta.size() && ta[j] < t - 1e-9) ++j;
      if (j == ta.size() || std::fabs(ta[j] - t) > 1e-9) continue;
      ++total;
      const double m = rep.analytic->mbar[j];
      if (m >= rep.ibm->q025[k] && m <= rep.ibm->q975[k]) ++inside;
    }
    if (total) rep.coverage = static_cast<double>(inside) / static_cast<double>(total);
  }
  if (rep.analytic && rep.ide) {
    rep.deviations.push_back(
        compare("analytic", rep.analytic->times, rep.analytic->mbar, "ide", rep.ide->times, rep.ide->mbar));
  }
  if (rep.analytic_ide_init && rep.ide) {
    rep.deviations.push_back(compare("analytic_ide_init", rep.analytic_ide_init->times, rep.analytic_ide_init->mbar,
                                     "ide", rep.ide->times, rep.ide->mbar));
  }
  if (rep.ibm && rep.ide) {
    rep.deviations.push_back(compare("ibm", rep.ibm->times, rep.ibm->mean_mbar, "ide", rep.ide->times, rep.ide->mbar));
  }
  if (traj.is_closed_form() && s.params.U > 0.0) {
    rep.asymptotics = asymptotic_summary(s.params, traj);
    rep.has_asymptotics = true;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Output

namespace {

json scenario_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  json eng = json::array();
  if (s.run_analytic) eng.push_back("analytic");
  if (s.run_ibm) eng.push_back("ibm");
  if (s.run_ide) eng.push_back("ide");
  j["engines"] = eng;
  j["params"] = {{"n", s.params.n},
                 {"lambda", s.params.lambda},
                 {"U", s.params.U},
                 {"U_c", s.params.u_c()},
                 {"mu", s.params.mu()},
                 {"r_max", s.params.r_max}};
  const auto& t = s.trajectory;
  j["trajectory"] = {{"kind", t.kind},   {"c", t.c},     {"alpha", t.alpha}, {"delta_max", t.delta_max},
                     {"omega", t.omega}, {"file", t.file}, {"nu", t.nu},     {"beta", t.beta},
                     {"dt", t.dt},       {"horizon", t.horizon}};
  j["init"] = {{"kind", s.init.kind}, {"x1", s.init.x1}, {"norm2", s.init.norm2}, {"a", s.init.a},
               {"sigma2", s.init.sigma2}};
  j["times"] = {{"t_end", s.t_end}, {"step", s.step}};
  j["analytic"] = {{"variance", s.variance || s.skewness}, {"skewness", s.skewness}};
  j["ibm"] = {{"N", s.ibm_N},
              {"replicates", s.ibm_replicates},
              {"record_every", s.step},
              {"seed", s.seed},
              {"first_stream", 1},
              {"quantiles", {0.025, 0.975}}};
  j["ide"] = {{"solver", s.ide_solver == "auto" ? (s.params.n == 1 ? "ide1d" : "pde") : s.ide_solver},
              {"dt", s.ide_dt},
              {"M", s.ide_M},
              {"M1", s.ide_M1},
              {"Mr", s.ide_Mr}};
  return j;
}

json moments_summary(const MomentTrajectory& m) {
  json j;
  j["points"] = m.times.size();
  j["mbar_final"] = m.mbar.empty() ? kNaN : m.mbar.back();
  j["mbar_min"] = m.mbar.empty() ? kNaN : *std::min_element(m.mbar.begin(), m.mbar.end());
  j["warnings"] = m.warnings;
  return j;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

void write_sidecar(const std::filesystem::path& csv, const Scenario& s, const std::vector<std::string>& columns) {
  json j;
  j["file"] = csv.filename().string();
  j["columns"] = columns;
  j["scenario"] = scenario_json(s);
  std::filesystem::path side = csv;
  side += ".json";
  write_file(side, j.dump(2) + "\n");
}

}  // namespace

std::string report_json(const ComparisonReport& r) {
  json j;
  j["scenario"] = scenario_json(r.scenario);
  json eng = json::object();
  if (r.analytic) eng["analytic"] = moments_summary(*r.analytic);
  if (r.ibm) {
    eng["ibm"] = {{"points", r.ibm->times.size()},
                  {"mean_mbar_final", r.ibm->mean_mbar.empty() ? kNaN : r.ibm->mean_mbar.back()}};
  }
  if (r.ide) eng["ide"] = moments_summary(*r.ide);
  j["engines"] = eng;
  json dev = json::array();
  for (const auto& d : r.deviations) {
    dev.push_back({{"a", d.a}, {"b", d.b}, {"sup", d.sup}, {"mean", d.mean}, {"rel_sup", d.rel_sup}});
  }
  j["deviations"] = dev;
  j["coverage"] = r.coverage ? json(*r.coverage) : json(nullptr);
  if (r.has_asymptotics) {
    const auto& a = r.asymptotics;
    j["asymptotics"] = {{"kind", a.kind},
                        {"periodic", a.periodic},
                        {"unbounded", a.unbounded},
                        {"mbar_inf", a.unbounded ? json("-inf") : json(a.mbar_inf)},
                        {"vm_inf", a.unbounded ? json("inf") : json(a.vm_inf)},
                        {"skew_inf", a.skew_inf},
                        {"mu_star", a.mu_star},
                        {"period", a.period},
                        {"mutation_load", -r.scenario.params.mu() * r.scenario.params.n / 2.0}};
  }
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

void write_combined_csv(std::ostream& out, const ComparisonReport& r) {
  // Union of all time grids; missing entries are "nan".
  std::vector<double> ts;
  if (r.analytic) ts.insert(ts.end(), r.analytic->times.begin(), r.analytic->times.end());
  if (r.ibm) ts.insert(ts.end(), r.ibm->times.begin(), r.ibm->times.end());
  if (r.ide) ts.insert(ts.end(), r.ide->times.begin(), r.ide->times.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(), [](double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max(1.0, a); }),
           ts.end());
  auto lookup = [](const std::vector<double>& t, const std::vector<double>& v, double x) {
    const auto it = std::lower_bound(t.begin(), t.end(), x - 1e-9 * std::max(1.0, x));
    if (it == t.end() || std::fabs(*it - x) > 1e-9 * std::max(1.0, x)) return kNaN;
    return v[static_cast<std::size_t>(it - t.begin())];
  };
  out << "t,analytic_mbar,ibm_mean_mbar,ibm_q025,ibm_q975,ide_mbar\n";
  for (double t : ts) {
    out << fmt(t) << ',' << fmt(r.analytic ? lookup(r.analytic->times, r.analytic->mbar, t) : kNaN) << ','
        << fmt(r.ibm ? lookup(r.ibm->times, r.ibm->mean_mbar, t) : kNaN) << ','
        << fmt(r.ibm ? lookup(r.ibm->times, r.ibm->q025, t) : kNaN) << ','
        << fmt(r.ibm ? lookup(r.ibm->times, r.ibm->q975, t) : kNaN) << ','
        << fmt(r.ide ? lookup(r.ide->times, r.ide->mbar, t) : kNaN) << '\n';
  }
}

std::string render_svg(const ComparisonReport& r) {
  constexpr double W = 800, H = 500, left = 80, right = 20, top = 40, bottom = 60;
  const auto& p = r.scenario.params;
  const double load = -p.mu() * p.n / 2.0;

  double tmax = r.scenario.t_end > 0 ? r.scenario.t_end : 1.0;
  double ylo = std::min(load, 0.0), yhi = 0.0;
  auto extend = [&](const std::vector<double>& v) {
    for (double x : v) {
      if (std::isfinite(x)) {
        ylo = std::min(ylo, x);
        yhi = std::max(yhi, x);
      }
    }
  };
  if (r.analytic) extend(r.analytic->mbar);
  if (r.ibm) {
    extend(r.ibm->q025);
    extend(r.ibm->q975);
  }
  if (r.ide) extend(r.ide->mbar);
  const double pad = 0.05 * (yhi - ylo > 0 ? yhi - ylo : 1.0);
  ylo -= pad;
  yhi += pad;
  auto X = [&](double t) { return left + (W - left - right) * t / tmax; };
  auto Y = [&](double m) { return top + (H - top - bottom) * (yhi - m) / (yhi - ylo); };
  char buf[256];
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
    << r.scenario.name << ": mean fitness</text>\n";

  auto polyline = [&](const std::vector<double>& t, const std::vector<double>& m, const char* style) {
    o << "<polyline fill=\"none\" " << style << " points=\"";
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(m[i])) continue;
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(t[i]), Y(m[i]));
      o << buf;
    }
    o << "\"/>\n";
  };
  if (r.ibm) {
    o << "<polygon fill=\"#f7c6d0\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < r.ibm->times.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(r.ibm->times[i]), Y(r.ibm->q975[i]));
      o << buf;
    }
    for (std::size_t i = r.ibm->times.size(); i-- > 0;) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(r.ibm->times[i]), Y(r.ibm->q025[i]));
      o << buf;
    }
    o << "\"/>\n";
  }
  // axes and ticks
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n"
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                left, H - bottom, W - right, H - bottom, left, top, left, H - bottom);
  o << buf;
  for (int k = 0; k <= 5; ++k) {
    const double t = tmax * k / 5.0;
    const double m = ylo + (yhi - ylo) * k / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                  "font-size=\"12\">%g</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\" font-family=\"sans-serif\" "
                  "font-size=\"12\">%.4f</text>\n",
                  X(t), H - bottom + 18, t, left - 6, Y(m) + 4, m);
    o << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                "font-size=\"13\">t (generations)</text>\n",
                (left + W - right) / 2, H - 18);
  o << buf;
  auto hline = [&](double m, const char* style) {
    std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.2f\" x2=\"%.1f\" y2=\"%.2f\" %s/>\n", left, Y(m),
                  W - right, Y(m), style);
    o << buf;
  };
  hline(load, "stroke=\"#d62728\" stroke-width=\"1\"");
  if (r.has_asymptotics && r.asymptotics.periodic) {
    hline(r.asymptotics.mbar_inf, "stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"6,4\"");
  }
  if (r.ibm) polyline(r.ibm->times, r.ibm->mean_mbar, "stroke=\"#d62728\" stroke-width=\"1.5\"");
  if (r.ide) polyline(r.ide->times, r.ide->mbar, "stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"5,4\"");
  if (r.analytic) polyline(r.analytic->times, r.analytic->mbar, "stroke=\"#1f4e9c\" stroke-width=\"2\"");
  o << "</svg>\n";
  return o.str();
}

void write_outputs(const ComparisonReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  if (r.analytic) {
    std::ostringstream o;
    write_moments_csv(o, *r.analytic);
    write_file(base / "analytic.csv", o.str());
    write_sidecar(base / "analytic.csv", r.scenario, {"t", "mbar", "vm", "skew"});
  }
  if (r.ibm) {
    std::ostringstream o;
    write_replicate_csv(o, *r.ibm);
    write_file(base / "ibm.csv", o.str());
    write_sidecar(base / "ibm.csv", r.scenario, {"t", "mean_mbar", "q025", "q975"});
  }
  if (r.ide) {
    std::ostringstream o;
    write_moments_csv(o, *r.ide);
    write_file(base / "ide.csv", o.str());
    write_sidecar(base / "ide.csv", r.scenario, {"t", "mbar", "vm", "skew"});
  }
  {
    std::ostringstream o;
    write_combined_csv(o, r);
    write_file(base / "combined.csv", o.str());
    write_sidecar(base / "combined.csv", r.scenario,
                  {"t", "analytic_mbar", "ibm_mean_mbar", "ibm_q025", "ibm_q975", "ide_mbar"});
  }
  write_file(base / "report.json", report_json(r));
  write_file(base / "figure.svg", render_svg(r));
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<double> parse_values(const std::string& text) {
  const std::string t = trim(text);
  if (t.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(trim(item));
    if (parts.size() != 3) throw ConfigError("values", "range must be lo:step:hi");
    const double lo = to_double("values", parts[0]);
    const double st = to_double("values", parts[1]);
    const double hi = to_double("values", parts[2]);
    if (!(st > 0.0) || !(hi >= lo)) throw ConfigError("values", "range needs step > 0 and hi >= lo");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / st + 1e-9));
    for (std::size_t k = 0; k <= n; ++k) out.push_back(lo + static_cast<double>(k) * st);
    return out;
  }
  std::vector<double> out;
  for (const auto& v : split_list(t)) out.push_back(to_double("values", v));
  if (out.empty()) throw ConfigError("values", "no values given");
  return out;
}

double parabolic_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double curv = (d12 - d01) / (x2 - x0);
  if (curv == 0.0) return x1;
  // y = y1 + d (x - x1) + curv (x - x0)(x - x1), d = d01
  // dy/dx = d01 + curv (2x - x0 - x1) = 0
  return 0.5 * (x0 + x1) - d01 / (2.0 * curv);
}

SweepResult sweep(const Scenario& base, const std::string& axis, const std::vector<double>& values) {
  static const std::vector<std::string> axes = {"params.n",     "params.lambda",   "params.U",
                                                "params.mu",    "params.r_max",    "trajectory.c",
                                                "trajectory.alpha", "trajectory.delta_max", "trajectory.omega"};
  if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
    throw ConfigError("axis", "'" + axis + "' is not a sweepable scalar field");
  }
  if (base.trajectory.kind == "tabulated" || base.trajectory.kind == "ou") {
    throw ConfigError("trajectory.kind", "sweeps need a closed-form trajectory");
  }
  SweepResult res;
  res.axis = axis;
  for (double v : values) {
    Scenario s = base;
    apply_setting(s, axis, axis == "params.n" ? std::to_string(std::llround(v)) : fmt(v));
    s.validate();
    const EnvTrajectory traj = s.trajectory.build(s.seed, s.t_end);
    const AsymptoticSummary a = asymptotic_summary(s.params, traj);
    res.rows.push_back({v, a.mbar_inf, a.vm_inf});
  }
  auto refine = [&](auto value_of, bool maximize) -> std::optional<double> {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < res.rows.size(); ++k) {
      const double y = value_of(res.rows[k]);
      if (!std::isfinite(y)) continue;
      if (!best || (maximize ? y > value_of(res.rows[*best]) : y < value_of(res.rows[*best]))) best = k;
    }
    if (!best || *best == 0 || *best + 1 >= res.rows.size()) return std::nullopt;
    const auto& a = res.rows[*best - 1];
    const auto& b = res.rows[*best];
    const auto& c = res.rows[*best + 1];
    if (!std::isfinite(value_of(a)) || !std::isfinite(value_of(c))) return b.value;
    return parabolic_vertex(a.value, value_of(a), b.value, value_of(b), c.value, value_of(c));
  };
  res.argmax_mbar = refine([](const SweepRow& r) { return r.mbar_inf; }, true);
  res.argmin_vm = refine([](const SweepRow& r) { return r.vm_inf; }, false);
  return res;
}

void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out << "value,mbar_inf,vm_inf\n";
  for (const auto& row : r.rows) out << fmt(row.value) << ',' << fmt(row.mbar_inf) << ',' << fmt(row.vm_inf) << '\n';
}

}  // namespace evoclim
