#include "evoclim/environment.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "evoclim/error.hpp"

namespace evoclim {

double ModelParams::mu() const { return std::sqrt(U * lambda); }

void ModelParams::validate(bool allow_zero_mutation) const {
  if (n < 1) throw DomainError("ModelParams: n must be a positive integer");
  if (!(lambda > 0.0)) throw DomainError("ModelParams: lambda must be positive");
  if (allow_zero_mutation ? !(U >= 0.0) : !(U > 0.0)) {
    throw DomainError(allow_zero_mutation ? "ModelParams: U must be non-negative" : "ModelParams: U must be positive");
  }
  if (!(r_max >= 0.0)) throw DomainError("ModelParams: r_max must be non-negative");
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("EnvTrajectory: ") + what + " must be finite");
}

void validate(const EnvTrajectory::Variant& v) {
  std::visit(overloaded{
                 [](const traj::Linear& l) { check_finite(l.c, "c"); },
                 [](const traj::Power& p) {
                   check_finite(p.c, "c");
                   if (!(p.alpha > 0.0)) throw DomainError("EnvTrajectory: power alpha must be > 0");
                   if (p.alpha == 1.0) throw DomainError("EnvTrajectory: power alpha = 1 must be expressed as linear");
                 },
                 [](const traj::Sin& s) {
                   check_finite(s.delta_max, "delta_max");
                   check_finite(s.omega, "omega");
                 },
                 [](const traj::SinSq& s) {
                   check_finite(s.delta_max, "delta_max");
                   check_finite(s.omega, "omega");
                 },
                 [](const traj::LinearPlusSin& s) {
                   check_finite(s.c, "c");
                   check_finite(s.delta_max, "delta_max");
                   check_finite(s.omega, "omega");
                 },
                 [](const traj::Tabulated& tab) {
                   if (tab.times.size() < 2 || tab.times.size() != tab.values.size()) {
                     throw DomainError("EnvTrajectory: tabulated path needs >= 2 (t, delta) pairs of equal length");
                   }
                   if (tab.times.front() != 0.0) throw DomainError("EnvTrajectory: tabulated path must start at t = 0");
                   if (tab.values.front() != 0.0) throw DomainError("EnvTrajectory: delta(0) must be 0");
                   for (std::size_t k = 1; k < tab.times.size(); ++k) {
                     if (!(tab.times[k] > tab.times[k - 1])) {
                       throw DomainError("EnvTrajectory: tabulated times must be strictly increasing");
                     }
                     check_finite(tab.values[k], "tabulated value");
                   }
                 },
             },
             v);
}

void check_time(const EnvTrajectory& traj, double t) {
  if (!(t >= 0.0)) throw DomainError("delta: t must be >= 0");
  if (t > traj.horizon()) {
    throw DomainError("delta: t = " + std::to_string(t) + " beyond tabulated horizon " +
                      std::to_string(traj.horizon()));
  }
}

// Index k of the segment [times[k], times[k+1]] containing t.
std::size_t segment(const traj::Tabulated& tab, double t) {
  const auto it = std::upper_bound(tab.times.begin(), tab.times.end(), t);
  const auto k = static_cast<std::size_t>(std::distance(tab.times.begin(), it));
  return std::min(k == 0 ? 0 : k - 1, tab.times.size() - 2);
}

}  // namespace

EnvTrajectory::EnvTrajectory(Variant v) : v_(std::move(v)) { validate(v_); }

double EnvTrajectory::horizon() const {
  if (const auto* tab = std::get_if<traj::Tabulated>(&v_)) return tab->times.back();
  return std::numeric_limits<double>::infinity();
}

std::string EnvTrajectory::kind() const {
  return std::visit(overloaded{
                        [](const traj::Linear&) { return std::string("linear"); },
                        [](const traj::Power&) { return std::string("power"); },
                        [](const traj::Sin&) { return std::string("sin"); },
                        [](const traj::SinSq&) { return std::string("sin2"); },
                        [](const traj::LinearPlusSin&) { return std::string("linear_sin"); },
                        [](const traj::Tabulated&) { return std::string("tabulated"); },
                    },
                    v_);
}

double delta(const EnvTrajectory& traj, double t) {
  check_time(traj, t);
  return std::visit(overloaded{
                        [t](const traj::Linear& l) { return l.c * t; },
                        [t](const traj::Power& p) { return p.c * std::pow(t, p.alpha); },
                        [t](const traj::Sin& s) { return s.delta_max * std::sin(s.omega * t); },
                        [t](const traj::SinSq& s) {
                          const double v = std::sin(s.omega * t);
                          return s.delta_max * v * v;
                        },
                        [t](const traj::LinearPlusSin& s) { return s.c * t + s.delta_max * std::sin(s.omega * t); },
                        [t](const traj::Tabulated& tab) {
                          const std::size_t k = segment(tab, t);
                          const double w = (t - tab.times[k]) / (tab.times[k + 1] - tab.times[k]);
                          return tab.values[k] + w * (tab.values[k + 1] - tab.values[k]);
                        },
                    },
                    traj.variant());
}

double delta_prime(const EnvTrajectory& traj, double t) {
  check_time(traj, t);
  return std::visit(overloaded{
                        [](const traj::Linear& l) { return l.c; },
                        [t](const traj::Power& p) { return p.c * p.alpha * std::pow(t, p.alpha - 1.0); },
                        [t](const traj::Sin& s) { return s.delta_max * s.omega * std::cos(s.omega * t); },
                        [t](const traj::SinSq& s) { return s.delta_max * s.omega * std::sin(2.0 * s.omega * t); },
                        [t](const traj::LinearPlusSin& s) {
                          return s.c + s.delta_max * s.omega * std::cos(s.omega * t);
                        },
                        [t](const traj::Tabulated& tab) {
                          const std::size_t k = segment(tab, t);
                          return (tab.values[k + 1] - tab.values[k]) / (tab.times[k + 1] - tab.times[k]);
                        },
                    },
                    traj.variant());
}

double delta_second(const EnvTrajectory& traj, double t) {
  check_time(traj, t);
  return std::visit(overloaded{
                        [](const traj::Linear&) { return 0.0; },
                        [t](const traj::Power& p) {
                          return p.c * p.alpha * (p.alpha - 1.0) * std::pow(t, p.alpha - 2.0);
                        },
                        [t](const traj::Sin& s) {
                          return -s.delta_max * s.omega * s.omega * std::sin(s.omega * t);
                        },
                        [t](const traj::SinSq& s) {
                          return 2.0 * s.delta_max * s.omega * s.omega * std::cos(2.0 * s.omega * t);
                        },
                        [t](const traj::LinearPlusSin& s) {
                          return -s.delta_max * s.omega * s.omega * std::sin(s.omega * t);
                        },
                        [&traj, t](const traj::Tabulated& tab) {
                          // One node spacing keeps the stencil inside the path.
                          const std::size_t k = segment(tab, t);
                          double h = tab.times[k + 1] - tab.times[k];
                          h = std::min({h, t, tab.times.back() - t});
                          if (h <= 0.0) return 0.0;
                          return stencil_derivative([&traj](double s) { return delta(traj, s); }, t, 2, h);
                        },
                    },
                    traj.variant());
}

EnvTrajectory realize_ou(double nu, double beta_noise, double dt, double horizon, const RngStream& stream) {
  if (!(nu >= 0.0) || !(beta_noise >= 0.0)) throw DomainError("realize_ou: nu and beta_noise must be >= 0");
  if (!(dt > 0.0) || !(dt <= horizon)) throw DomainError("realize_ou: requires 0 < dt <= horizon");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  traj::Tabulated tab;
  tab.times.resize(steps + 1);
  tab.values.resize(steps + 1);
  CounterRng rng(stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise_scale = beta_noise * std::sqrt(dt);
  double d = 0.0;
  tab.times[0] = 0.0;
  tab.values[0] = 0.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    d = d - nu * d * dt + noise_scale * normal(rng);
    tab.times[k] = static_cast<double>(k) * dt;
    tab.values[k] = d;
  }
  return EnvTrajectory(std::move(tab));
}

void write_trajectory_csv(std::ostream& out, const traj::Tabulated& path) {
  out << "t,delta\n";
  out.precision(17);
  for (std::size_t k = 0; k < path.times.size(); ++k) out << path.times[k] << ',' << path.values[k] << '\n';
}

traj::Tabulated read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("trajectory CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,delta") throw DomainError("trajectory CSV: header must be 't,delta'");
  traj::Tabulated tab;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw DomainError("trajectory CSV: line " + std::to_string(lineno) + " lacks a comma");
    }
    try {
      std::size_t used = 0;
      const double t = std::stod(line.substr(0, comma), &used);
      const double v = std::stod(line.substr(comma + 1));
      tab.times.push_back(t);
      tab.values.push_back(v);
    } catch (const std::logic_error&) {
      throw DomainError("trajectory CSV: line " + std::to_string(lineno) + " is not numeric");
    }
  }
  // Validate through the trajectory constructor.
  (void)EnvTrajectory(tab);
  return tab;
}

std::pair<double, double> delta_range(const EnvTrajectory& traj, double t_end, std::size_t samples) {
  double lo = 0.0;
  double hi = 0.0;
  const double end = std::min(t_end, traj.horizon());
  for (std::size_t k = 0; k <= samples; ++k) {
    const double v = delta(traj, end * static_cast<double>(k) / static_cast<double>(samples));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (const auto* tab = std::get_if<traj::Tabulated>(&traj.variant())) {
    for (std::size_t k = 0; k < tab->times.size() && tab->times[k] <= end; ++k) {
      lo = std::min(lo, tab->values[k]);
      hi = std::max(hi, tab->values[k]);
    }
  }
  return {lo, hi};
}

}  // namespace evoclim
