#pragma once
// Optimum trajectories delta(t) along the fixed direction u = e_1, and the
// model parameters of the isotropic Gaussian fitness landscape.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "evoclim/numerics.hpp"

namespace evoclim {

struct ModelParams {
  int n = 3;            // trait-space dimension
  double lambda = 0.005;  // mutational variance per trait
  double U = 0.1125;      // mutation rate per capita per generation
  double r_max = 0.0;     // growth rate of the optimal phenotype

  double mu() const;
  /// Threshold of the weak-selection strong-mutation regime, n^2 lambda / 4.
  double u_c() const { return n * n * lambda / 4.0; }
  /// U > 0 is required by the analytic engine (mu > 0); the simulation
  /// engines also accept U = 0 (selection only).
  void validate(bool allow_zero_mutation = false) const;
};

namespace traj {

struct Linear {
  double c = 0.0;
};
struct Power {
  double c = 0.0;
  double alpha = 0.5;
};
struct Sin {
  double delta_max = 0.0;
  double omega = 0.0;
};
struct SinSq {
  double delta_max = 0.0;
  double omega = 0.0;
};
struct LinearPlusSin {
  double c = 0.0;
  double delta_max = 0.0;
  double omega = 0.0;
};
/// Piecewise-linear path through (times[k], values[k]); times[0] = 0.
struct Tabulated {
  std::vector<double> times;
  std::vector<double> values;
};

}  // namespace traj

/// Immutable optimum trajectory. Ornstein-Uhlenbeck paths are realized into
/// a Tabulated variant by `realize_ou`.
class EnvTrajectory {
 public:
  using Variant = std::variant<traj::Linear, traj::Power, traj::Sin, traj::SinSq, traj::LinearPlusSin, traj::Tabulated>;

  EnvTrajectory() : v_(traj::Linear{0.0}) {}
  EnvTrajectory(Variant v);  // validates

  static EnvTrajectory none() { return EnvTrajectory(traj::Linear{0.0}); }

  const Variant& variant() const { return v_; }
  bool is_closed_form() const { return !std::holds_alternative<traj::Tabulated>(v_); }
  /// Largest t at which the trajectory is defined (infinity for closed forms).
  double horizon() const;
  std::string kind() const;

 private:
  Variant v_;
};

double delta(const EnvTrajectory& traj, double t);
double delta_prime(const EnvTrajectory& traj, double t);
/// Second derivative; tabulated paths use a stencil on the interpolant.
double delta_second(const EnvTrajectory& traj, double t);

/// Euler-Maruyama realization of d delta = -nu delta dt + beta_noise dW,
/// delta(0) = 0, nodes at k*dt until the horizon is covered.
EnvTrajectory realize_ou(double nu, double beta_noise, double dt, double horizon, const RngStream& stream);

/// Two-column CSV with header `t,delta`.
void write_trajectory_csv(std::ostream& out, const traj::Tabulated& path);
traj::Tabulated read_trajectory_csv(std::istream& in);

/// delta sampled on [0, t_end]; min and max over the samples.
std::pair<double, double> delta_range(const EnvTrajectory& traj, double t_end, std::size_t samples = 4096);

}  // namespace evoclim
