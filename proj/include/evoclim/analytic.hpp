#pragma once
// Closed-form adaptation dynamics: characteristic curves of the cumulant
// generating function of the fitness components (x_1, -|x|^2/2), the
// Q-integral that solves its transport equation, and the mean fitness,
// variance and skewness trajectories derived from it.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "evoclim/environment.hpp"
#include "evoclim/numerics.hpp"
#include "evoclim/parallel.hpp"

namespace evoclim {

namespace init {

/// Every individual at the optimum: C0 = 0.
struct Clonal {};
/// All mass at x*, with x1_star = u.x* and norm2_star = |x*|^2.
struct Dirac {
  double x1_star = 0.0;
  double norm2_star = 0.0;
};
/// x ~ N(a u, sigma2 I_n).
struct IsotropicGaussian {
  double a = 0.0;
  double sigma2 = 0.0;
};
/// User-supplied C0. Missing partials are taken by central differences.
struct Custom {
  std::function<double(double, double)> c0;
  std::function<double(double, double)> d1c0;
  std::function<double(double, double)> d2c0;
};

}  // namespace init

class InitialCondition {
 public:
  using Variant = std::variant<init::Clonal, init::Dirac, init::IsotropicGaussian, init::Custom>;

  InitialCondition() = default;
  InitialCondition(Variant v);  // validates

  static InitialCondition clonal() { return {}; }
  /// Dirac mass at distance d from the origin along u.
  static InitialCondition dirac_on_axis(double d) { return InitialCondition(init::Dirac{d, d * d}); }

  const Variant& variant() const { return v_; }
  bool is_clonal() const { return std::holds_alternative<init::Clonal>(v_); }
  std::string kind() const;

 private:
  Variant v_ = init::Clonal{};
};

/// Initial cumulant generating function C0(z1, z2) and its partials.
double c0(const InitialCondition& init, const ModelParams& params, double z1, double z2);
double d1_c0(const InitialCondition& init, const ModelParams& params, double z1, double z2);
double d2_c0(const InitialCondition& init, const ModelParams& params, double z1, double z2);

/// Point phi_t(z, z~) = (y1, y2) on a characteristic.
struct CharacteristicPoint {
  double y1 = 0.0;
  double y2 = 0.0;
};

/// Accuracy knobs of the analytic engine.
struct AnalyticOptions {
  QuadratureSpec quad{1e-12, 1e-15, 1 << 15};
  /// Stencil steps are `step_scale[k] * L` where L = 1/(mu + omega) is the
  /// shortest time scale of the problem; each stencil is Richardson-extrapolated.
  double step_scale_1 = 0.005;
  double step_scale_2 = 0.0125;
  double step_scale_3 = 0.0125;
  double step_scale_mixed = 0.01;
};

double y2(const ModelParams& params, double z);
double y1(const ModelParams& params, const EnvTrajectory& traj, double t, double z, double z_tilde,
          const QuadratureSpec& quad = {});
CharacteristicPoint phi(const ModelParams& params, const EnvTrajectory& traj, double t, double z, double z_tilde,
                        const QuadratureSpec& quad = {});

/// Weighted history H_delta(t) = mu int_0^t delta(u) sinh(mu u)/cosh(mu t) du.
double h_delta(const ModelParams& params, const EnvTrajectory& traj, double t, const QuadratureSpec& quad = {});

/// Q(t, z, z~): solution of the transport equation along the characteristics.
double q_eval(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t, double z,
              double z_tilde, const QuadratureSpec& quad = {});
/// R(t, z) = Q(t, z, z).
double r_eval(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t, double z,
              const QuadratureSpec& quad = {});

/// Initial-condition contribution R0'(t) to the mean fitness.
double r0_prime(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                const QuadratureSpec& quad = {});
/// Mean fitness of a population started clonal at the optimum.
double mbar_clonal(const ModelParams& params, const EnvTrajectory& traj, double t, const QuadratureSpec& quad = {});
/// Closed-form mean fitness -mu n/2 tanh(mu t) - (H - delta)^2/2 + R0'(t).
double mbar_closed(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                   const QuadratureSpec& quad = {});

/// Stencil-extracted partials of Q and R at the origin. z~-derivatives are
/// reported divided by cosh(mu t), which keeps them O(1) for large t.
struct QPartials {
  double dR = 0.0;      // d_z R(t,0)
  double dRR = 0.0;     // d_zz R(t,0)
  double dRRR = 0.0;    // d_zzz R(t,0)
  double dQt = 0.0;     // d_z~ Q(t,0,0) / cosh(mu t)
  double dQdiag = 0.0;  // (d_z + d_z~) d_z~ Q(t,0,0) / cosh(mu t)
};

enum class PartialSet { mean, variance, skewness };

QPartials q_partials(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                     PartialSet which, const AnalyticOptions& opts = {});

/// Mean fitness through the CGF route: d_z R(t,0) - delta(t)^2/2.
double mbar_from_q(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                   const AnalyticOptions& opts = {});

double variance_closed(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                       const AnalyticOptions& opts = {}, std::vector<std::string>* warnings = nullptr);
double skewness_closed(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                       const AnalyticOptions& opts = {});

/// Large-time behaviour of a closed-form trajectory.
struct AsymptoticSummary {
  std::string kind;
  bool periodic = false;
  bool unbounded = false;  // superlinear power: mbar -> -inf, vm -> +inf
  double mbar_inf = 0.0;   // limit, or period average for periodic kinds
  double vm_inf = 0.0;     // NaN where no closed form is known
  double skew_inf = 0.0;   // NaN where no closed form is known
  double mu_star = 0.0;    // mutation parameter maximizing mbar_inf (linear)
  double period = 0.0;
};

AsymptoticSummary asymptotic_summary(const ModelParams& params, const EnvTrajectory& traj);

struct CriticalSpeed {
  double c_star = 0.0;
  bool persistence_possible = true;  // false when the radicand is negative
};

/// c* = mu sqrt(2 r_max - mu n).
CriticalSpeed critical_speed(const ModelParams& params);
/// c* = mu sqrt(2 r_max - mu n - dmax^2 w^2 / (2 w^2 + 2 mu^2)).
CriticalSpeed critical_speed_with_fluctuations(const ModelParams& params, double delta_max, double omega);

enum class Source { analytic, ibm, ide };
std::string to_string(Source s);

struct MomentTrajectory {
  std::vector<double> times;
  std::vector<double> mbar;
  std::vector<double> vm;    // empty when not computed
  std::vector<double> skew;  // empty when not computed
  std::vector<double> rho;   // empty when not computed
  Source source = Source::analytic;
  std::vector<std::string> warnings;
};

void write_moments_csv(std::ostream& out, const MomentTrajectory& traj);

struct MomentOptions {
  bool variance = true;
  bool skewness = true;
  bool rho = false;
  double rho0 = 1.0;
  Policy policy = Policy::parallel;
  AnalyticOptions analytic;
};

/// Evaluates the moments at every time of `times` (ascending).
MomentTrajectory mean_fitness_trajectory(const ModelParams& params, const EnvTrajectory& traj,
                                         const InitialCondition& init, const std::vector<double>& times,
                                         const MomentOptions& options = {});

struct RhoSeries {
  std::vector<double> times;
  std::vector<double> rho;
  bool extinct = false;
  double extinction_time = 0.0;
};

/// Integrates rho' = rho (r_max + mbar(t) - rho) by classical RK4 on `times`.
RhoSeries persistence_rho(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init,
                          const std::vector<double>& times, double rho0, double floor = 1e-12,
                          const QuadratureSpec& quad = {});
/// Same integration with a caller-supplied mean fitness.
RhoSeries integrate_rho(const std::function<double(double)>& mbar, double r_max, const std::vector<double>& times,
                        double rho0, double floor = 1e-12);

/// Uniform grid of `points` times on [0, t_end].
std::vector<double> uniform_times(double t_end, std::size_t points = 512);

}  // namespace evoclim
