#include "evoclim/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "evoclim/error.hpp"

namespace evoclim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCustomStep = 1e-5;

// ---------------------------------------------------------------------------
// Integrals of delta against a smooth kernel.

// int_lo^hi delta(base + v) kernel(v) dv. Closed-form trajectories use adaptive
// Gauss-Kronrod; tabulated paths are split at their nodes and each linear
// piece is integrated by 3-point Gauss-Legendre.
template <class Kernel>
double delta_integral(const EnvTrajectory& traj, double base, double lo, double hi, Kernel&& kernel,
                      const QuadratureSpec& quad) {
  if (lo == hi) return 0.0;
  const double sign = hi < lo ? -1.0 : 1.0;
  if (hi < lo) std::swap(lo, hi);

  if (traj.is_closed_form()) {
    return sign * integrate_gk([&](double v) { return delta(traj, base + v) * kernel(v); }, lo, hi, quad);
  }

  const auto& tab = std::get<traj::Tabulated>(traj.variant());
  static constexpr std::array<double, 3> kNode = {-0.774596669241483377035853079956, 0.0,
                                                  0.774596669241483377035853079956};
  static constexpr std::array<double, 3> kWeight = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  auto piece = [&](double a, double b) {
    const double c = 0.5 * (a + b);
    const double r = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double v = c + r * kNode[i];
      s += kWeight[i] * delta(traj, base + v) * kernel(v);
    }
    return s * r;
  };
  // Breakpoints v_k = t_k - base inside (lo, hi).
  const auto first = std::upper_bound(tab.times.begin(), tab.times.end(), base + lo);
  double sum = 0.0;
  double a = lo;
  for (auto it = first; it != tab.times.end() && *it - base < hi; ++it) {
    const double b = *it - base;
    if (b > a) sum += piece(a, b);
    a = b;
  }
  sum += piece(a, hi);
  return sign * sum;
}

// Split of y1 along a characteristic, for tau = t - s >= 0:
//   base  = y1(tau, s, s)
//   shift = y1(tau, z + s, z~ + s) - base,   gap = z - z~
// The shift is assembled from terms that are each O(z) or O(z - z~), so
// finite differences of Q in z never subtract two large quadratures.
struct Y1Split {
  double base = 0.0;
  double shift = 0.0;
};

Y1Split y1_split(double mu, const EnvTrajectory& traj, double tau, double s, double z, double gap,
                 const QuadratureSpec& quad, bool want_base = true) {
  Y1Split out;
  const double ms = mu * s;
  if (want_base && s != 0.0) {
    out.base = delta_integral(
        traj, tau, 0.0, s, [&](double v) { return hyp_ratio_cosh_cosh(mu * (s - v), ms); }, quad);
  }
  if (z == 0.0 && gap == 0.0) return out;

  double shift = 0.0;
  if (z != 0.0) {
    const double w = z + s;
    const double mw = mu * w;
    // cosh(mu(w-v))/cosh(mu w) - cosh(mu(s-v))/cosh(mu s)
    //   = -sinh(mu z) sech(mu w) sinh(mu v)/cosh(mu s)
    if (s != 0.0) {
      const double hist = delta_integral(
          traj, tau, 0.0, s, [&](double v) { return hyp_ratio_sinh_cosh(mu * v, ms); }, quad);
      shift -= std::sinh(mu * z) * sech(mw) * hist;
    }
    shift += delta_integral(
        traj, tau, s, w, [&](double v) { return cosh_ratio(mu * (w - v), mw); }, quad);
  }
  if (gap != 0.0) {
    // (z - z~) cosh(mu(z + t)) / cosh(mu(z + s)), with t = tau + s
    shift += gap * cosh_ratio(mu * (z + tau + s), mu * (z + s));
  }
  out.shift = shift;
  return out;
}

// y2(z + s) - y2(s), exactly.
double y2_shift(double mu, double s, double z) {
  if (z == 0.0) return 0.0;
  return std::sinh(mu * z) * sech(mu * (z + s)) * sech(mu * s) / mu;
}

void check_t(double t, const char* who) {
  if (!(t >= 0.0)) throw DomainError(std::string(who) + ": t must be >= 0");
}

double omega_of(const EnvTrajectory& traj) {
  return std::visit(overloaded{
                        [](const traj::Sin& s) { return std::fabs(s.omega); },
                        [](const traj::SinSq& s) { return 2.0 * std::fabs(s.omega); },
                        [](const traj::LinearPlusSin& s) { return std::fabs(s.omega); },
                        [](const auto&) { return 0.0; },
                    },
                    traj.variant());
}

double richardson(double coarse, double fine) { return (4.0 * fine - coarse) / 3.0; }

}  // namespace

// ---------------------------------------------------------------------------
// Initial conditions

InitialCondition::InitialCondition(Variant v) : v_(std::move(v)) {
  std::visit(overloaded{
                 [](const init::Clonal&) {},
                 [](const init::Dirac& d) {
                   if (!std::isfinite(d.x1_star) || !std::isfinite(d.norm2_star)) {
                     throw DomainError("InitialCondition: Dirac coordinates must be finite");
                   }
                   if (d.norm2_star < d.x1_star * d.x1_star * (1.0 - 1e-12)) {
                     throw DomainError("InitialCondition: Dirac requires norm2_star >= x1_star^2");
                   }
                 },
                 [](const init::IsotropicGaussian& g) {
                   if (!std::isfinite(g.a)) throw DomainError("InitialCondition: Gaussian mean must be finite");
                   if (!(g.sigma2 >= 0.0)) throw DomainError("InitialCondition: Gaussian sigma2 must be >= 0");
                 },
                 [](const init::Custom& c) {
                   if (!c.c0) throw DomainError("InitialCondition: custom C0 is required");
                   if (std::fabs(c.c0(0.0, 0.0)) > 1e-12) {
                     throw DomainError("InitialCondition: custom C0 must vanish at the origin");
                   }
                 },
             },
             v_);
}

std::string InitialCondition::kind() const {
  return std::visit(overloaded{
                        [](const init::Clonal&) { return std::string("clonal"); },
                        [](const init::Dirac&) { return std::string("dirac"); },
                        [](const init::IsotropicGaussian&) { return std::string("gaussian"); },
                        [](const init::Custom&) { return std::string("custom"); },
                    },
                    v_);
}

double c0(const InitialCondition& init, const ModelParams& params, double z1, double z2) {
  return std::visit(overloaded{
                        [](const init::Clonal&) { return 0.0; },
                        [&](const init::Dirac& d) { return z1 * d.x1_star - z2 * d.norm2_star / 2.0; },
                        [&](const init::IsotropicGaussian& g) {
                          const double den = 1.0 + z2 * g.sigma2;
                          if (!(den > 0.0)) throw DomainError("c0: Gaussian CGF undefined for 1 + z2 sigma2 <= 0");
                          const double num = z1 * z1 * g.sigma2 + 2.0 * g.a * z1 - z2 * g.a * g.a;
                          return -0.5 * params.n * std::log1p(z2 * g.sigma2) + num / (2.0 * den);
                        },
                        [&](const init::Custom& c) { return c.c0(z1, z2); },
                    },
                    init.variant());
}

double d1_c0(const InitialCondition& init, const ModelParams& params, double z1, double z2) {
  return std::visit(overloaded{
                        [](const init::Clonal&) { return 0.0; },
                        [](const init::Dirac& d) { return d.x1_star; },
                        [&](const init::IsotropicGaussian& g) {
                          return (z1 * g.sigma2 + g.a) / (1.0 + z2 * g.sigma2);
                        },
                        [&](const init::Custom& c) {
                          if (c.d1c0) return c.d1c0(z1, z2);
                          return (c.c0(z1 + kCustomStep, z2) - c.c0(z1 - kCustomStep, z2)) / (2.0 * kCustomStep);
                        },
                    },
                    init.variant());
  (void)params;
}

double d2_c0(const InitialCondition& init, const ModelParams& params, double z1, double z2) {
  return std::visit(overloaded{
                        [](const init::Clonal&) { return 0.0; },
                        [](const init::Dirac& d) { return -d.norm2_star / 2.0; },
                        [&](const init::IsotropicGaussian& g) {
                          const double den = 1.0 + z2 * g.sigma2;
                          const double num = z1 * z1 * g.sigma2 + 2.0 * g.a * z1 - z2 * g.a * g.a;
                          return -0.5 * params.n * g.sigma2 / den - g.a * g.a / (2.0 * den) -
                                 num * g.sigma2 / (2.0 * den * den);
                        },
                        [&](const init::Custom& c) {
                          if (c.d2c0) return c.d2c0(z1, z2);
                          return (c.c0(z1, z2 + kCustomStep) - c.c0(z1, z2 - kCustomStep)) / (2.0 * kCustomStep);
                        },
                    },
                    init.variant());
}

// ---------------------------------------------------------------------------
// Characteristics

double y2(const ModelParams& params, double z) {
  if (!(z >= 0.0)) throw DomainError("y2: z must be >= 0");
  const double mu = params.mu();
  return hyp_ratio_sinh_cosh(mu * z, mu * z) / mu;
}

double y1(const ModelParams& params, const EnvTrajectory& traj, double t, double z, double z_tilde,
          const QuadratureSpec& quad) {
  check_t(t, "y1");
  if (!(z >= 0.0) || !(z_tilde >= 0.0)) throw DomainError("y1: z and z_tilde must be >= 0");
  return y1_split(params.mu(), traj, t, 0.0, z, z - z_tilde, quad, false).shift;
}

CharacteristicPoint phi(const ModelParams& params, const EnvTrajectory& traj, double t, double z, double z_tilde,
                        const QuadratureSpec& quad) {
  return {y1(params, traj, t, z, z_tilde, quad), y2(params, z)};
}

double h_delta(const ModelParams& params, const EnvTrajectory& traj, double t, const QuadratureSpec& quad) {
  check_t(t, "h_delta");
  if (t == 0.0) return 0.0;
  const double mu = params.mu();
  const double mt = mu * t;
  return mu * delta_integral(
                  traj, 0.0, 0.0, t, [&](double u) { return hyp_ratio_sinh_cosh(mu * u, mt); }, quad);
}

// ---------------------------------------------------------------------------
// Q and R

namespace {

// Q(t, z, z - gap) for z of either sign (stencils straddle the origin). The
// trajectory must be defined on [0, t + max(z, 0)] and t + z >= 0. Passing
// the gap keeps tiny z~ offsets that would be lost next to z.
double q_unchecked(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                   double z, double gap, const QuadratureSpec& quad) {
  if (z == 0.0 && gap == 0.0) return 0.0;
  const double mu = params.mu();
  const double mu2 = mu * mu;
  const double half_n = 0.5 * params.n;

  double q = 0.0;
  if (t > 0.0) {
    auto integrand = [&](double s) {
      const Y1Split y = y1_split(mu, traj, t - s, s, z, gap, quad);
      // beta(t-s, z+s, z~+s) - beta(t-s, s, s)
      return mu2 * (0.5 * y.shift * (2.0 * y.base + y.shift) - half_n * y2_shift(mu, s, z));
    };
    q = integrate_gk(integrand, 0.0, t, quad);
  }
  if (!init.is_clonal()) {
    // Q0(z + t, z~ + t) - Q0(t, t), with Q0 = C0 o phi_0.
    const Y1Split y = y1_split(mu, traj, 0.0, t, z, gap, quad);
    const double y2_base = std::tanh(mu * t) / mu;
    q += c0(init, params, y.base + y.shift, y2_base + y2_shift(mu, t, z)) - c0(init, params, y.base, y2_base);
  }
  return q;
}

}  // namespace

double q_eval(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t, double z,
              double z_tilde, const QuadratureSpec& quad) {
  check_t(t, "q_eval");
  if (!(z >= 0.0) || !(z_tilde >= 0.0)) throw DomainError("q_eval: z and z_tilde must be >= 0");
  return q_unchecked(params, traj, init, t, z, z - z_tilde, quad);
}

double r_eval(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t, double z,
              const QuadratureSpec& quad) {
  return q_eval(params, traj, init, t, z, z, quad);
}

// ---------------------------------------------------------------------------
// Closed-form mean fitness

double r0_prime(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                const QuadratureSpec& quad) {
  check_t(t, "r0_prime");
  if (init.is_clonal()) return 0.0;
  const double mu = params.mu();
  const double mt = mu * t;
  // phi_0(t, t) = (y1(0, t, t), y2(t))
  const double phi1 = y1_split(mu, traj, 0.0, t, 0.0, 0.0, quad).base;
  const double phi2 = hyp_ratio_sinh_cosh(mt, mt) / mu;
  const double lag = delta(traj, t) - h_delta(params, traj, t, quad);
  const double sh = sech(mt);
  return lag * sh * d1_c0(init, params, phi1, phi2) + sh * sh * d2_c0(init, params, phi1, phi2);
}

double mbar_clonal(const ModelParams& params, const EnvTrajectory& traj, double t, const QuadratureSpec& quad) {
  check_t(t, "mbar_clonal");
  params.validate();
  const double mu = params.mu();
  const double mt = mu * t;
  const double lag = h_delta(params, traj, t, quad) - delta(traj, t);
  return -mu * 0.5 * params.n * hyp_ratio_sinh_cosh(mt, mt) - 0.5 * lag * lag;
}

double mbar_closed(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                   const QuadratureSpec& quad) {
  return mbar_clonal(params, traj, t, quad) + r0_prime(params, traj, init, t, quad);
}

// ---------------------------------------------------------------------------
// Stencil-extracted moments

QPartials q_partials(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                     PartialSet which, const AnalyticOptions& opts) {
  check_t(t, "q_partials");
  if (t == 0.0) throw DomainError("q_partials: t must be > 0 (use the initial condition at t = 0)");
  const double mu = params.mu();
  const double scale = 1.0 / (mu + omega_of(traj));
  const double cap = t / 4.0;  // keeps t + z >= 0 on every stencil node
  const double h1 = std::min(opts.step_scale_1 * scale, cap);
  const double h2 = std::min(opts.step_scale_2 * scale, cap);
  const double h3 = std::min(opts.step_scale_3 * scale, cap / 2.0);
  const double hm = std::min(opts.step_scale_mixed * scale, cap);
  const double sech_t = sech(mu * t);

  auto r = [&](double z) { return q_unchecked(params, traj, init, t, z, 0.0, opts.quad); };
  // Q(t, z, z + b sech(mu t)): the y1 perturbation is O(b).
  auto qb = [&](double z, double b) { return q_unchecked(params, traj, init, t, z, -b * sech_t, opts.quad); };

  QPartials out;
  // Second Richardson level: removes the h^4 term left by the first.
  out.dR = (16.0 * stencil_derivative(r, 0.0, 1, 0.5 * h1) - stencil_derivative(r, 0.0, 1, h1)) / 15.0;
  if (which == PartialSet::mean) return out;

  out.dRR = richardson(stencil_derivative(r, 0.0, 2, h2), stencil_derivative(r, 0.0, 2, 0.5 * h2));
  out.dQt = stencil_derivative([&](double b) { return qb(0.0, b); }, 0.0, 1, h1);
  if (which == PartialSet::variance) return out;

  out.dRRR = richardson(stencil_derivative(r, 0.0, 3, h3), stencil_derivative(r, 0.0, 3, 0.5 * h3));
  auto mixed = [&](double h) {
    return (qb(h, h) - qb(h, -h) - qb(-h, h) + qb(-h, -h)) / (4.0 * h * h);
  };
  out.dQdiag = richardson(mixed(hm), mixed(0.5 * hm));
  return out;
}

double mbar_from_q(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                   const AnalyticOptions& opts) {
  if (t == 0.0) return d2_c0(init, params, 0.0, 0.0);
  const double d = delta(traj, t);
  return q_partials(params, traj, init, t, PartialSet::mean, opts).dR - 0.5 * d * d;
}

namespace {

double initial_variance(const ModelParams& params, const InitialCondition& init) {
  if (init.is_clonal() || std::holds_alternative<init::Dirac>(init.variant())) return 0.0;
  auto g = [&](double z2) { return d2_c0(init, params, 0.0, z2); };
  return stencil_derivative(g, 0.0, 1, 1e-3);
}

double variance_from(const ModelParams& params, const EnvTrajectory& traj, double t, const QPartials& p,
                     std::vector<std::string>* warnings) {
  (void)params;
  const double dp = delta_prime(traj, t);
  const double v = p.dRR + dp * p.dQt;
  // Size of the cancellation between the two terms sets the noise floor.
  const double floor = 1e-7 * (std::fabs(p.dRR) + std::fabs(dp * p.dQt)) + 1e-14;
  if (v < -floor) {
    throw NumericalError("variance_closed: negative variance " + std::to_string(v) + " at t = " + std::to_string(t));
  }
  if (v < 0.0) {
    if (warnings) warnings->push_back("variance clamped to 0 at t = " + std::to_string(t));
    return 0.0;
  }
  return v;
}

}  // namespace

double variance_closed(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                       const AnalyticOptions& opts, std::vector<std::string>* warnings) {
  check_t(t, "variance_closed");
  if (t == 0.0) return initial_variance(params, init);
  return variance_from(params, traj, t, q_partials(params, traj, init, t, PartialSet::variance, opts), warnings);
}

namespace {

double skewness_from(const ModelParams& params, const EnvTrajectory& traj, double t, const QPartials& p, double vm) {
  if (!(vm > 0.0)) {
    throw DomainError("skewness_closed: variance is zero at t = " + std::to_string(t) + ", skewness undefined");
  }
  const double mu = params.mu();
  const double dp = delta_prime(traj, t);
  const double dpp = delta_second(traj, t);
  const double th = std::tanh(mu * t);
  const double m3 = p.dRRR + 2.0 * mu * mu * p.dR + dpp * p.dQt + 3.0 * dp * (p.dQdiag - mu * th * p.dQt);
  return m3 / std::pow(vm, 1.5);
}

}  // namespace

double skewness_closed(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init, double t,
                       const AnalyticOptions& opts) {
  check_t(t, "skewness_closed");
  if (t == 0.0) {
    const double v0 = initial_variance(params, init);
    if (!(v0 > 0.0)) throw DomainError("skewness_closed: zero initial variance, skewness undefined at t = 0");
    auto g = [&](double z2) { return d2_c0(init, params, 0.0, z2); };
    return stencil_derivative(g, 0.0, 2, 1e-3) / std::pow(v0, 1.5);
  }
  const QPartials p = q_partials(params, traj, init, t, PartialSet::skewness, opts);
  return skewness_from(params, traj, t, p, variance_from(params, traj, t, p, nullptr));
}

// ---------------------------------------------------------------------------
// Asymptotics and thresholds

AsymptoticSummary asymptotic_summary(const ModelParams& params, const EnvTrajectory& traj) {
  const double mu = params.mu();
  const double n = params.n;
  const double load = -mu * n / 2.0;
  const double vm0 = mu * mu * n / 2.0;
  AsymptoticSummary s;
  s.kind = traj.kind();
  s.vm_inf = kNaN;
  s.skew_inf = kNaN;
  std::visit(overloaded{
                 [&](const traj::Linear& l) {
                   const double c2 = l.c * l.c;
                   s.mbar_inf = load - c2 / (2.0 * mu * mu);
                   s.vm_inf = vm0 + c2 / mu;
                   s.skew_inf = -(mu * mu * mu * n + 3.0 * c2) / std::pow(s.vm_inf, 1.5);
                   s.mu_star = std::cbrt(2.0 * c2 / n);
                 },
                 [&](const traj::Power& p) {
                   if (p.alpha < 1.0 || p.c == 0.0) {
                     s.mbar_inf = load;
                     s.vm_inf = vm0;
                   } else {
                     s.unbounded = true;
                     s.mbar_inf = -std::numeric_limits<double>::infinity();
                     s.vm_inf = std::numeric_limits<double>::infinity();
                   }
                 },
                 [&](const traj::Sin& w) {
                   const double o2 = w.omega * w.omega;
                   s.periodic = true;
                   s.period = M_PI / w.omega;
                   s.mbar_inf = load - w.delta_max * w.delta_max * o2 / (4.0 * o2 + 4.0 * mu * mu);
                 },
                 [&](const traj::SinSq& w) {
                   const double o2 = w.omega * w.omega;
                   s.periodic = true;
                   s.period = M_PI / w.omega;
                   s.mbar_inf = load - w.delta_max * w.delta_max * o2 / (16.0 * o2 + 4.0 * mu * mu);
                 },
                 [&](const traj::LinearPlusSin& w) {
                   const double o2 = w.omega * w.omega;
                   s.periodic = true;
                   s.period = 2.0 * M_PI / w.omega;
                   s.mbar_inf = load - w.c * w.c / (2.0 * mu * mu) -
                                w.delta_max * w.delta_max * o2 / (4.0 * o2 + 4.0 * mu * mu);
                 },
                 [](const traj::Tabulated&) {
                   throw DomainError("asymptotic_summary: no closed-form asymptotics for tabulated trajectories");
                 },
             },
             traj.variant());
  return s;
}

CriticalSpeed critical_speed(const ModelParams& params) {
  return critical_speed_with_fluctuations(params, 0.0, 0.0);
}

CriticalSpeed critical_speed_with_fluctuations(const ModelParams& params, double delta_max, double omega) {
  if (delta_max < 0.0 || omega < 0.0) throw DomainError("critical_speed: arguments must be non-negative");
  const double mu = params.mu();
  double radicand = 2.0 * params.r_max - mu * params.n;
  if (delta_max > 0.0 && omega > 0.0) {
    const double o2 = omega * omega;
    radicand -= delta_max * delta_max * o2 / (2.0 * o2 + 2.0 * mu * mu);
  }
  if (radicand < 0.0) return {0.0, false};
  return {mu * std::sqrt(radicand), true};
}

// ---------------------------------------------------------------------------
// Trajectory assembly

std::string to_string(Source s) {
  switch (s) {
    case Source::analytic:
      return "analytic";
    case Source::ibm:
      return "ibm";
    case Source::ide:
      return "ide";
  }
  return "unknown";
}

void write_moments_csv(std::ostream& out, const MomentTrajectory& traj) {
  const bool with_rho = !traj.rho.empty();
  out << "t,mbar,vm,skew" << (with_rho ? ",rho" : "") << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    put(traj.times[i]);
    out << ',';
    put(traj.mbar[i]);
    out << ',';
    put(traj.vm.empty() ? kNaN : traj.vm[i]);
    out << ',';
    put(traj.skew.empty() ? kNaN : traj.skew[i]);
    if (with_rho) {
      out << ',';
      put(traj.rho[i]);
    }
    out << '\n';
  }
}

MomentTrajectory mean_fitness_trajectory(const ModelParams& params, const EnvTrajectory& traj,
                                         const InitialCondition& init, const std::vector<double>& times,
                                         const MomentOptions& options) {
  params.validate();
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw DomainError("mean_fitness_trajectory: times must be strictly increasing");
  }
  const std::size_t count = times.size();
  MomentTrajectory out;
  out.source = Source::analytic;
  out.times = times;
  out.mbar.assign(count, 0.0);
  if (options.variance || options.skewness) out.vm.assign(count, 0.0);
  if (options.skewness) out.skew.assign(count, kNaN);
  std::vector<std::vector<std::string>> notes(count);

  for_each_index(count, options.policy, [&](std::size_t i) {
    const double t = times[i];
    out.mbar[i] = mbar_closed(params, traj, init, t, options.analytic.quad);
    if (!options.variance && !options.skewness) return;
    if (t == 0.0) {
      out.vm[i] = initial_variance(params, init);
      if (options.skewness && out.vm[i] > 0.0) out.skew[i] = skewness_closed(params, traj, init, t, options.analytic);
      return;
    }
    const QPartials p = q_partials(params, traj, init, t,
                                   options.skewness ? PartialSet::skewness : PartialSet::variance, options.analytic);
    out.vm[i] = variance_from(params, traj, t, p, &notes[i]);
    if (options.skewness) {
      if (out.vm[i] > 0.0) {
        out.skew[i] = skewness_from(params, traj, t, p, out.vm[i]);
      } else {
        notes[i].push_back("skewness undefined (zero variance) at t = " + std::to_string(t));
      }
    }
  });
  for (auto& n : notes) out.warnings.insert(out.warnings.end(), n.begin(), n.end());

  if (options.rho) {
    out.rho = persistence_rho(params, traj, init, times, options.rho0, 1e-12, options.analytic.quad).rho;
  }
  return out;
}

RhoSeries integrate_rho(const std::function<double(double)>& mbar, double r_max, const std::vector<double>& times,
                        double rho0, double floor) {
  if (!(rho0 > 0.0)) throw DomainError("persistence_rho: rho0 must be > 0");
  RhoSeries out;
  out.times = times;
  out.rho.resize(times.size());
  if (times.empty()) return out;
  double rho = rho0;
  out.rho[0] = rho;
  auto rhs = [&](double t, double y) { return y * (r_max + mbar(t) - y); };
  double r_prev = r_max + mbar(times[0]);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double t0 = times[k - 1];
    const double h = times[k] - t0;
    if (!(h > 0.0)) throw DomainError("persistence_rho: times must be strictly increasing");
    const double r_mid = r_max + mbar(t0 + 0.5 * h);
    const double r_end = r_max + mbar(times[k]);
    const double k1 = rho * (r_prev - rho);
    const double y2 = rho + 0.5 * h * k1;
    const double k2 = y2 * (r_mid - y2);
    const double y3 = rho + 0.5 * h * k2;
    const double k3 = y3 * (r_mid - y3);
    const double y4 = rho + h * k3;
    const double k4 = y4 * (r_end - y4);
    rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    r_prev = r_end;
    if (!(rho > 0.0)) {
      throw NumericalError("persistence_rho: rho became non-positive at t = " + std::to_string(times[k]) +
                           "; refine the time grid");
    }
    out.rho[k] = rho;
    if (!out.extinct && rho < floor) {
      out.extinct = true;
      out.extinction_time = times[k];
    }
  }
  (void)rhs;
  return out;
}

RhoSeries persistence_rho(const ModelParams& params, const EnvTrajectory& traj, const InitialCondition& init,
                          const std::vector<double>& times, double rho0, double floor, const QuadratureSpec& quad) {
  return integrate_rho([&](double t) { return mbar_closed(params, traj, init, t, quad); }, params.r_max, times, rho0,
                       floor);
}

std::vector<double> uniform_times(double t_end, std::size_t points) {
  if (points < 2 || !(t_end > 0.0)) return {0.0};
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i) {
    out[i] = t_end * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return out;
}

}  // namespace evoclim
