#include <doctest.h>

#include <cmath>
#include <sstream>

#include "evoclim/analytic.hpp"
#include "evoclim/error.hpp"

using namespace evoclim;

namespace {

const ModelParams kPaper{};  // n = 3, lambda = 0.005, U = 0.1125
const double kMu = 0.02371708245126284;
const double kC = 0.006326339908391427;  // sqrt(n mu^3)

double clonal_still(double t) { return -kMu * 1.5 * std::tanh(kMu * t); }

// Linear drift: H - delta = -c tanh(mu t) / mu.
double clonal_linear(double c, double t) {
  const double lag = c * std::tanh(kMu * t) / kMu;
  return clonal_still(t) - 0.5 * lag * lag;
}

// Simpson on a fine uniform grid, independent of the engine's quadrature.
template <class F>
double simpson(F f, double a, double b, int panels = 20000) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("still optimum from a clonal start") {
  const EnvTrajectory still = EnvTrajectory::none();
  const auto clonal = InitialCondition::clonal();
  for (double t : {0.0, 1.0, 25.0, 300.0, 1000.0, 1e5}) {
    CHECK(mbar_closed(kPaper, still, clonal, t) == doctest::Approx(clonal_still(t)).epsilon(1e-13));
  }
  CHECK(mbar_closed(kPaper, still, clonal, 0.0) == 0.0);
  CHECK(std::fabs(mbar_closed(kPaper, still, clonal, 1000.0) + 1.5 * kMu) < 1e-6);
}

TEST_CASE("linear drift closed form and plateau") {
  const EnvTrajectory lin(traj::Linear{kC});
  const auto clonal = InitialCondition::clonal();
  for (double t : {0.5, 10.0, 100.0, 400.0, 1000.0}) {
    CHECK(mbar_closed(kPaper, lin, clonal, t) == doctest::Approx(clonal_linear(kC, t)).epsilon(1e-10));
    CHECK(h_delta(kPaper, lin, t) == doctest::Approx(kC * (t - std::tanh(kMu * t) / kMu)).epsilon(1e-10));
  }
  CHECK(mbar_closed(kPaper, lin, clonal, 1000.0) == doctest::Approx(-0.07115124735378853).epsilon(1e-9));
}

TEST_CASE("weighted history of oscillating optima against independent quadrature") {
  const double dmax = std::sqrt(31.0 * 0.005), w = kMu * M_PI;
  const EnvTrajectory sn(traj::Sin{dmax, w});
  const EnvTrajectory sq(traj::SinSq{dmax, w});
  for (double t : {3.0, 47.0, 260.0}) {
    const double c = std::cosh(kMu * t);
    const double hs = simpson([&](double u) { return kMu * dmax * std::sin(w * u) * std::sinh(kMu * u) / c; }, 0.0, t);
    const double hq =
        simpson([&](double u) { return kMu * dmax * std::pow(std::sin(w * u), 2) * std::sinh(kMu * u) / c; }, 0.0, t);
    CHECK(h_delta(kPaper, sn, t) == doctest::Approx(hs).epsilon(1e-10));
    CHECK(h_delta(kPaper, sq, t) == doctest::Approx(hq).epsilon(1e-10));
  }
}

TEST_CASE("tabulated linear path reproduces the closed form") {
  traj::Tabulated tab;
  for (int k = 0; k <= 400; ++k) {
    tab.times.push_back(2.5 * k);
    tab.values.push_back(kC * 2.5 * k);
  }
  const EnvTrajectory path(tab), lin(traj::Linear{kC});
  const auto clonal = InitialCondition::clonal();
  for (double t : {1.3, 50.0, 777.7, 1000.0}) {
    CHECK(mbar_closed(kPaper, path, clonal, t) == doctest::Approx(mbar_closed(kPaper, lin, clonal, t)).epsilon(1e-9));
  }
}

TEST_CASE("characteristics") {
  CHECK(y2(kPaper, 0.0) == 0.0);
  CHECK(y2(kPaper, 10.0) == doctest::Approx(std::tanh(kMu * 10.0) / kMu).epsilon(1e-14));
  const auto p = phi(kPaper, EnvTrajectory::none(), 0.0, 0.3, 0.1);
  CHECK(p.y1 == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(p.y2 == doctest::Approx(std::tanh(0.3 * kMu) / kMu).epsilon(1e-14));
  const EnvTrajectory lin(traj::Linear{kC});
  // y1(t, z, z) = int_0^z c (z + t - s) cosh(mu s) / cosh(mu z) ds
  const double z = 4.0, t = 9.0;
  const double e = simpson([&](double s) { return kC * (z + t - s) * std::cosh(kMu * s) / std::cosh(kMu * z); }, 0.0, z);
  CHECK(y1(kPaper, lin, t, z, z) == doctest::Approx(e).epsilon(1e-11));
}

TEST_CASE("Q vanishes at the origin for every closed-form variant") {
  const double dmax = std::sqrt(31.0 * 0.005), w = kMu * M_PI;
  const std::vector<EnvTrajectory> trajs = {
      EnvTrajectory(traj::Linear{kC}), EnvTrajectory(traj::Power{0.05, 0.5}), EnvTrajectory(traj::Sin{dmax, w}),
      EnvTrajectory(traj::SinSq{dmax, w}), EnvTrajectory(traj::LinearPlusSin{kC, dmax, w})};
  for (const auto& tr : trajs) {
    for (double t : {0.0, 20.0, 350.0}) {
      CHECK(std::fabs(q_eval(kPaper, tr, InitialCondition::clonal(), t, 0.0, 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("CGF route agrees with the closed form") {
  const double dmax = std::sqrt(31.0 * 0.005), w = kMu * M_PI;
  const auto clonal = InitialCondition::clonal();
  for (const auto& tr : {EnvTrajectory(traj::Linear{kC}), EnvTrajectory(traj::Sin{dmax, w})}) {
    for (double t : {5.0, 123.0, 900.0}) {
      CHECK(std::fabs(mbar_from_q(kPaper, tr, clonal, t) - mbar_closed(kPaper, tr, clonal, t)) < 1e-6);
    }
  }
}

TEST_CASE("Dirac start decomposes into the clonal curve plus an initial-condition term") {
  const double d = 0.2;
  const auto dirac = InitialCondition::dirac_on_axis(d);
  const EnvTrajectory still = EnvTrajectory::none();
  CHECK(mbar_closed(kPaper, still, dirac, 0.0) == doctest::Approx(-d * d / 2.0).epsilon(1e-15));
  for (double t : {0.0, 4.0, 60.0, 500.0}) {
    CHECK(mbar_closed(kPaper, still, dirac, t) ==
          doctest::Approx(mbar_clonal(kPaper, still, t) + r0_prime(kPaper, still, dirac, t)).epsilon(1e-13));
  }
  CHECK(std::fabs(r0_prime(kPaper, still, dirac, 2000.0)) < 1e-8);
  CHECK(std::fabs(mbar_from_q(kPaper, still, dirac, 60.0) - mbar_closed(kPaper, still, dirac, 60.0)) < 1e-6);
}

TEST_CASE("the Gaussian of variance mu per trait is stationary at a still optimum") {
  const InitialCondition eq(init::IsotropicGaussian{0.0, kMu});
  const EnvTrajectory still = EnvTrajectory::none();
  for (double t : {0.0, 7.0, 150.0, 1500.0}) {
    CHECK(mbar_closed(kPaper, still, eq, t) == doctest::Approx(-1.5 * kMu).epsilon(1e-10));
  }
  CHECK(variance_closed(kPaper, still, eq, 0.0) == doctest::Approx(1.5 * kMu * kMu).epsilon(1e-6));
  CHECK(variance_closed(kPaper, still, eq, 80.0) == doctest::Approx(1.5 * kMu * kMu).epsilon(1e-4));
}

TEST_CASE("variance and skewness of the lag load") {
  const EnvTrajectory lin(traj::Linear{kC});
  const auto clonal = InitialCondition::clonal();
  const double vinf = 1.5 * kMu * kMu + kC * kC / kMu;
  CHECK(vinf == doctest::Approx(0.00253125).epsilon(1e-12));
  CHECK(variance_closed(kPaper, lin, clonal, 0.0) == 0.0);
  CHECK(variance_closed(kPaper, lin, clonal, 2000.0) == doctest::Approx(vinf).epsilon(5e-3));
  CHECK(skewness_closed(kPaper, lin, clonal, 2000.0) == doctest::Approx(-1.257078722109418).epsilon(1e-2));
  CHECK_THROWS_AS(skewness_closed(kPaper, lin, clonal, 0.0), DomainError);
}

TEST_CASE("asymptotic summaries") {
  const auto lin = asymptotic_summary(kPaper, EnvTrajectory(traj::Linear{kC}));
  CHECK(lin.kind == "linear");
  CHECK(lin.mbar_inf == doctest::Approx(-0.07115124735378853).epsilon(1e-13));
  CHECK(lin.vm_inf == doctest::Approx(0.00253125).epsilon(1e-13));
  CHECK(lin.skew_inf == doctest::Approx(-1.257078722109418).epsilon(1e-12));
  CHECK(lin.mu_star == doctest::Approx(0.02988165142243836).epsilon(1e-12));

  const double w = kMu * M_PI;
  const auto sn = asymptotic_summary(kPaper, EnvTrajectory(traj::Sin{std::sqrt(31.0 * 0.005), w}));
  CHECK(sn.periodic);
  CHECK(sn.mbar_inf == doctest::Approx(-0.07076063652831723).epsilon(1e-12));
  const auto sq = asymptotic_summary(kPaper, EnvTrajectory(traj::SinSq{10.0 * std::sqrt(0.005), w}));
  CHECK(sq.mbar_inf == doctest::Approx(-0.06605360733214872).epsilon(1e-12));

  CHECK_FALSE(asymptotic_summary(kPaper, EnvTrajectory(traj::Power{0.1, 0.5})).unbounded);
  CHECK(asymptotic_summary(kPaper, EnvTrajectory(traj::Power{0.1, 1.5})).unbounded);
  CHECK_THROWS_AS(asymptotic_summary(kPaper, EnvTrajectory(traj::Tabulated{{0.0, 1.0}, {0.0, 1.0}})), DomainError);
}

TEST_CASE("critical speeds") {
  ModelParams p = kPaper;
  p.r_max = 0.1;
  const auto cs = critical_speed(p);
  CHECK(cs.persistence_possible);
  CHECK(cs.c_star == doctest::Approx(0.00851336733399270).epsilon(1e-13));
  // r_max + mbar_inf changes sign at c*
  const auto at = [&](double c) { return p.r_max + asymptotic_summary(p, EnvTrajectory(traj::Linear{c})).mbar_inf; };
  CHECK(at(cs.c_star) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(at(0.99 * cs.c_star) > 0.0);
  CHECK(at(1.01 * cs.c_star) < 0.0);

  p.r_max = 0.01;
  CHECK_FALSE(critical_speed(p).persistence_possible);
  p.r_max = 0.1;
  const auto cf = critical_speed_with_fluctuations(p, 0.3, 0.05);
  CHECK(cf.c_star < cs.c_star);
  CHECK_THROWS_AS(critical_speed_with_fluctuations(p, -1.0, 0.1), DomainError);
}

TEST_CASE("trajectory assembly is policy independent and exports cleanly") {
  const EnvTrajectory sn(traj::Sin{0.3, 0.05});
  const auto times = uniform_times(300.0, 31);
  MomentOptions serial;
  serial.policy = Policy::serial;
  serial.skewness = false;
  MomentOptions parallel = serial;
  parallel.policy = Policy::parallel;
  const auto a = mean_fitness_trajectory(kPaper, sn, InitialCondition::clonal(), times, serial);
  const auto b = mean_fitness_trajectory(kPaper, sn, InitialCondition::clonal(), times, parallel);
  CHECK(a.mbar == b.mbar);
  CHECK(a.vm == b.vm);
  REQUIRE(a.mbar.size() == times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(a.mbar[i] == mbar_closed(kPaper, sn, InitialCondition::clonal(), times[i], serial.analytic.quad));
  }

  std::ostringstream csv;
  write_moments_csv(csv, a);
  const std::string text = csv.str();
  CHECK(text.rfind("t,mbar,vm,skew\n", 0) == 0);
  CHECK(text.find("nan") != std::string::npos);
}

TEST_CASE("persistence: logistic growth under a constant mean fitness") {
  const double r = 0.05, rho0 = 0.01;
  const auto times = uniform_times(200.0, 401);
  const auto s = integrate_rho([&](double) { return 0.0; }, r, times, rho0);
  for (std::size_t k = 0; k < times.size(); k += 50) {
    const double e = r * rho0 / (rho0 + (r - rho0) * std::exp(-r * times[k]));
    CHECK(s.rho[k] == doctest::Approx(e).epsilon(1e-8));
  }
  CHECK_FALSE(s.extinct);

  const auto dying = integrate_rho([](double) { return -0.5; }, 0.0, uniform_times(200.0, 2001), 1.0);
  CHECK(dying.extinct);
  CHECK(dying.extinction_time > 0.0);
}

TEST_CASE("invalid inputs") {
  const EnvTrajectory still = EnvTrajectory::none();
  CHECK_THROWS_AS(mbar_closed(kPaper, still, InitialCondition::clonal(), -1.0), DomainError);
  CHECK_THROWS_AS(InitialCondition(init::IsotropicGaussian{0.0, -1.0}), DomainError);
  ModelParams zero = kPaper;
  zero.U = 0.0;
  CHECK_THROWS_AS(mbar_closed(zero, still, InitialCondition::clonal(), 1.0), DomainError);
}
