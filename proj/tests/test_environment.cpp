#include <doctest.h>

#include <cmath>
#include <sstream>

#include "evoclim/environment.hpp"
#include "evoclim/error.hpp"

using namespace evoclim;

TEST_CASE("paper parameters") {
  ModelParams p;
  CHECK(p.mu() == doctest::Approx(0.02371708245126284).epsilon(1e-14));
  CHECK(p.u_c() == doctest::Approx(0.01125).epsilon(1e-15));
  p.U = p.u_c();
  CHECK(p.mu() == doctest::Approx(0.0075).epsilon(1e-14));
}

TEST_CASE("parameter validation") {
  ModelParams p;
  p.U = 0.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  CHECK_NOTHROW(p.validate(true));
  p.U = -1.0;
  CHECK_THROWS_AS(p.validate(true), DomainError);
  p = ModelParams{};
  p.n = 0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = ModelParams{};
  p.lambda = 0.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("closed-form trajectories and their derivatives") {
  const double t = 37.5;
  const EnvTrajectory lin(traj::Linear{0.01});
  CHECK(delta(lin, t) == doctest::Approx(0.375));
  CHECK(delta_prime(lin, t) == doctest::Approx(0.01));
  CHECK(delta_second(lin, t) == 0.0);

  const EnvTrajectory pw(traj::Power{0.2, 0.5});
  CHECK(delta(pw, t) == doctest::Approx(0.2 * std::sqrt(t)));
  CHECK(delta_prime(pw, t) == doctest::Approx(0.1 / std::sqrt(t)));

  const EnvTrajectory s(traj::Sin{0.4, 0.07});
  CHECK(delta(s, t) == doctest::Approx(0.4 * std::sin(0.07 * t)));
  CHECK(delta_second(s, t) == doctest::Approx(-0.4 * 0.0049 * std::sin(0.07 * t)));

  const EnvTrajectory s2(traj::SinSq{0.4, 0.07});
  CHECK(delta(s2, t) == doctest::Approx(0.4 * std::pow(std::sin(0.07 * t), 2)));
  CHECK(delta_prime(s2, t) == doctest::Approx(0.4 * 0.07 * std::sin(0.14 * t)));

  const EnvTrajectory ls(traj::LinearPlusSin{0.01, 0.4, 0.07});
  CHECK(delta(ls, t) == doctest::Approx(0.375 + 0.4 * std::sin(0.07 * t)));

  for (const auto* tr : {&lin, &pw, &s, &s2, &ls}) {
    CHECK(delta(*tr, 0.0) == 0.0);
    CHECK(tr->is_closed_form());
    CHECK(std::isinf(tr->horizon()));
  }
}

TEST_CASE("invalid trajectories are rejected") {
  CHECK_THROWS_AS(EnvTrajectory(traj::Power{1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(EnvTrajectory(traj::Power{1.0, -0.5}), DomainError);
  CHECK_THROWS_AS(EnvTrajectory(traj::Tabulated{{0.0, 1.0}, {0.5, 1.0}}), DomainError);
  CHECK_THROWS_AS(EnvTrajectory(traj::Tabulated{{0.0, 1.0, 1.0}, {0.0, 1.0, 2.0}}), DomainError);
  CHECK_THROWS_AS(delta(EnvTrajectory(traj::Linear{1.0}), -1.0), DomainError);
}

TEST_CASE("tabulated paths interpolate linearly and stop at the horizon") {
  const EnvTrajectory tab(traj::Tabulated{{0.0, 1.0, 3.0}, {0.0, 2.0, 0.0}});
  CHECK(delta(tab, 0.5) == doctest::Approx(1.0));
  CHECK(delta(tab, 2.0) == doctest::Approx(1.0));
  CHECK(delta_prime(tab, 2.0) == doctest::Approx(-1.0));
  CHECK(tab.horizon() == 3.0);
  CHECK_THROWS_AS(delta(tab, 3.5), DomainError);
}

TEST_CASE("trajectory CSV round trip is exact") {
  traj::Tabulated path{{0.0, 0.1, 0.2, 0.30000000000000004}, {0.0, -1e-3, 0.123456789012345678, 7.0}};
  std::stringstream ss;
  write_trajectory_csv(ss, path);
  const auto back = read_trajectory_csv(ss);
  CHECK(back.times == path.times);
  CHECK(back.values == path.values);

  std::stringstream bad("time,value\n0,0\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad), DomainError);
}

TEST_CASE("OU realizations are reproducible and have the stationary spread") {
  const auto a = realize_ou(0.01, 0.1, 0.1, 1000.0, RngStream{3, 0});
  const auto b = realize_ou(0.01, 0.1, 0.1, 1000.0, RngStream{3, 0});
  const auto c = realize_ou(0.01, 0.1, 0.1, 1000.0, RngStream{3, 1});
  const auto& ta = std::get<traj::Tabulated>(a.variant());
  CHECK(ta.times.size() == 10001);
  CHECK(ta.times.back() == doctest::Approx(1000.0));
  CHECK(ta.values == std::get<traj::Tabulated>(b.variant()).values);
  CHECK(ta.values != std::get<traj::Tabulated>(c.variant()).values);

  // Stationary variance beta^2 / (2 nu) = 0.5, pooled over many short paths.
  double s2 = 0.0;
  const int paths = 400;
  for (int k = 0; k < paths; ++k) {
    const auto p = realize_ou(0.05, 0.1, 0.1, 200.0, RngStream{11, static_cast<std::uint64_t>(k)});
    const double d = std::get<traj::Tabulated>(p.variant()).values.back();
    s2 += d * d;
  }
  // Exact variance of the Euler scheme at t = 200, nu dt = 0.005.
  const double a1 = 1.0 - 0.005;
  const double var = 0.01 * 0.1 * (1.0 - std::pow(a1, 4000)) / (1.0 - a1 * a1);
  CHECK(s2 / paths == doctest::Approx(var).epsilon(0.2));
}

TEST_CASE("delta range covers the extremes of the path") {
  const auto [lo, hi] = delta_range(EnvTrajectory(traj::Sin{0.5, 0.1}), 100.0);
  CHECK(lo == doctest::Approx(-0.5).epsilon(1e-4));
  CHECK(hi == doctest::Approx(0.5).epsilon(1e-4));
  const auto [l2, h2] = delta_range(EnvTrajectory(traj::Linear{0.01}), 100.0);
  CHECK(l2 == 0.0);
  CHECK(h2 == doctest::Approx(1.0));
}
