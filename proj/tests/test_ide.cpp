#include <doctest.h>

#include <cmath>

#include "evoclim/analytic.hpp"
#include "evoclim/error.hpp"
#include "evoclim/ide.hpp"

using namespace evoclim;

namespace {

ModelParams with_n(int n, double U = 0.1125) {
  ModelParams p;
  p.n = n;
  p.U = U;
  return p;
}

}  // namespace

TEST_CASE("angular weights are unit-sphere areas") {
  CHECK(angular_weight(2) == doctest::Approx(2.0));
  CHECK(angular_weight(3) == doctest::Approx(2.0 * M_PI));
  CHECK(angular_weight(4) == doctest::Approx(4.0 * M_PI));
  CHECK_THROWS_AS(angular_weight(1), DomainError);
}

TEST_CASE("grid validation") {
  Grid1D g;
  g.M = 1000;
  CHECK_THROWS_AS(g.validate(), DomainError);
  GridReduced r;
  r.Lr = -1.0;
  CHECK_THROWS_AS(r.validate(), DomainError);
  CHECK_THROWS_AS(solve_ide_1d(with_n(3), EnvTrajectory::none(), IdeInit::near_dirac(), 1.0, Grid1D{}, 0.05),
                  DomainError);
  CHECK_THROWS_AS(
      solve_pde_reduced(with_n(1), EnvTrajectory::none(), IdeInit::near_dirac(), 1.0, GridReduced{}, 0.05),
      DomainError);
}

TEST_CASE("1D pure selection narrows a Gaussian exactly") {
  // q ~ exp(-x^2/(2 s2) - t x^2/2): variance s2/(1 + t s2), mbar = -var/2
  const auto p = with_n(1, 0.0);
  const double s2 = 0.01, T = 10.0;
  const auto init = IdeInit::gaussian(0.0, s2);
  const auto grid = default_grid_1d(p, EnvTrajectory::none(), T, init, 4096);
  IdeOptions opt;
  opt.record_every = 5.0;
  const auto r = solve_ide_1d(p, EnvTrajectory::none(), init, T, grid, 0.01, opt);
  REQUIRE(r.moments.times.back() == doctest::Approx(T));
  CHECK(r.moments.mbar.front() == doctest::Approx(-s2 / 2.0).epsilon(1e-6));
  // explicit Euler is first order in time
  CHECK(r.moments.mbar.back() == doctest::Approx(-s2 / (1.0 + T * s2) / 2.0).epsilon(2e-3));
  CHECK(r.moments.vm.back() == doctest::Approx(0.5 * std::pow(s2 / (1.0 + T * s2), 2)).epsilon(5e-3));
}

TEST_CASE("1D mutation-selection equilibrium") {
  // Principal eigenvalue of U (J*q - q) - x^2/2 q for lambda = 0.005, U = 0.1125.
  const double oracle = -0.011387962043;
  const auto p = with_n(1);
  const auto init = IdeInit::near_dirac();
  const auto r = solve_ide_1d(p, EnvTrajectory::none(), init, 800.0,
                              default_grid_1d(p, EnvTrajectory::none(), 800.0, init, 4096), 0.05, {100.0, {}, {}});
  CHECK(r.moments.mbar.back() == doctest::Approx(oracle).epsilon(1e-4));
  CHECK(r.max_edge_density < 1e-9);
  // mean fitness decreases monotonically from the near-clonal start
  for (std::size_t k = 1; k < r.moments.mbar.size(); ++k) CHECK(r.moments.mbar[k] <= r.moments.mbar[k - 1] + 1e-12);
}

TEST_CASE("1D solver: a mirrored optimum gives the same mean fitness") {
  const auto p = with_n(1);
  const EnvTrajectory up(traj::Sin{0.2, 0.05}), down(traj::Sin{-0.2, 0.05});
  const auto init = IdeInit::near_dirac();
  const auto g = default_grid_1d(p, up, 100.0, init, 2048);
  const auto a = solve_ide_1d(p, up, init, 100.0, g, 0.05, {10.0, {}, {}});
  Grid1D mirrored = g;
  mirrored.center = -g.center;
  const auto b = solve_ide_1d(p, down, init, 100.0, mirrored, 0.05, {10.0, {}, {}});
  for (std::size_t k = 0; k < a.moments.mbar.size(); ++k) {
    CHECK(a.moments.mbar[k] == doctest::Approx(b.moments.mbar[k]).epsilon(1e-10));
  }
}

TEST_CASE("1D solver records snapshots with unit mass") {
  const auto p = with_n(1);
  const auto init = IdeInit::gaussian(0.1, 0.02);
  const auto g = default_grid_1d(p, EnvTrajectory::none(), 20.0, init, 1024);
  IdeOptions opt;
  opt.snapshot_times = {0.0, 10.0};
  const auto r = solve_ide_1d(p, EnvTrajectory::none(), init, 20.0, g, 0.05, opt);
  REQUIRE(r.snapshots.size() == 2);
  for (const auto& s : r.snapshots) {
    double mass = 0.0;
    for (std::size_t j = 0; j < s.values.size(); ++j) mass += s.values[j];
    mass -= 0.5 * (s.values.front() + s.values.back());
    CHECK(mass * g.dx() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("1D solver rejects unstable time steps") {
  const auto p = with_n(1, 50.0);
  const auto init = IdeInit::near_dirac();
  const auto g = default_grid_1d(p, EnvTrajectory::none(), 1.0, init, 1024);
  CHECK_THROWS_AS(solve_ide_1d(p, EnvTrajectory::none(), init, 1.0, g, 0.05), NumericalError);
}

TEST_CASE("reduced PDE: pure selection on an isotropic Gaussian") {
  // mbar = -n var(t)/2 with var(t) = s2/(1 + t s2)
  const auto p = with_n(2, 0.0);
  const double s2 = 0.01, T = 20.0;
  const auto init = IdeInit::gaussian(0.0, s2);
  const auto g = default_grid_reduced(p, EnvTrajectory::none(), T, init, 256, 128);
  const auto r = solve_pde_reduced(p, EnvTrajectory::none(), init, T, g, 0.05, {10.0, {}, {}});
  CHECK(r.moments.mbar.front() == doctest::Approx(-s2).epsilon(2e-3));
  CHECK(r.moments.mbar.back() == doctest::Approx(-s2 / (1.0 + T * s2)).epsilon(5e-3));
}

TEST_CASE("reduced PDE tracks the analytic mean fitness") {
  const auto p = with_n(3);
  const double mu = p.mu();
  const EnvTrajectory lin(traj::Linear{std::sqrt(3.0 * mu * mu * mu)});
  const auto init = IdeInit::near_dirac();
  const double T = 200.0;
  const auto g = default_grid_reduced(p, lin, T, init, 256, 128);
  IdeOptions opt;
  opt.record_every = 20.0;
  const auto r = solve_pde_reduced(p, lin, init, T, g, 0.05, opt);
  const InitialCondition matched(init::IsotropicGaussian{0.0, p.lambda});
  double scale = 0.0, sup = 0.0;
  for (std::size_t k = 0; k < r.moments.times.size(); ++k) {
    const double a = mbar_closed(p, lin, matched, r.moments.times[k]);
    scale = std::max(scale, std::fabs(a));
    sup = std::max(sup, std::fabs(a - r.moments.mbar[k]));
  }
  CHECK(sup / scale < 0.02);

  opt.policy = Policy::serial;
  const auto s = solve_pde_reduced(p, lin, init, T, g, 0.05, opt);
  CHECK(s.moments.mbar == r.moments.mbar);
}
