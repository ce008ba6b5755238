#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "evoclim/error.hpp"
#include "evoclim/ibm.hpp"

using namespace evoclim;

namespace {

ModelParams paper() { return ModelParams{}; }

}  // namespace

TEST_CASE("type-7 quantiles") {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  CHECK(empirical_quantile(v, 0.0) == 1.0);
  CHECK(empirical_quantile(v, 1.0) == 4.0);
  CHECK(empirical_quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(empirical_quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(empirical_quantile({7.0}, 0.975) == 7.0);
}

TEST_CASE("multinomial parent draws") {
  CounterRng rng(RngStream{1, 2});
  const std::vector<double> w = {0.0, 1.0, 3.0, 0.0, 6.0};
  const auto idx = multinomial_indices(w, 100000, rng);
  REQUIRE(idx.size() == 100000);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  std::vector<double> count(w.size(), 0.0);
  for (auto i : idx) count[i] += 1.0;
  CHECK(count[0] == 0.0);
  CHECK(count[3] == 0.0);
  // binomial standard deviations are below 160 draws
  CHECK(std::fabs(count[1] - 10000.0) < 800.0);
  CHECK(std::fabs(count[2] - 30000.0) < 800.0);
  CHECK(std::fabs(count[4] - 60000.0) < 800.0);
}

TEST_CASE("parent draws depend only on relative weights") {
  const std::vector<double> w = {0.2, 0.5, 0.1, 0.9};
  std::vector<double> scaled = w;
  for (auto& x : scaled) x *= 1024.0;
  CounterRng a(RngStream{3, 3}), b(RngStream{3, 3});
  CHECK(multinomial_indices(w, 64, a) == multinomial_indices(scaled, 64, b));
}

TEST_CASE("initial populations") {
  const auto p = paper();
  auto s = init_clonal(p, 10, RngStream{1, 1});
  CHECK(s.N == 10);
  CHECK(s.n == 3);
  CHECK(population_mean_fitness(s, EnvTrajectory::none()) == 0.0);
  const auto d = init_clonal_at(p, 10, {0.3, 0.4, 0.0}, RngStream{1, 1});
  CHECK(population_mean_fitness(d, EnvTrajectory::none()) == doctest::Approx(-0.125));
  const auto [m1, m2] = population_mean_components(d);
  CHECK(m1 == doctest::Approx(0.3));
  CHECK(m2 == doctest::Approx(-0.125));
  CHECK_THROWS_AS(init_clonal_at(p, 10, {0.3}, RngStream{1, 1}), DomainError);
  CHECK_THROWS_AS(init_clonal(p, 0, RngStream{1, 1}), DomainError);
}

TEST_CASE("without mutation offspring copy existing phenotypes") {
  auto p = paper();
  p.U = 0.0;
  const EnvTrajectory lin(traj::Linear{0.01});
  auto s = init_clonal(p, 200, RngStream{5, 0});
  // seed diversity with one mutating generation
  ModelParams mutating = paper();
  step(s, mutating, lin);
  std::set<std::vector<double>> parents;
  for (std::size_t i = 0; i < s.N; ++i) parents.insert(std::vector<double>(s.row(i), s.row(i) + s.n));
  for (int g = 0; g < 5; ++g) step(s, p, lin);
  for (std::size_t i = 0; i < s.N; ++i) {
    CHECK(parents.count(std::vector<double>(s.row(i), s.row(i) + s.n)) == 1);
  }
  CHECK(s.generation == 6);
}

TEST_CASE("a single individual is its own parent") {
  auto p = paper();
  p.U = 0.0;
  const EnvTrajectory lin(traj::Linear{0.05});
  auto s = init_clonal_at(p, 1, {0.1, -0.2, 0.3}, RngStream{9, 9});
  for (int g = 0; g < 10; ++g) step(s, p, lin);
  CHECK(s.row(0)[0] == 0.1);
  CHECK(s.row(0)[1] == -0.2);
  const double dx = 0.1 - 0.05 * 10;
  CHECK(population_mean_fitness(s, lin) == doctest::Approx(-(dx * dx + 0.04 + 0.09) / 2.0));
}

TEST_CASE("mutation alone spreads a clonal population at rate U lambda") {
  // Every individual equally fit: a flat landscape is emulated by N = 1.
  const auto p = paper();
  double sum = 0.0;
  const int reps = 4000, T = 20;
  for (int r = 0; r < reps; ++r) {
    auto s = init_clonal(p, 1, RngStream{21, static_cast<std::uint64_t>(r)});
    for (int g = 0; g < T; ++g) step(s, p, EnvTrajectory::none());
    for (int k = 0; k < s.n; ++k) sum += s.row(0)[k] * s.row(0)[k];
  }
  // E|x|^2 = n U lambda T
  CHECK(sum / reps == doctest::Approx(3.0 * p.U * p.lambda * T).epsilon(0.05));
}

TEST_CASE("replicate runs: recording grid, reproducibility and policy independence") {
  const auto p = paper();
  const EnvTrajectory lin(traj::Linear{0.004});
  IbmConfig cfg;
  cfg.N = 64;
  cfg.T = 23;
  cfg.replicates = 9;
  cfg.record_every = 5;
  cfg.base_stream = RngStream{77, 1};
  cfg.keep_series = true;
  cfg.components = true;
  cfg.policy = Policy::serial;
  const auto a = run_replicates(p, lin, cfg);
  CHECK(a.times == std::vector<double>{0, 5, 10, 15, 20, 23});
  CHECK(a.mean_mbar[0] == 0.0);
  CHECK(a.series.size() == 9);
  CHECK(a.mean_m1.size() == a.times.size());
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    CHECK(a.q025[k] <= a.mean_mbar[k] + 1e-15);
    CHECK(a.q975[k] >= a.mean_mbar[k] - 1e-15);
    CHECK(a.se_mbar[k] >= 0.0);
  }
  cfg.policy = Policy::parallel;
  const auto b = run_replicates(p, lin, cfg);
  CHECK(a.mean_mbar == b.mean_mbar);
  CHECK(a.q025 == b.q025);
  CHECK(a.series == b.series);

  // replicate r is the stand-alone run on stream base + r
  IbmConfig one = cfg;
  one.replicates = 1;
  one.base_stream = RngStream{77, 1 + 4};
  const auto c = run_replicates(p, lin, one);
  CHECK(c.series[0] == a.series[4]);

  std::ostringstream csv;
  write_replicate_csv(csv, a);
  CHECK(csv.str().rfind("t,mean_mbar,q025,q975", 0) == 0);
}

TEST_CASE("mutation-selection balance approaches the mutation load") {
  const auto p = paper();
  IbmConfig cfg;
  cfg.N = 500;
  cfg.T = 300;
  cfg.replicates = 40;
  cfg.record_every = 300;
  cfg.base_stream = RngStream{2024, 1};
  const auto r = run_replicates(p, EnvTrajectory::none(), cfg);
  CHECK(r.mean_mbar.back() == doctest::Approx(-1.5 * p.mu()).epsilon(0.1));
}

TEST_CASE("tabulated trajectories must cover the horizon") {
  const auto p = paper();
  const EnvTrajectory tab(traj::Tabulated{{0.0, 10.0}, {0.0, 1.0}});
  IbmConfig cfg;
  cfg.N = 8;
  cfg.T = 20;
  cfg.replicates = 1;
  CHECK_THROWS_AS(run_replicates(p, tab, cfg), DomainError);
}
