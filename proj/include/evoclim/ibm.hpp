#pragma once
// Wright-Fisher individual-based model on a Fisher geometric landscape:
// constant population size, multinomial selection on Darwinian fitness
// exp(m_i), Poisson number of Gaussian mutations per offspring.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "evoclim/environment.hpp"
#include "evoclim/numerics.hpp"
#include "evoclim/parallel.hpp"

namespace evoclim {

struct PopulationState {
  std::size_t N = 0;
  int n = 0;
  std::vector<double> phenotypes;  // row-major N x n
  std::int64_t generation = 0;
  RngStream stream;
  CounterRng rng{RngStream{}};
  std::normal_distribution<double> normal{0.0, 1.0};

  const double* row(std::size_t i) const { return phenotypes.data() + i * static_cast<std::size_t>(n); }
  double* row(std::size_t i) { return phenotypes.data() + i * static_cast<std::size_t>(n); }
};

/// Everyone at the origin (the optimum at t = 0).
PopulationState init_clonal(const ModelParams& params, std::size_t N, const RngStream& stream);
/// Everyone at phenotype x0 (length n).
PopulationState init_clonal_at(const ModelParams& params, std::size_t N, const std::vector<double>& x0,
                               const RngStream& stream);

/// Population mean of m_i = -|x_i - delta(t) u|^2 / 2 at t = generation.
double population_mean_fitness(const PopulationState& state, const EnvTrajectory& traj);
/// Mean components (mean x_1, -mean |x|^2 / 2).
std::pair<double, double> population_mean_components(const PopulationState& state);

/// Offspring parent indices, ascending, drawn by inverse CDF on the cumulative
/// weights with sorted uniforms built from exponential spacings.
std::vector<std::uint32_t> multinomial_indices(const std::vector<double>& weights, std::size_t draws,
                                               CounterRng& rng);

/// One generation: selection against the optimum at t = generation, then
/// mutation, then generation += 1.
void step(PopulationState& state, const ModelParams& params, const EnvTrajectory& traj);

struct IbmConfig {
  std::size_t N = 1000;
  std::int64_t T = 1000;
  std::size_t replicates = 100;
  RngStream base_stream{};
  std::int64_t record_every = 1;
  std::vector<double> x0;  // empty: clonal at the origin
  bool keep_series = false;
  bool components = false;
  Policy policy = Policy::parallel;
};

struct ReplicateStats {
  std::vector<double> times;
  std::vector<double> mean_mbar;
  std::vector<double> q025;
  std::vector<double> q975;
  std::vector<double> se_mbar;                 // standard error of mean_mbar
  std::vector<std::vector<double>> series;     // [replicate][record], if kept
  std::vector<double> mean_m1, mean_m2;        // component means, if requested
};

/// Runs `replicates` independent populations; replicate r uses stream
/// base_stream.stream_id + r. Records at 0, record_every, ... and at T.
ReplicateStats run_replicates(const ModelParams& params, const EnvTrajectory& traj, const IbmConfig& config);

/// Type-7 (linear interpolation) empirical quantile of an ascending sample.
double empirical_quantile(const std::vector<double>& sorted, double p);

void write_replicate_csv(std::ostream& out, const ReplicateStats& stats);
/// One row per record: t followed by every replicate's mean fitness.
void write_replicate_matrix(std::ostream& out, const ReplicateStats& stats);

}  // namespace evoclim
