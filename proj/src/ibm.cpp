#include "evoclim/ibm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

#include "evoclim/error.hpp"

namespace evoclim {

namespace {

// Inverse-CDF Poisson sampler with a precomputed cumulative table; one
// uniform per draw.
class PoissonTable {
 public:
  explicit PoissonTable(double rate) {
    double p = std::exp(-rate);
    double c = p;
    cdf_.push_back(c);
    for (int k = 1; c < 1.0 - 1e-17 && k < 64; ++k) {
      p *= rate / k;
      c += p;
      cdf_.push_back(c);
    }
  }
  int operator()(double u) const {
    int k = 0;
    const int last = static_cast<int>(cdf_.size()) - 1;
    while (k < last && u > cdf_[k]) ++k;
    return k;
  }

 private:
  std::vector<double> cdf_;
};

// Scratch buffers reused across generations of one replicate.
struct Workspace {
  std::vector<double> cumulative;
  std::vector<double> spacing;
  std::vector<double> aux;
  std::vector<std::uint32_t> parents;
  std::vector<double> next;
  std::optional<PoissonTable> hits;
  double rate = 0.0;
};

// Each draw consumes one 64-bit output: the high half drives the spacing, the
// low half is handed back in `aux` (when given) for the offspring's mutations.
void draw_parents(const std::vector<double>& cumulative, std::size_t draws, CounterRng& rng,
                  std::vector<double>& spacing, std::vector<std::uint32_t>& out, std::vector<double>* aux) {
  spacing.resize(draws + 1);
  if (aux) aux->resize(draws + 1);
  double s = 0.0;
  for (std::size_t k = 0; k <= draws; ++k) {
    const auto [u, v] = rng.uniform_pair();
    s -= std::log(u);
    spacing[k] = s;
    if (aux) (*aux)[k] = v;
  }
  // k-th order statistic of `draws` uniforms is spacing[k] / spacing[draws].
  const double scale = cumulative.back() / spacing[draws];
  out.resize(draws);
  std::size_t j = 0;
  const std::size_t last = cumulative.size() - 1;
  for (std::size_t k = 0; k < draws; ++k) {
    const double target = spacing[k] * scale;
    while (j < last && cumulative[j] <= target) ++j;
    out[k] = static_cast<std::uint32_t>(j);
  }
}

void check_state(const PopulationState& s, const ModelParams& params) {
  if (s.N == 0) throw DomainError("ibm: population size must be >= 1");
  if (s.n != params.n) throw DomainError("ibm: state dimension does not match params.n");
}

}  // namespace

PopulationState init_clonal(const ModelParams& params, std::size_t N, const RngStream& stream) {
  return init_clonal_at(params, N, std::vector<double>(static_cast<std::size_t>(params.n), 0.0), stream);
}

PopulationState init_clonal_at(const ModelParams& params, std::size_t N, const std::vector<double>& x0,
                               const RngStream& stream) {
  params.validate(true);
  if (N == 0) throw DomainError("init_clonal: N must be >= 1");
  if (x0.size() != static_cast<std::size_t>(params.n)) throw DomainError("init_clonal_at: x0 must have length n");
  if (N > std::numeric_limits<std::uint32_t>::max()) throw DomainError("init_clonal: N too large");
  PopulationState s;
  s.N = N;
  s.n = params.n;
  s.phenotypes.resize(N * x0.size());
  for (std::size_t i = 0; i < N; ++i) std::copy(x0.begin(), x0.end(), s.row(i));
  s.stream = stream;
  s.rng = CounterRng(stream);
  return s;
}

double population_mean_fitness(const PopulationState& state, const EnvTrajectory& traj) {
  const double d = delta(traj, static_cast<double>(state.generation));
  double sum = 0.0;
  for (std::size_t i = 0; i < state.N; ++i) {
    const double* x = state.row(i);
    double r2 = (x[0] - d) * (x[0] - d);
    for (int k = 1; k < state.n; ++k) r2 += x[k] * x[k];
    sum -= 0.5 * r2;
  }
  return sum / static_cast<double>(state.N);
}

std::pair<double, double> population_mean_components(const PopulationState& state) {
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < state.N; ++i) {
    const double* x = state.row(i);
    m1 += x[0];
    for (int k = 0; k < state.n; ++k) m2 += x[k] * x[k];
  }
  const double inv = 1.0 / static_cast<double>(state.N);
  return {m1 * inv, -0.5 * m2 * inv};
}

std::vector<std::uint32_t> multinomial_indices(const std::vector<double>& weights, std::size_t draws,
                                               CounterRng& rng) {
  if (weights.empty()) throw DomainError("multinomial_indices: no categories");
  std::vector<double> cumulative(weights.size());
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw DomainError("multinomial_indices: weights must be finite and non-negative");
    }
    s += weights[i];
    cumulative[i] = s;
  }
  if (!(s > 0.0)) throw DomainError("multinomial_indices: weights sum to zero");
  std::vector<double> spacing;
  std::vector<std::uint32_t> out;
  draw_parents(cumulative, draws, rng, spacing, out, nullptr);
  return out;
}

namespace {

void step_with(PopulationState& state, const ModelParams& params, const EnvTrajectory& traj, Workspace& ws) {
  const std::size_t N = state.N;
  const int n = state.n;
  const double d = delta(traj, static_cast<double>(state.generation));

  // Selection weights exp(m_i - max m).
  auto& cum = ws.cumulative;
  cum.resize(N);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < N; ++i) {
    const double* x = state.row(i);
    double r2 = (x[0] - d) * (x[0] - d);
    for (int k = 1; k < n; ++k) r2 += x[k] * x[k];
    cum[i] = -0.5 * r2;
    top = std::max(top, cum[i]);
  }
  double s = 0.0;
  for (auto& c : cum) {
    s += std::exp(c - top);
    c = s;
  }
  draw_parents(cum, N, state.rng, ws.spacing, ws.parents, &ws.aux);

  // Offspring with Poisson(U) mutations of N(0, lambda I) effects.
  ws.next.resize(state.phenotypes.size());
  const double sd = std::sqrt(params.lambda);
  if (!ws.hits || ws.rate != params.U) {
    ws.hits.emplace(params.U);
    ws.rate = params.U;
  }
  const PoissonTable& hits = *ws.hits;
  for (std::size_t i = 0; i < N; ++i) {
    const double* p = state.row(ws.parents[i]);
    double* x = ws.next.data() + i * static_cast<std::size_t>(n);
    std::copy(p, p + n, x);
    if (params.U > 0.0) {
      for (int m = hits(ws.aux[i]); m > 0; --m) {
        for (int k = 0; k < n; ++k) x[k] += sd * state.normal(state.rng);
      }
    }
  }
  state.phenotypes.swap(ws.next);
  ++state.generation;
}

}  // namespace

void step(PopulationState& state, const ModelParams& params, const EnvTrajectory& traj) {
  check_state(state, params);
  Workspace ws;
  step_with(state, params, traj, ws);
}

double empirical_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DomainError("empirical_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("empirical_quantile: p must lie in [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ReplicateStats run_replicates(const ModelParams& params, const EnvTrajectory& traj, const IbmConfig& config) {
  params.validate(true);
  if (config.replicates == 0) throw DomainError("run_replicates: replicates must be >= 1");
  if (config.N == 0) throw DomainError("run_replicates: N must be >= 1");
  if (config.T < 0) throw DomainError("run_replicates: T must be >= 0");
  if (config.record_every < 1) throw DomainError("run_replicates: record_every must be >= 1");
  if (config.T > 0 && traj.horizon() < static_cast<double>(config.T)) {
    throw DomainError("run_replicates: trajectory horizon shorter than T");
  }

  std::vector<std::int64_t> record;
  for (std::int64_t t = 0; t <= config.T; t += config.record_every) record.push_back(t);
  if (record.back() != config.T) record.push_back(config.T);
  const std::size_t R = config.replicates;
  const std::size_t K = record.size();

  std::vector<std::vector<double>> series(R, std::vector<double>(K));
  std::vector<std::vector<double>> comp1, comp2;
  if (config.components) {
    comp1.assign(R, std::vector<double>(K));
    comp2.assign(R, std::vector<double>(K));
  }

  for_each_index(R, config.policy, [&](std::size_t r) {
    const RngStream stream = config.base_stream.with_stream(config.base_stream.stream_id + r);
    PopulationState state = config.x0.empty() ? init_clonal(params, config.N, stream)
                                              : init_clonal_at(params, config.N, config.x0, stream);
    Workspace ws;
    std::size_t next = 0;
    for (std::int64_t t = 0;; ++t) {
      if (t == record[next]) {
        series[r][next] = population_mean_fitness(state, traj);
        if (config.components) {
          const auto [m1, m2] = population_mean_components(state);
          comp1[r][next] = m1;
          comp2[r][next] = m2;
        }
        if (++next == K) break;
      }
      step_with(state, params, traj, ws);
    }
  });

  ReplicateStats out;
  out.times.assign(record.begin(), record.end());
  out.mean_mbar.resize(K);
  out.q025.resize(K);
  out.q975.resize(K);
  out.se_mbar.resize(K);
  std::vector<double> column(R);
  for (std::size_t k = 0; k < K; ++k) {
    double sum = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      column[r] = series[r][k];
      sum += column[r];
    }
    const double mean = sum / static_cast<double>(R);
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    out.mean_mbar[k] = mean;
    out.se_mbar[k] = R > 1 ? std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R)) : 0.0;
    std::sort(column.begin(), column.end());
    out.q025[k] = empirical_quantile(column, 0.025);
    out.q975[k] = empirical_quantile(column, 0.975);
  }
  if (config.components) {
    out.mean_m1.assign(K, 0.0);
    out.mean_m2.assign(K, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t k = 0; k < K; ++k) {
        out.mean_m1[k] += comp1[r][k] / static_cast<double>(R);
        out.mean_m2[k] += comp2[r][k] / static_cast<double>(R);
      }
    }
  }
  if (config.keep_series) out.series = std::move(series);
  return out;
}

void write_replicate_csv(std::ostream& out, const ReplicateStats& stats) {
  const bool comps = !stats.mean_m1.empty();
  out << "t,mean_mbar,q025,q975" << (comps ? ",mbar1,mbar2" : "") << '\n';
  char buf[160];
  for (std::size_t k = 0; k < stats.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", stats.times[k], stats.mean_mbar[k], stats.q025[k],
                  stats.q975[k]);
    out << buf;
    if (comps) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", stats.mean_m1[k], stats.mean_m2[k]);
      out << buf;
    }
    out << '\n';
  }
}

void write_replicate_matrix(std::ostream& out, const ReplicateStats& stats) {
  if (stats.series.empty()) throw DomainError("write_replicate_matrix: per-replicate series were not kept");
  out << "t";
  for (std::size_t r = 0; r < stats.series.size(); ++r) out << ",r" << r;
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < stats.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", stats.times[k]);
    out << buf;
    for (const auto& s : stats.series) {
      std::snprintf(buf, sizeof buf, ",%.17g", s[k]);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace evoclim
