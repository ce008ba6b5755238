#include "evoclim/ide.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

#include "evoclim/error.hpp"

namespace evoclim {

namespace {

constexpr double kCflLimit = 0.2;
constexpr double kEdgeWarn = 1e-9;

bool is_power_of_two(std::size_t m) { return m >= 2 && (m & (m - 1)) == 0; }

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Owns a real-to-complex / complex-to-real plan pair of length P.
class FftPair {
 public:
  explicit FftPair(std::size_t P) : P_(P) {
    real_ = fftw_alloc_real(P);
    spec_ = fftw_alloc_complex(P / 2 + 1);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(P), real_, spec_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(P), spec_, real_, FFTW_ESTIMATE);
  }
  ~FftPair() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(fwd_);
      fftw_destroy_plan(inv_);
    }
    fftw_free(real_);
    fftw_free(spec_);
  }
  FftPair(const FftPair&) = delete;
  FftPair& operator=(const FftPair&) = delete;

  double* real() { return real_; }
  std::complex<double>* spectrum() { return reinterpret_cast<std::complex<double>*>(spec_); }
  std::size_t bins() const { return P_ / 2 + 1; }
  void forward() { fftw_execute(fwd_); }
  void inverse() { fftw_execute(inv_); }

 private:
  std::size_t P_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

struct Moments {
  double mbar = 0.0;
  double vm = 0.0;
  double m3 = 0.0;
};

void record(MomentTrajectory& out, double t, const Moments& mo) {
  out.times.push_back(t);
  out.mbar.push_back(mo.mbar);
  out.vm.push_back(mo.vm);
  out.skew.push_back(mo.vm > 0.0 ? mo.m3 / std::pow(mo.vm, 1.5) : std::numeric_limits<double>::quiet_NaN());
}

// Step count and the times (in steps) at which moments are recorded.
struct Schedule {
  std::size_t steps = 0;
  double dt = 0.0;
  std::vector<std::size_t> record_steps;
};

Schedule make_schedule(double T, double dt, double record_every) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw DomainError("ide: T must be finite and >= 0");
  if (!(dt > 0.0)) throw DomainError("ide: dt must be > 0");
  if (!(record_every > 0.0)) throw DomainError("ide: record_every must be > 0");
  Schedule s;
  s.steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
  s.dt = s.steps ? T / static_cast<double>(s.steps) : dt;
  double next = 0.0;
  for (std::size_t k = 0; k <= s.steps; ++k) {
    const double t = static_cast<double>(k) * s.dt;
    if (t >= next - 1e-9 * std::max(1.0, next) || k == s.steps) {
      s.record_steps.push_back(k);
      while (next <= t + 1e-9 * std::max(1.0, t)) next += record_every;
    }
  }
  return s;
}

std::pair<double, double> trait_range(const EnvTrajectory& traj, double T, const IdeInit& init) {
  auto [lo, hi] = T > 0.0 ? delta_range(traj, T) : std::pair<double, double>{0.0, 0.0};
  lo = std::min({lo, init.mean, 0.0});
  hi = std::max({hi, init.mean, 0.0});
  return {lo, hi};
}

}  // namespace

double angular_weight(int n) {
  if (n < 2) throw DomainError("angular_weight: n must be >= 2");
  // |S^(n-2)| = 2 pi^((n-1)/2) / Gamma((n-1)/2)
  const double k = 0.5 * (n - 1);
  return 2.0 * std::pow(M_PI, k) / std::tgamma(k);
}

void Grid1D::validate() const {
  if (!is_power_of_two(M)) throw DomainError("Grid1D: M must be a power of two");
  if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("Grid1D: L must be > 0");
  if (!std::isfinite(center)) throw DomainError("Grid1D: center must be finite");
}

void GridReduced::validate() const {
  if (M1 < 4 || Mr < 4) throw DomainError("GridReduced: need at least 4 cells per direction");
  if (!(x_hi > x_lo)) throw DomainError("GridReduced: x_hi must exceed x_lo");
  if (!(Lr > 0.0)) throw DomainError("GridReduced: Lr must be > 0");
}

Grid1D default_grid_1d(const ModelParams& params, const EnvTrajectory& traj, double T, const IdeInit& init,
                       std::size_t M) {
  const auto [lo, hi] = trait_range(traj, T, init);
  const double pad = std::max(8.0 * std::sqrt(params.mu()), 8.0 * std::sqrt(init.variance(params)));
  return Grid1D{0.5 * (lo + hi), 0.5 * (hi - lo) + pad, M};
}

GridReduced default_grid_reduced(const ModelParams& params, const EnvTrajectory& traj, double T,
                                 const IdeInit& init, std::size_t M1, std::size_t Mr) {
  const auto [lo, hi] = trait_range(traj, T, init);
  const double pad = std::max(8.0 * std::sqrt(params.mu()), 8.0 * std::sqrt(init.variance(params)));
  return GridReduced{lo - pad, hi + pad, pad, M1, Mr};
}

// ---------------------------------------------------------------------------
// One-dimensional IDE

IdeResult solve_ide_1d(const ModelParams& params, const EnvTrajectory& traj, const IdeInit& init, double T,
                       const Grid1D& grid, double dt, const IdeOptions& options) {
  params.validate(true);
  grid.validate();
  if (params.n != 1) throw DomainError("solve_ide_1d: requires n = 1 (use solve_pde_reduced for n >= 2)");
  const double v0 = init.variance(params);
  if (!(v0 > 0.0)) throw DomainError("solve_ide_1d: initial variance must be > 0");
  if (T > traj.horizon()) throw DomainError("solve_ide_1d: trajectory horizon shorter than T");
  const Schedule sched = make_schedule(T, dt, options.record_every);
  dt = sched.dt;

  const std::size_t M = grid.M;
  const std::size_t P = 2 * M;
  const double dx = grid.dx();
  std::vector<double> x(M), w(M, dx);
  for (std::size_t j = 0; j < M; ++j) x[j] = grid.node(j);
  w.front() = w.back() = 0.5 * dx;

  // Mutation kernel on the padded circle, normalized to unit discrete mass.
  FftPair fft(P);
  std::vector<std::complex<double>> kernel_hat(fft.bins());
  {
    double* k = fft.real();
    std::fill(k, k + P, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const double off = static_cast<double>(i) * dx;
      const double val = std::exp(-off * off / (2.0 * params.lambda));
      k[i] = val;
      sum += val;
      if (i > 0) {
        k[P - i] = val;
        sum += val;
      }
    }
    for (std::size_t i = 0; i < P; ++i) k[i] /= sum * static_cast<double>(P);
    fft.forward();
    std::copy(fft.spectrum(), fft.spectrum() + fft.bins(), kernel_hat.begin());
  }

  std::vector<double> q(M), m(M), jq(M);
  for (std::size_t j = 0; j < M; ++j) {
    const double u = x[j] - init.mean;
    q[j] = std::exp(-u * u / (2.0 * v0));
  }
  auto mass_of = [&] {
    double s = 0.0;
    for (std::size_t j = 0; j < M; ++j) s += w[j] * q[j];
    return s;
  };
  {
    const double mass = mass_of();
    for (auto& v : q) v /= mass;
  }
  auto fitness_at = [&](double t) {
    const double d = delta(traj, t);
    for (std::size_t j = 0; j < M; ++j) m[j] = -0.5 * (x[j] - d) * (x[j] - d);
  };
  auto moments = [&] {
    Moments mo;
    for (std::size_t j = 0; j < M; ++j) mo.mbar += w[j] * q[j] * m[j];
    for (std::size_t j = 0; j < M; ++j) {
      const double e = m[j] - mo.mbar;
      mo.vm += w[j] * q[j] * e * e;
      mo.m3 += w[j] * q[j] * e * e * e;
    }
    return mo;
  };

  IdeResult res;
  res.moments.source = Source::ide;
  std::size_t next_record = 0;
  std::size_t next_snapshot = 0;
  std::vector<double> snaps = options.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  double qmax_edge = 0.0;

  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    fitness_at(t);
    const Moments mo = moments();
    if (next_record < sched.record_steps.size() && sched.record_steps[next_record] == k) {
      record(res.moments, t, mo);
      ++next_record;
    }
    while (next_snapshot < snaps.size() && snaps[next_snapshot] <= t + 0.5 * dt) {
      res.snapshots.push_back({t, q});
      ++next_snapshot;
    }
    const double peak = *std::max_element(q.begin(), q.end());
    qmax_edge = std::max(qmax_edge, std::max(q.front(), q.back()) / peak);
    if (k == sched.steps) break;

    double spread = 0.0;
    for (std::size_t j = 0; j < M; ++j) spread = std::max(spread, std::fabs(m[j] - mo.mbar));
    if (dt * spread > kCflLimit) {
      throw NumericalError("solve_ide_1d: dt * max|m - mbar| = " + std::to_string(dt * spread) +
                           " exceeds 0.2 at t = " + std::to_string(t) + "; reduce dt or the domain");
    }

    // J * q by zero-padded FFT convolution.
    double* buf = fft.real();
    std::copy(q.begin(), q.end(), buf);
    std::fill(buf + M, buf + P, 0.0);
    fft.forward();
    auto* spec = fft.spectrum();
    for (std::size_t b = 0; b < fft.bins(); ++b) spec[b] *= kernel_hat[b];
    fft.inverse();
    std::copy(buf, buf + M, jq.begin());

    double clamped = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      q[j] += dt * (params.U * (jq[j] - q[j]) + q[j] * (m[j] - mo.mbar));
      if (q[j] < 0.0) {
        clamped -= w[j] * q[j];
        q[j] = 0.0;
      }
    }
    const double mass = mass_of();
    res.max_clamped_mass = std::max(res.max_clamped_mass, clamped);
    res.max_mass_correction = std::max(res.max_mass_correction, std::fabs(mass - 1.0));
    if (!(mass > 0.0) || !std::isfinite(mass)) throw NumericalError("solve_ide_1d: mass lost");
    for (auto& v : q) v /= mass;
  }
  res.max_edge_density = qmax_edge;
  if (qmax_edge > kEdgeWarn) {
    res.moments.warnings.push_back("boundary density reached " + std::to_string(qmax_edge) +
                                   " of the peak; enlarge the domain");
  }
  return res;
}

// ---------------------------------------------------------------------------
// Reduced-coordinate diffusion PDE

namespace {

// Crank-Nicolson factor for (I - a A) with a tridiagonal A given by
// sub/diag/super rows; stores the forward-elimination coefficients.
struct Tridiagonal {
  std::vector<double> lower, diag, upper;  // operator A
  std::vector<double> cprime, inv_den;     // factorization of I - a A
  double a = 0.0;

  void factor(double alpha) {
    a = alpha;
    const std::size_t n = diag.size();
    cprime.resize(n);
    inv_den.resize(n);
    double c_prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double b = 1.0 - a * diag[i];
      const double l = i ? -a * lower[i] : 0.0;
      const double den = b - l * c_prev;
      inv_den[i] = 1.0 / den;
      c_prev = (i + 1 < n) ? -a * upper[i] * inv_den[i] : 0.0;
      cprime[i] = c_prev;
    }
  }
};

}  // namespace

IdeResult solve_pde_reduced(const ModelParams& params, const EnvTrajectory& traj, const IdeInit& init, double T,
                            const GridReduced& grid, double dt, const IdeOptions& options) {
  params.validate(true);
  grid.validate();
  if (params.n < 2) throw DomainError("solve_pde_reduced: requires n >= 2 (use solve_ide_1d for n = 1)");
  const double v0 = init.variance(params);
  if (!(v0 > 0.0)) throw DomainError("solve_pde_reduced: initial variance must be > 0");
  if (T > traj.horizon()) throw DomainError("solve_pde_reduced: trajectory horizon shorter than T");
  const Schedule sched = make_schedule(T, dt, options.record_every);
  dt = sched.dt;

  const std::size_t M1 = grid.M1, Mr = grid.Mr;
  const double dx = grid.dx(), dr = grid.dr();
  const int n = params.n;
  const double mu = params.mu();
  const double D = 0.5 * mu * mu;
  const double omega = angular_weight(n);

  std::vector<double> xs(M1), rs(Mr), vol_r(Mr), face(Mr + 1);
  for (std::size_t i = 0; i < M1; ++i) xs[i] = grid.x(i);
  for (std::size_t j = 0; j < Mr; ++j) rs[j] = grid.r(j);
  for (std::size_t j = 0; j <= Mr; ++j) face[j] = std::pow(static_cast<double>(j) * dr, n - 2);
  for (std::size_t j = 0; j < Mr; ++j) {
    const double a = static_cast<double>(j) * dr, b = a + dr;
    vol_r[j] = (std::pow(b, n - 1) - std::pow(a, n - 1)) / (n - 1);
  }
  const double cell_x = omega * dx;  // weight of cell (i, j) is cell_x * vol_r[j]

  // Trait-axis operator: zero Dirichlet at both outer faces.
  Tridiagonal ax;
  ax.lower.assign(M1, D / (dx * dx));
  ax.upper.assign(M1, D / (dx * dx));
  ax.diag.assign(M1, -2.0 * D / (dx * dx));
  ax.diag.front() = ax.diag.back() = -3.0 * D / (dx * dx);
  // Radial operator in flux form: no flux through r = 0, zero Dirichlet at Lr.
  Tridiagonal ar;
  ar.lower.assign(Mr, 0.0);
  ar.upper.assign(Mr, 0.0);
  ar.diag.assign(Mr, 0.0);
  for (std::size_t j = 0; j < Mr; ++j) {
    const double scale = D / (vol_r[j] * dr);
    const double f_in = j ? face[j] : 0.0;
    const double f_out = (j + 1 < Mr) ? face[j + 1] : 2.0 * face[Mr];
    ar.lower[j] = scale * f_in;
    ar.upper[j] = (j + 1 < Mr) ? scale * f_out : 0.0;
    ar.diag[j] = -scale * (f_in + f_out);
  }
  const double half = 0.5 * dt;  // each diffusion half-step is CN with step dt/2
  ax.factor(0.5 * half);
  ar.factor(0.5 * half);

  std::vector<double> q(M1 * Mr), scratch(M1 * Mr);
  for (std::size_t i = 0; i < M1; ++i) {
    for (std::size_t j = 0; j < Mr; ++j) {
      const double u = xs[i] - init.mean;
      q[i * Mr + j] = std::exp(-(u * u + rs[j] * rs[j]) / (2.0 * v0));
    }
  }
  auto mass_of = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < M1; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < Mr; ++j) row += vol_r[j] * q[i * Mr + j];
      s += row;
    }
    return s * cell_x;
  };
  auto rescale = [&](double f) {
    for (auto& v : q) v *= f;
  };
  rescale(1.0 / mass_of());

  std::vector<double> mx(M1), mr(Mr), gx(M1), gr(Mr);
  for (std::size_t j = 0; j < Mr; ++j) mr[j] = -0.5 * rs[j] * rs[j];
  for (std::size_t j = 0; j < Mr; ++j) gr[j] = std::exp(dt * mr[j]);
  auto fitness_at = [&](double t) {
    const double d = delta(traj, t);
    for (std::size_t i = 0; i < M1; ++i) mx[i] = -0.5 * (xs[i] - d) * (xs[i] - d);
  };
  auto moments = [&] {
    Moments mo;
    for (std::size_t i = 0; i < M1; ++i) {
      for (std::size_t j = 0; j < Mr; ++j) mo.mbar += vol_r[j] * q[i * Mr + j] * (mx[i] + mr[j]);
    }
    mo.mbar *= cell_x;
    for (std::size_t i = 0; i < M1; ++i) {
      for (std::size_t j = 0; j < Mr; ++j) {
        const double e = mx[i] + mr[j] - mo.mbar;
        const double wq = vol_r[j] * q[i * Mr + j];
        mo.vm += wq * e * e;
        mo.m3 += wq * e * e * e;
      }
    }
    mo.vm *= cell_x;
    mo.m3 *= cell_x;
    return mo;
  };

  // CN half-step along r: every trait row is an independent contiguous line.
  auto sweep_r = [&] {
    for_each_index(M1, options.policy, [&](std::size_t i) {
      double* line = q.data() + i * Mr;
      double* rhs = scratch.data() + i * Mr;
      const double a = ar.a;
      for (std::size_t j = 0; j < Mr; ++j) {
        double v = line[j] + a * ar.diag[j] * line[j];
        if (j) v += a * ar.lower[j] * line[j - 1];
        if (j + 1 < Mr) v += a * ar.upper[j] * line[j + 1];
        rhs[j] = v;
      }
      // forward elimination then back substitution
      double prev = 0.0;
      for (std::size_t j = 0; j < Mr; ++j) {
        const double l = j ? -a * ar.lower[j] : 0.0;
        prev = (rhs[j] - l * prev) * ar.inv_den[j];
        rhs[j] = prev;
      }
      line[Mr - 1] = rhs[Mr - 1];
      for (std::size_t j = Mr - 1; j-- > 0;) line[j] = rhs[j] - ar.cprime[j] * line[j + 1];
    });
  };
  // CN half-step along x1: lines are strided, so blocks of columns are swept
  // together with the column index innermost.
  constexpr std::size_t kBlock = 64;
  const std::size_t blocks = (Mr + kBlock - 1) / kBlock;
  auto sweep_x = [&] {
    for_each_index(blocks, options.policy, [&](std::size_t b) {
      const std::size_t j0 = b * kBlock, j1 = std::min(Mr, j0 + kBlock);
      const double a = ax.a;
      for (std::size_t i = 0; i < M1; ++i) {
        const double* up = i ? &q[(i - 1) * Mr] : nullptr;
        const double* dn = (i + 1 < M1) ? &q[(i + 1) * Mr] : nullptr;
        const double* cur = &q[i * Mr];
        double* rhs = &scratch[i * Mr];
        const double l = i ? -a * ax.lower[i] : 0.0;
        for (std::size_t j = j0; j < j1; ++j) {
          double v = cur[j] + a * ax.diag[i] * cur[j];
          if (up) v += a * ax.lower[i] * up[j];
          if (dn) v += a * ax.upper[i] * dn[j];
          const double prev = i ? rhs[j - Mr] : 0.0;
          rhs[j] = (v - l * prev) * ax.inv_den[i];
        }
      }
      for (std::size_t j = j0; j < j1; ++j) q[(M1 - 1) * Mr + j] = scratch[(M1 - 1) * Mr + j];
      for (std::size_t i = M1 - 1; i-- > 0;) {
        for (std::size_t j = j0; j < j1; ++j) {
          q[i * Mr + j] = scratch[i * Mr + j] - ax.cprime[i] * q[(i + 1) * Mr + j];
        }
      }
    });
  };
  // Clamps negative undershoot; returns {removed mass, remaining mass}.
  auto clamp_and_mass = [&] {
    double removed = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < M1; ++i) {
      double* row = &q[i * Mr];
      for (std::size_t j = 0; j < Mr; ++j) {
        if (row[j] < 0.0) {
          removed -= vol_r[j] * row[j];
          row[j] = 0.0;
        }
        mass += vol_r[j] * row[j];
      }
    }
    return std::pair<double, double>{removed * cell_x, mass * cell_x};
  };

  IdeResult res;
  res.moments.source = Source::ide;
  std::size_t next_record = 0;
  std::size_t next_snapshot = 0;
  std::vector<double> snaps = options.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  double edge = 0.0;

  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (next_record < sched.record_steps.size() && sched.record_steps[next_record] == k) {
      fitness_at(t);
      record(res.moments, t, moments());
      ++next_record;
      double peak = 0.0, rim = 0.0;
      for (std::size_t i = 0; i < M1; ++i) {
        for (std::size_t j = 0; j < Mr; ++j) peak = std::max(peak, q[i * Mr + j]);
        rim = std::max(rim, q[i * Mr + Mr - 1]);
      }
      for (std::size_t j = 0; j < Mr; ++j) rim = std::max({rim, q[j], q[(M1 - 1) * Mr + j]});
      edge = std::max(edge, rim / peak);
    }
    while (next_snapshot < snaps.size() && snaps[next_snapshot] <= t + 0.5 * dt) {
      res.snapshots.push_back({t, q});
      ++next_snapshot;
    }
    if (k == sched.steps) break;

    sweep_x();
    sweep_r();

    // Exact growth over dt with m frozen at the midpoint. The shift is the
    // second-order cumulant expansion of log int q exp(dt m), so the
    // renormalization left afterwards is O(dt^3).
    fitness_at(t + half);
    double clamped = 0.0, s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < M1; ++i) {
      double* row = &q[i * Mr];
      double r0 = 0.0, r1 = 0.0, r2 = 0.0;
      for (std::size_t j = 0; j < Mr; ++j) {
        if (row[j] < 0.0) {
          clamped -= vol_r[j] * row[j];
          row[j] = 0.0;
        }
        const double wq = vol_r[j] * row[j];
        const double mm = mx[i] + mr[j];
        r0 += wq;
        r1 += wq * mm;
        r2 += wq * mm * mm;
      }
      s0 += r0;
      s1 += r1;
      s2 += r2;
    }
    clamped *= cell_x;
    const double mbar = s1 / s0;
    const double shift = mbar + 0.5 * dt * (s2 / s0 - mbar * mbar);
    double grown = 0.0;
    for (std::size_t i = 0; i < M1; ++i) {
      gx[i] = std::exp(dt * (mx[i] - shift));
      double* row = &q[i * Mr];
      double acc = 0.0;
      for (std::size_t j = 0; j < Mr; ++j) {
        row[j] *= gx[i] * gr[j];
        acc += vol_r[j] * row[j];
      }
      grown += acc;
    }
    res.max_mass_correction = std::max(res.max_mass_correction, std::fabs(grown / s0 - 1.0));

    sweep_x();
    sweep_r();
    const auto [removed, mass] = clamp_and_mass();
    res.max_clamped_mass = std::max(res.max_clamped_mass, clamped + removed);
    if (!(mass > 0.0) || !std::isfinite(mass)) throw NumericalError("solve_pde_reduced: mass lost");
    rescale(1.0 / mass);
  }
  res.max_edge_density = edge;
  if (edge > kEdgeWarn) {
    res.moments.warnings.push_back("boundary density reached " + std::to_string(edge) +
                                   " of the peak; enlarge the domain");
  }
  return res;
}

}  // namespace evoclim
