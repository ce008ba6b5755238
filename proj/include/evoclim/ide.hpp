#pragma once
// Deterministic grid solvers: the mutation-selection integro-differential
// equation in one trait dimension (FFT convolution, explicit Euler) and its
// diffusion approximation for n >= 2 in reduced coordinates (x1, r), with
// r the distance from the optimum axis (Crank-Nicolson ADI with Strang
// splitting of the growth term).

#include <string>
#include <vector>

#include "evoclim/analytic.hpp"
#include "evoclim/environment.hpp"
#include "evoclim/parallel.hpp"

namespace evoclim {

/// Initial density: Gaussian N(mean u, var I), or "near-dirac" which is the
/// same Gaussian with var = lambda.
struct IdeInit {
  enum class Kind { gaussian, near_dirac } kind = Kind::near_dirac;
  double mean = 0.0;
  double var = 0.0;  // ignored for near_dirac

  static IdeInit gaussian(double mean, double var) { return {Kind::gaussian, mean, var}; }
  static IdeInit near_dirac(double mean = 0.0) { return {Kind::near_dirac, mean, 0.0}; }
  double variance(const ModelParams& params) const { return kind == Kind::near_dirac ? params.lambda : var; }
};

/// Uniform 1D grid x_j = center - L + j dx, j = 0..M-1, dx = 2L/(M-1).
struct Grid1D {
  double center = 0.0;
  double L = 2.0;
  std::size_t M = 4096;  // power of two

  double dx() const { return 2.0 * L / static_cast<double>(M - 1); }
  double node(std::size_t j) const { return center - L + static_cast<double>(j) * dx(); }
  void validate() const;
};

/// Cell-centred grid on [x_lo, x_hi] x [0, Lr].
struct GridReduced {
  double x_lo = -1.0;
  double x_hi = 1.0;
  double Lr = 1.0;
  std::size_t M1 = 512;
  std::size_t Mr = 256;

  double dx() const { return (x_hi - x_lo) / static_cast<double>(M1); }
  double dr() const { return Lr / static_cast<double>(Mr); }
  double x(std::size_t i) const { return x_lo + (static_cast<double>(i) + 0.5) * dx(); }
  double r(std::size_t j) const { return (static_cast<double>(j) + 0.5) * dr(); }
  void validate() const;
};

/// Domains sized from the trajectory: the trait axis spans the optimum's
/// range padded by 8 sqrt(mu) (and the initial spread); r spans 8 sqrt(mu).
Grid1D default_grid_1d(const ModelParams& params, const EnvTrajectory& traj, double T, const IdeInit& init,
                       std::size_t M = 4096);
GridReduced default_grid_reduced(const ModelParams& params, const EnvTrajectory& traj, double T,
                                 const IdeInit& init, std::size_t M1 = 512, std::size_t Mr = 256);

struct DensitySnapshot {
  double t = 0.0;
  std::vector<double> values;  // 1D: M nodes; reduced: M1 x Mr row-major in x1
};

struct IdeOptions {
  double record_every = 1.0;          // generations between moment records
  std::vector<double> snapshot_times;  // densities stored at the first step reaching each
  Policy policy = Policy::parallel;
};

struct IdeResult {
  MomentTrajectory moments;
  std::vector<DensitySnapshot> snapshots;
  double max_mass_correction = 0.0;  // largest per-step relative renormalization
  double max_clamped_mass = 0.0;     // largest per-step mass removed by the positivity clamp
  double max_edge_density = 0.0;     // largest boundary density relative to the peak
};

/// One-dimensional IDE dq/dt = U (J*q - q) + q (m - mbar), J = N(0, lambda).
/// Requires params.n == 1.
IdeResult solve_ide_1d(const ModelParams& params, const EnvTrajectory& traj, const IdeInit& init, double T,
                       const Grid1D& grid, double dt, const IdeOptions& options = {});

/// Diffusion PDE dq/dt = (mu^2/2) Lap q + q (m - mbar) for n >= 2 in reduced
/// coordinates. The stored density is the pointwise density in R^n.
IdeResult solve_pde_reduced(const ModelParams& params, const EnvTrajectory& traj, const IdeInit& init, double T,
                            const GridReduced& grid, double dt, const IdeOptions& options = {});

/// Surface measure of the unit sphere in R^(n-1): the angular factor of the
/// reduced volume element omega r^(n-2) dr dx1.
double angular_weight(int n);

}  // namespace evoclim
