#pragma once
// Shared numerical kernels: overflow-safe hyperbolic ratios, adaptive
// quadrature, central finite-difference stencils and the counter-based
// random streams every stochastic component draws from.

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>

namespace evoclim {

struct QuadratureSpec {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_subdivisions = 1 << 15;

  void validate() const;
};

/// sinh(a)/cosh(b) for a <= b, evaluated in exponentially scaled form.
double hyp_ratio_sinh_cosh(double a, double b);
/// cosh(a)/cosh(b) for a <= b, evaluated in exponentially scaled form.
double hyp_ratio_cosh_cosh(double a, double b);

/// cosh(a)/cosh(b) for arbitrary arguments. Finite whenever |a|-|b| < 709.
double cosh_ratio(double a, double b);
/// 1/cosh(a) without overflow.
double sech(double a);

using RealFn = std::function<double(double)>;

/// Globally adaptive Simpson quadrature (worst interval is bisected first).
double integrate(const RealFn& f, double lo, double hi, const QuadratureSpec& spec = {});

/// Globally adaptive 7/15-point Gauss-Kronrod quadrature. Same contract as
/// `integrate`; converges with far fewer evaluations on smooth integrands,
/// which is what the nested integrals of the analytic engine need.
double integrate_gk(const RealFn& f, double lo, double hi, const QuadratureSpec& spec = {});

/// Default stencil step: 1e-4*max(1,|x|) for orders 1-2, 1e-2*max(1,|x|) for order 3.
double default_stencil_step(int order, double x);

/// Central finite difference of order 1 (with one Richardson step), 2 or 3.
double stencil_derivative(const RealFn& g, double x, int order, double h);
inline double stencil_derivative(const RealFn& g, double x, int order) {
  return stencil_derivative(g, x, order, default_stencil_step(order, x));
}

// ---------------------------------------------------------------------------
// Random streams

/// Immutable descriptor of a random stream. Equal descriptors reproduce the
/// same draws; distinct stream ids give independent streams.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  RngStream with_stream(std::uint64_t id) const { return {seed, id}; }
  friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// Philox4x32-10 counter-based generator keyed by an RngStream. Satisfies
/// UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(const RngStream& stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (position_ / kBuffered != buffered_chunk_) refill();
    const result_type v = buffer_[position_ % kBuffered];
    ++position_;
    return v;
  }

  /// Uniform double in (0, 1), never exactly 0 or 1: 53 random bits shifted
  /// by half an ulp.
  double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Two uniforms in (0, 1) with 32-bit resolution from a single draw.
  std::pair<double, double> uniform_pair() {
    const result_type x = (*this)();
    return {(static_cast<double>(x >> 32) + 0.5) * 0x1.0p-32,
            (static_cast<double>(x & 0xFFFFFFFFu) + 0.5) * 0x1.0p-32};
  }

  /// Skip ahead so the next draw is the `index`-th of the stream.
  void seek(std::uint64_t index);
  std::uint64_t position() const { return position_; }
  const RngStream& stream() const { return stream_; }

 private:
  void refill();

  RngStream stream_;
  std::array<std::uint32_t, 2> key_{};
  std::uint64_t position_ = 0;  // index of the next 64-bit output
  static constexpr std::size_t kBlocks = 16;
  static constexpr std::size_t kBuffered = 2 * kBlocks;
  std::array<std::uint64_t, kBuffered> buffer_{};
  std::uint64_t buffered_chunk_ = std::numeric_limits<std::uint64_t>::max();
};

}  // namespace evoclim
