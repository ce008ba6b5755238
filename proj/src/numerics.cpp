#include "evoclim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <string>
#include <vector>

#include "evoclim/error.hpp"

namespace evoclim {

void QuadratureSpec::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
    throw DomainError("QuadratureSpec: tolerances must be positive");
  }
  if (max_subdivisions < 1) throw DomainError("QuadratureSpec: max_subdivisions must be >= 1");
}

// sinh(a)/cosh(b) = sign(a) e^{|a|-|b|} (1-e^{-2|a|}) / (1+e^{-2|b|})
double hyp_ratio_sinh_cosh(double a, double b) {
  if (a > b) throw DomainError("hyp_ratio_sinh_cosh: requires a <= b");
  const double aa = std::fabs(a);
  const double ab = std::fabs(b);
  const double num = -std::expm1(-2.0 * aa);
  const double r = std::exp(aa - ab) * num / (1.0 + std::exp(-2.0 * ab));
  return std::signbit(a) ? -r : r;
}

double hyp_ratio_cosh_cosh(double a, double b) {
  if (a > b) throw DomainError("hyp_ratio_cosh_cosh: requires a <= b");
  return cosh_ratio(a, b);
}

double cosh_ratio(double a, double b) {
  const double aa = std::fabs(a);
  const double ab = std::fabs(b);
  if (aa == ab) return 1.0;
  return std::exp(aa - ab) * (1.0 + std::exp(-2.0 * aa)) / (1.0 + std::exp(-2.0 * ab));
}

double sech(double a) {
  const double aa = std::fabs(a);
  return 2.0 * std::exp(-aa) / (1.0 + std::exp(-2.0 * aa));
}

namespace {

struct SimpsonPiece {
  double a, b, fa, fm, fb, whole, err;
  bool operator<(const SimpsonPiece& o) const { return err < o.err; }
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

// QUADPACK qk15 tables.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkPiece {
  double a, b, value, err, abs;
  bool operator<(const GkPiece& o) const { return err < o.err; }
};

GkPiece gk15(const RealFn& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double resg = fc * kWg[3];
  double resk = fc * kWgk[7];
  double resabs = std::fabs(resk);
  std::array<double, 7> f1{}, f2{};
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    f1[j] = f(center - dx);
    f2[j] = f(center + dx);
    const double s = f1[j] + f2[j];
    resk += kWgk[j] * s;
    resabs += kWgk[j] * (std::fabs(f1[j]) + std::fabs(f2[j]));
    if (j % 2 == 1) resg += kWg[j / 2] * s;
  }
  const double reskh = 0.5 * resk;
  double resasc = kWgk[7] * std::fabs(fc - reskh);
  for (int j = 0; j < 7; ++j) {
    resasc += kWgk[j] * (std::fabs(f1[j] - reskh) + std::fabs(f2[j] - reskh));
  }
  const double value = resk * half;
  resabs *= std::fabs(half);
  resasc *= std::fabs(half);
  double err = std::fabs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  return {a, b, value, err, resabs};
}

[[noreturn]] void throw_no_convergence(const char* who, double lo, double hi, double err, double tol) {
  char buf[160];
  std::snprintf(buf, sizeof buf, ": tolerance not met on [%.9g, %.9g] (error %.3g > %.3g)", lo, hi, err, tol);
  throw ConvergenceError(std::string(who) + buf);
}

}  // namespace

double integrate(const RealFn& f, double lo, double hi, const QuadratureSpec& spec) {
  spec.validate();
  if (!(lo <= hi)) throw DomainError("integrate: requires lo <= hi");
  if (lo == hi) return 0.0;

  // Seed with 16 panels so that the first samples cannot all sit on zeros of
  // a periodic integrand. Seed panels carry no error estimate until refined.
  constexpr int kSeed = 16;
  std::priority_queue<SimpsonPiece> heap;
  double total = 0.0;
  double total_err = 0.0;
  int unrefined = kSeed;
  const double width = (hi - lo) / kSeed;
  double fa = f(lo);
  for (int i = 0; i < kSeed; ++i) {
    const double a = lo + i * width;
    const double b = (i + 1 == kSeed) ? hi : lo + (i + 1) * width;
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = simpson(a, b, fa, fm, fb);
    heap.push({a, b, fa, fm, fb, whole, std::numeric_limits<double>::infinity()});
    total += whole;
    fa = fb;
  }

  int subdivisions = 0;
  while (true) {
    const double tol = std::max(spec.abs_tol, spec.rel_tol * std::fabs(total));
    if (unrefined == 0 && total_err <= tol) break;
    if (subdivisions >= spec.max_subdivisions) {
      throw_no_convergence("integrate", lo, hi, unrefined ? std::numeric_limits<double>::infinity() : total_err,
                           tol);
    }
    const SimpsonPiece p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    const double flm = f(0.5 * (p.a + m));
    const double frm = f(0.5 * (m + p.b));
    const double left = simpson(p.a, m, p.fa, flm, p.fm);
    const double right = simpson(m, p.b, p.fm, frm, p.fb);
    const double diff = left + right - p.whole;
    // Each child carries half of the parent's Richardson error estimate.
    const double child_err = std::fabs(diff) / 30.0;
    heap.push({p.a, m, p.fa, flm, p.fm, left + diff / 30.0, child_err});
    heap.push({m, p.b, p.fm, frm, p.fb, right + diff / 30.0, child_err});
    total += diff + diff / 15.0;
    if (std::isinf(p.err)) {
      --unrefined;
    } else {
      total_err -= p.err;
    }
    total_err += 2.0 * child_err;
    ++subdivisions;
  }
  // Deterministic final sum, ordered by position.
  std::vector<SimpsonPiece> pieces;
  pieces.reserve(heap.size());
  while (!heap.empty()) {
    pieces.push_back(heap.top());
    heap.pop();
  }
  std::sort(pieces.begin(), pieces.end(), [](const SimpsonPiece& x, const SimpsonPiece& y) { return x.a < y.a; });
  total = 0.0;
  for (const auto& p : pieces) total += p.whole;
  return total;
}

double integrate_gk(const RealFn& f, double lo, double hi, const QuadratureSpec& spec) {
  spec.validate();
  if (!(lo <= hi)) throw DomainError("integrate_gk: requires lo <= hi");
  if (lo == hi) return 0.0;

  std::vector<GkPiece> heap;
  heap.push_back(gk15(f, lo, hi));
  double total = heap.front().value;
  double total_err = heap.front().err;
  double total_abs = heap.front().abs;
  constexpr double kRoundoff = 100.0 * std::numeric_limits<double>::epsilon();
  int subdivisions = 0;
  while (true) {
    // Heavy cancellation can put the relative target below rounding level.
    const double tol = std::max({spec.abs_tol, spec.rel_tol * std::fabs(total), kRoundoff * total_abs});
    if (total_err <= tol) break;
    std::pop_heap(heap.begin(), heap.end());
    const GkPiece worst = heap.back();
    const double m = 0.5 * (worst.a + worst.b);
    if (subdivisions >= spec.max_subdivisions || m <= worst.a || m >= worst.b) {
      throw_no_convergence("integrate_gk", lo, hi, total_err, tol);
    }
    heap.pop_back();
    const GkPiece left = gk15(f, worst.a, m);
    const GkPiece right = gk15(f, m, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.err + right.err - worst.err;
    total_abs += left.abs + right.abs - worst.abs;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end());
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end());
    ++subdivisions;
    // Running sums drift; resum exactly every so often.
    if (subdivisions % 64 == 0) {
      total = 0.0;
      total_err = 0.0;
      total_abs = 0.0;
      for (const auto& p : heap) {
        total += p.value;
        total_err += p.err;
        total_abs += p.abs;
      }
    }
  }
  // Deterministic final sum, ordered by position.
  std::sort(heap.begin(), heap.end(), [](const GkPiece& x, const GkPiece& y) { return x.a < y.a; });
  double sum = 0.0;
  for (const auto& p : heap) sum += p.value;
  return sum;
}

double default_stencil_step(int order, double x) {
  const double scale = std::max(1.0, std::fabs(x));
  return (order == 3 ? 1e-2 : 1e-4) * scale;
}

double stencil_derivative(const RealFn& g, double x, int order, double h) {
  if (!(h > 0.0)) throw DomainError("stencil_derivative: step must be positive");
  switch (order) {
    case 1: {
      const double coarse = (g(x + h) - g(x - h)) / (2.0 * h);
      const double hh = 0.5 * h;
      const double fine = (g(x + hh) - g(x - hh)) / (2.0 * hh);
      return (4.0 * fine - coarse) / 3.0;
    }
    case 2:
      return (g(x + h) - 2.0 * g(x) + g(x - h)) / (h * h);
    case 3:
      return (g(x + 2.0 * h) - 2.0 * g(x + h) + 2.0 * g(x - h) - g(x - 2.0 * h)) / (2.0 * h * h * h);
    default:
      throw DomainError("stencil_derivative: order must be 1, 2 or 3");
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

}  // namespace

CounterRng::CounterRng(const RngStream& stream) : stream_(stream) {
  key_ = {static_cast<std::uint32_t>(stream.seed), static_cast<std::uint32_t>(stream.seed >> 32)};
}

void CounterRng::refill() {
  // Block b yields outputs 2b and 2b + 1.
  const std::uint64_t chunk = position_ / kBuffered;
  const auto s_lo = static_cast<std::uint32_t>(stream_.stream_id);
  const auto s_hi = static_cast<std::uint32_t>(stream_.stream_id >> 32);
  for (std::size_t i = 0; i < kBlocks; ++i) {
    const std::uint64_t block = chunk * kBlocks + i;
    std::uint32_t c0 = static_cast<std::uint32_t>(block);
    std::uint32_t c1 = static_cast<std::uint32_t>(block >> 32);
    std::uint32_t c2 = s_lo;
    std::uint32_t c3 = s_hi;
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c0;
      const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c2;
      c0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
      c1 = static_cast<std::uint32_t>(p1);
      c2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
      c3 = static_cast<std::uint32_t>(p0);
      k0 += kPhiloxW0;
      k1 += kPhiloxW1;
    }
    buffer_[2 * i] = (static_cast<std::uint64_t>(c0) << 32) | c1;
    buffer_[2 * i + 1] = (static_cast<std::uint64_t>(c2) << 32) | c3;
  }
  buffered_chunk_ = chunk;
}

void CounterRng::seek(std::uint64_t index) { position_ = index; }

}  // namespace evoclim
