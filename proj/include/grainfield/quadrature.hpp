#ifndef GRAINFIELD_QUADRATURE_HPP_
#define GRAINFIELD_QUADRATURE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "grainfield/errors.hpp"

namespace grainfield {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

// Global adaptive refinement stops at 2^20 panels.
inline constexpr std::size_t kMaxQuadPanels = std::size_t{1} << 20;

namespace detail {

struct Panel {
  double a, b, value, error, l1;
  bool operator<(const Panel& o) const { return error < o.error; }
};

// One 15/31-point Gauss-Kronrod panel on [a, b] (node and weight tables
// from Boost.Math). The error is |K - G| scaled to the panel width.
template <class F>
Panel gk31(F& f, double a, double b) {
  using Kronrod = boost::math::quadrature::gauss_kronrod<double, 31>;
  using Gauss = boost::math::quadrature::gauss<double, 15>;
  const auto& x = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss::weights();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  // 15 Gauss nodes: 0 and the even-indexed Kronrod abscissas.
  double f0 = f(mid);
  double k = f0 * wk[0], g = f0 * wg[0], l1 = std::abs(f0) * wk[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fp = f(mid + half * x[i]);
    const double fm = f(mid - half * x[i]);
    k += (fp + fm) * wk[i];
    l1 += (std::abs(fp) + std::abs(fm)) * wk[i];
    if (i % 2 == 0) g += (fp + fm) * wg[i / 2];
  }
  const double err = std::max(std::abs(k - g), 2 * std::numeric_limits<double>::epsilon() * std::abs(k));
  return {a, b, k * half, err * half, l1 * half};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod on a finite interval [a, b]. Refines the
// panel with the largest error until the total error is below
// rel_tol * L1 + abs_tol (plus a roundoff floor); throws NumericalError if
// the panel cap is reached first.
template <class F>
QuadResult integrate(F&& f, double a, double b, double rel_tol = 1e-6,
                     double abs_tol = 0.0, const char* what = "quadrature") {
  if (!(b > a)) return {};
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw NumericalError(std::string(what) + ": infinite limits need a substitution");
  }
  std::priority_queue<detail::Panel> heap;
  std::vector<detail::Panel> done;
  double value = 0.0, err = 0.0, l1 = 0.0;
  const auto first = detail::gk31(f, a, b);
  heap.push(first);
  value = first.value, err = first.error, l1 = first.l1;
  auto target = [&] {
    return rel_tol * l1 + abs_tol + 1e3 * std::numeric_limits<double>::epsilon() * l1;
  };
  std::size_t panels = 1;
  while (!heap.empty() && err > target() && panels < kMaxQuadPanels) {
    const auto p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    if (!(m > p.a && m < p.b)) {
      done.push_back(p);  // cannot be split further in double precision
      continue;
    }
    const auto left = detail::gk31(f, p.a, m);
    const auto right = detail::gk31(f, m, p.b);
    value += left.value + right.value - p.value;
    err += left.error + right.error - p.error;
    l1 += left.l1 + right.l1 - p.l1;
    heap.push(left);
    heap.push(right);
    ++panels;
  }
  // Re-sum to shed the drift of the running updates.
  value = err = l1 = 0.0;
  for (const auto& p : done) value += p.value, err += p.error, l1 += p.l1;
  while (!heap.empty()) {
    const auto& p = heap.top();
    value += p.value, err += p.error, l1 += p.l1;
    heap.pop();
  }
  if (!std::isfinite(value) || err > target()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, ": no convergence (estimate %.6e, error %.3e, L1 %.3e)",
                  value, err, l1);
    throw NumericalError(std::string(what) + buf);
  }
  return {value, err};
}

// Same as integrate() but splits [a, b] at the given interior points, so
// kinks and jumps of the integrand sit on panel boundaries.
template <class F>
QuadResult integrate_pieces(F&& f, double a, double b,
                            std::vector<double> breaks, double rel_tol = 1e-6,
                            double abs_tol = 0.0,
                            const char* what = "quadrature") {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  QuadResult total;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]);
    const double hi = std::min(b, breaks[i + 1]);
    if (!(hi > lo)) continue;
    const QuadResult part = integrate(f, lo, hi, rel_tol, abs_tol, what);
    total.value += part.value;
    total.error += part.error;
  }
  return total;
}

}  // namespace grainfield

#endif  // GRAINFIELD_QUADRATURE_HPP_
