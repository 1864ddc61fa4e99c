#pragma once

#include <cmath>
#include <string>

#include "fitnet/errors.hpp"

namespace fitnet::quad {

struct Options {
  double abs_tol = 1e-10;
  int max_depth = 60;
};

namespace detail {

template <typename F>
double simpson_step(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol, int depth,
                    bool& ok) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  if (depth <= 0) {
    ok = false;
    return left + right + diff / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok);
}

}  // namespace detail

/// Adaptive Simpson integral of f over [a, b]. Throws SolverError when the
/// recursion limit is hit before the tolerance is met.
template <typename F>
double simpson(F&& f, double a, double b, const Options& opt = {}) {
  if (a == b) return 0.0;
  if (!(std::isfinite(a) && std::isfinite(b))) throw DomainError("quadrature bounds must be finite");
  const double fa = f(a);
  const double fb = f(b);
  bool ok = true;
  // a few fixed first-level splits so a narrow feature cannot hide between samples
  constexpr int kPanels = 8;
  double sum = 0.0;
  const double h = (b - a) / kPanels;
  for (int i = 0; i < kPanels; ++i) {
    const double lo = a + i * h;
    const double hi = i + 1 == kPanels ? b : lo + h;
    const double flo = i == 0 ? fa : f(lo);
    const double fhi = i + 1 == kPanels ? fb : f(hi);
    const double fmid = f(0.5 * (lo + hi));
    const double panel = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    sum += detail::simpson_step(f, lo, hi, flo, fmid, fhi, panel, opt.abs_tol / kPanels, opt.max_depth, ok);
  }
  if (!ok)
    throw SolverError("adaptive quadrature did not converge on [" + std::to_string(a) + ", " + std::to_string(b) +
                      "] at tolerance " + std::to_string(opt.abs_tol));
  if (!std::isfinite(sum)) throw SolverError("quadrature produced a non-finite value");
  return sum;
}

/// Root of a function with f(lo) and f(hi) of opposite sign, by bisection.
template <typename F>
double bisect(F&& f, double lo, double hi, double x_tol = 1e-14, int max_iter = 400) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw SolverError("bisection: no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      "] (f = " + std::to_string(flo) + ", " + std::to_string(fhi) + ")");
  for (int i = 0; i < max_iter && hi - lo > x_tol * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace fitnet::quad
