#pragma once

// Closed-form equilibria, eigenvalues and bifurcation thresholds for the
// two-type market, plus numeric searches where no closed form exists.

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ared/clearing.hpp"
#include "ared/jacobian.hpp"
#include "ared/linear_algebra.hpp"

namespace ared {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class EquilibriumKind { Fundamental, NonfundPlus, NonfundMinus };
enum class EquilibriumStatus { Admissible, Virtual, NotDefined };

inline std::string_view to_string(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::Fundamental: return "fundamental";
    case EquilibriumKind::NonfundPlus: return "nonfund_plus";
    case EquilibriumKind::NonfundMinus: return "nonfund_minus";
  }
  return "?";
}

inline std::string_view to_string(EquilibriumStatus s) {
  switch (s) {
    case EquilibriumStatus::Admissible: return "admissible";
    case EquilibriumStatus::Virtual: return "virtual";
    case EquilibriumStatus::NotDefined: return "not-defined";
  }
  return "?";
}

struct EquilibriumReport {
  EquilibriumKind kind = EquilibriumKind::Fundamental;
  EquilibriumStatus status = EquilibriumStatus::NotDefined;
  double x_bar = kNaN;
  double m_bar = kNaN;
  std::array<double, 2> demands{kNaN, kNaN};
  /// Roots of the characteristic polynomial padded with the zero eigenvalues
  /// of the full state (window, m, z1, z2); sorted by decreasing modulus.
  std::vector<Complex> eigenvalues;

  bool defined() const noexcept { return status != EquilibriumStatus::NotDefined; }
  double spectral_radius() const { return ared::spectral_radius(eigenvalues); }
};

/// Dimension of the flattened state used by the step map for lag L.
inline std::size_t state_dimension(std::size_t lag) { return window_length_for_lag(lag) + 3; }

inline void pad_zeros(std::vector<Complex>& ev, std::size_t dim) {
  while (ev.size() < dim) ev.emplace_back(0.0, 0.0);
}

/// m at the fundamental steady state, where both types earn the same gross
/// profit and only the cost difference matters.
inline double fundamental_fraction_difference(const MarketParams& p) {
  return std::clamp(std::tanh(-0.5 * p.beta * p.cost_difference()), -kFractionBound,
                    kFractionBound);
}

inline EquilibriumReport fundamental_equilibrium(const MarketParams& p,
                                                 const PredictorPair& predictors) {
  const std::size_t lag = predictors.lag();
  const auto zero = DeviationWindow::constant(0.0, window_length_for_lag(lag));
  const auto at_zero = predictors.predict(zero.view());
  if (at_zero[0] != 0.0 || at_zero[1] != 0.0)
    throw ParameterError("predictors", "fundamental equilibrium requires f(0) = 0");

  EquilibriumReport r;
  r.kind = EquilibriumKind::Fundamental;
  r.status = EquilibriumStatus::Admissible;
  r.x_bar = 0.0;
  r.m_bar = fundamental_fraction_difference(p);
  r.demands = {p.s, p.s};

  const auto n = fractions(r.m_bar);
  std::vector<double> gamma(lag, 0.0);
  const auto g1 = predictors.first.gradient_at_zero();
  const auto g2 = predictors.second.gradient_at_zero();
  for (std::size_t i = 0; i < g1.size(); ++i) gamma[i] += n[0] * g1[i] / p.R;
  for (std::size_t i = 0; i < g2.size(); ++i) gamma[i] += n[1] * g2[i] / p.R;
  r.eigenvalues = characteristic_roots(gamma);
  pad_zeros(r.eigenvalues, state_dimension(lag));
  return r;
}

// ---------------------------------------------------------------------------
// Fundamentalist (v) against chartist (g).

/// A threshold value plus whether it is meaningful for the parameter regime.
struct Flagged {
  double value = kNaN;
  bool applicable = false;
};

enum class ChartistRegime {
  GloballyStable,  ///< g <= R: only the fundamental equilibrium exists
  Bifurcating,     ///< R < g: LP/TR/border-collision thresholds exist
};

struct ChartistThresholds {
  ChartistRegime regime = ChartistRegime::GloballyStable;
  Flagged beta_LP, beta_TR, beta_BC_plus, beta_BC_minus;
  Flagged x_LP, x_BC_plus, x_BC_minus;
  Flagged s_BC_minus;
  /// g > R^2: orbits may be unbounded.
  bool unbounded_warning = false;
};

inline void check_chartist_pair(double v, double g) {
  if (!(g > 1.0)) throw ParameterError("g", "must satisfy g > 1");
  if (!(v >= 0.0 && v < 1.0)) throw ParameterError("v", "must satisfy 0 <= v < 1");
}

inline ChartistThresholds chartist_thresholds(const MarketParams& p, double v, double g) {
  check_chartist_pair(v, g);
  ChartistThresholds t;
  t.unbounded_warning = g > p.R * p.R;
  if (!(g > p.R)) return t;
  t.regime = ChartistRegime::Bifurcating;

  const double C = p.cost_difference();
  const double as2 = p.a_sigma2();
  const double s = p.s;
  auto positive = [](double x) { return Flagged{x, std::isfinite(x) && x > 0.0}; };
  auto finite = [](double x) { return Flagged{x, std::isfinite(x)}; };

  const double tr = std::log((p.R - v) / (g - p.R)) / C;
  t.beta_TR = positive(tr);
  t.beta_LP = positive(tr / (1.0 + as2 * s * s * (g - v) / (4.0 * C * (p.R - 1.0))));
  t.beta_BC_plus =
      positive(tr / (1.0 + as2 * s * s * (g - v) * (1.0 - v) / (C * (p.R - v) * (p.R - v))));
  t.beta_BC_minus =
      positive(tr / (1.0 - as2 * s * s * (g - v) * (g - 1.0) / (C * (g - p.R) * (g - p.R))));
  t.x_LP = finite(as2 * s / (2.0 * (p.R - 1.0)));
  t.x_BC_plus = finite(as2 * s / (p.R - v));
  t.x_BC_minus = finite(-as2 * s / (g - p.R));
  t.s_BC_minus = positive(std::sqrt(C * (g - p.R) * (g - p.R) / (as2 * (g - v) * (g - 1.0))));
  return t;
}

/// Reference intensity (R-1)^2 / (a sigma^2 s^2 (g-R)(R-v)); its position
/// relative to beta_TR decides whether the plus branch loses stability
/// before or after the transcritical point.
inline double ns_plus_reference_beta(const MarketParams& p, double v, double g) {
  check_chartist_pair(v, g);
  const double s2 = p.s * p.s;
  return (p.R - 1.0) * (p.R - 1.0) / (p.a_sigma2() * s2 * (g - p.R) * (p.R - v));
}

inline double nonfundamental_fraction_difference(const MarketParams& p, double v, double g) {
  return 1.0 - 2.0 * (p.R - v) / (g - v);
}

/// Eigenvalues of the unconstrained map linearized at (xbar, mbar).
inline std::vector<Complex> nonfundamental_eigenvalues(const MarketParams& p, double v, double g,
                                                       double xbar) {
  const double as2 = p.a_sigma2();
  const double premium = p.risk_premium();
  const double excess = -(p.R - 1.0) * xbar + premium;
  const double arg = 0.5 * p.beta * (excess * (g - v) * xbar / as2 + p.cost_difference());
  const double sech = 1.0 / std::cosh(arg);
  const double gamma = p.beta * xbar * (g - v) * (g - v) / (4.0 * as2) * sech * sech;
  const double c1 = 1.0 + gamma * xbar / p.R;
  const double c2 = -gamma * xbar;
  const double c3 = gamma / p.R * excess;
  auto ev = characteristic_roots({c1, c2, c3});
  pad_zeros(ev, state_dimension(1));
  return ev;
}

/// (plus, minus) non-fundamental steady states. Both are NotDefined when
/// g <= R, beta <= 0, or beta is below the limit point.
inline std::pair<EquilibriumReport, EquilibriumReport> nonfundamental_equilibria(
    const MarketParams& p, double v, double g) {
  const auto th = chartist_thresholds(p, v, g);
  EquilibriumReport plus, minus;
  plus.kind = EquilibriumKind::NonfundPlus;
  minus.kind = EquilibriumKind::NonfundMinus;
  if (th.regime == ChartistRegime::GloballyStable || !(p.beta > 0.0)) return {plus, minus};

  const double C = p.cost_difference();
  const double xlp = th.x_LP.value;
  const double beta_lp = th.beta_LP.value;
  const double radicand = (xlp * xlp + p.a_sigma2() * C / ((p.R - 1.0) * (g - v))) *
                          (1.0 - beta_lp / p.beta);
  if (!(radicand >= 0.0)) return {plus, minus};

  const double root = std::sqrt(radicand);
  const double mbar = nonfundamental_fraction_difference(p, v, g);
  for (auto [rep, xbar] : {std::pair<EquilibriumReport*, double>{&plus, xlp + root},
                           std::pair<EquilibriumReport*, double>{&minus, xlp - root}}) {
    rep->x_bar = xbar;
    rep->m_bar = mbar;
    rep->demands = candidate_demands(v * xbar, g * xbar, mbar, p);
    const bool inside = th.x_BC_minus.value <= xbar && xbar <= th.x_BC_plus.value;
    rep->status = inside ? EquilibriumStatus::Admissible : EquilibriumStatus::Virtual;
    rep->eigenvalues = nonfundamental_eigenvalues(p, v, g, xbar);
  }
  return {plus, minus};
}

/// Predictor pair for (v, g).
inline PredictorPair chartist_pair(double v, double g, const MarketParams& p) {
  return {Predictor::fundamental(v, p.C1), Predictor::chartist(g, p.C2)};
}

/// State sitting on a reported equilibrium.
inline MarketState equilibrium_state(const EquilibriumReport& r, std::size_t lag) {
  return MarketState::stationary(r.x_bar, r.m_bar, r.demands, lag);
}

// ---------------------------------------------------------------------------
// Rate-of-change pairs.

/// Intensity at which the fundamental steady state with a ROC or S-ROC type
/// loses stability through a complex pair; +inf when it never does.
inline double roc_ns_threshold(const MarketParams& p) {
  const double C = p.cost_difference();
  if (!(p.R < 2.0) || !(C > 0.0)) return kInf;
  return std::log(p.R / (2.0 - p.R)) / C;
}

// ---------------------------------------------------------------------------
// Numeric stability-loss search.

struct StabilityLoss {
  bool found = false;
  double beta = kNaN;
};

/// First transition of `radius(beta)` from below 1 to at or above 1 on a
/// uniform grid over [lo, hi], refined by bisection to `tol`. Points where
/// `radius` is NaN count as not stable.
inline StabilityLoss find_stability_loss(const std::function<double(double)>& radius, double lo,
                                         double hi, int grid = 400, double tol = 1e-9) {
  StabilityLoss out;
  if (!(hi > lo) || grid < 1) return out;
  auto stable = [&](double b) { return radius(b) < 1.0; };
  double prev = lo;
  bool prev_stable = stable(lo);
  for (int i = 1; i <= grid; ++i) {
    const double b = lo + (hi - lo) * i / grid;
    const double r = radius(b);
    const bool now_stable = r < 1.0;
    if (prev_stable && !now_stable && !std::isnan(r)) {
      double a = prev, c = b;
      while (c - a > tol) {
        const double mid = 0.5 * (a + c);
        (stable(mid) ? a : c) = mid;
      }
      out.found = true;
      out.beta = 0.5 * (a + c);
      return out;
    }
    prev = b;
    prev_stable = now_stable;
  }
  return out;
}

enum class Branch { Plus, Minus };

struct NsSearchResult {
  bool found = false;
  double beta = kNaN;
  bool admissible_at_crossing = false;
  bool complex_pair = false;  ///< dominant eigenvalue has non-zero imaginary part
};

/// Loss of stability of a non-fundamental branch over [beta_lo, beta_hi].
inline NsSearchResult ns_bifurcation_search(MarketParams p, double v, double g, Branch branch,
                                            double beta_lo, double beta_hi, int grid = 400,
                                            double tol = 1e-9) {
  auto report_at = [&](double beta) {
    p.beta = beta;
    auto [plus, minus] = nonfundamental_equilibria(p, v, g);
    return branch == Branch::Plus ? plus : minus;
  };
  const auto loss = find_stability_loss(
      [&](double beta) {
        const auto r = report_at(beta);
        return r.defined() ? r.spectral_radius() : kNaN;
      },
      beta_lo, beta_hi, grid, tol);
  NsSearchResult out;
  if (!loss.found) return out;
  out.found = true;
  out.beta = loss.beta;
  const auto r = report_at(loss.beta);
  out.admissible_at_crossing = r.status == EquilibriumStatus::Admissible;
  out.complex_pair = !r.eigenvalues.empty() &&
                     std::abs(r.eigenvalues.front().imag()) > 1e-9 * std::abs(r.eigenvalues.front());
  return out;
}

/// Spectral radius of the finite-difference Jacobian of the unconstrained
/// step map at the fundamental steady state.
inline double numeric_fundamental_radius(MarketParams p, const PredictorPair& predictors,
                                         double beta) {
  p.beta = beta;
  const auto st = MarketState::stationary(0.0, fundamental_fraction_difference(p), {p.s, p.s},
                                          predictors.lag());
  return spectral_radius(numeric_eigenvalues(st, predictors, p, Mode::Unconstrained));
}

/// Numeric counterpart of `roc_ns_threshold`, valid for any predictor pair.
inline StabilityLoss fundamental_stability_loss(const MarketParams& p,
                                                const PredictorPair& predictors, double beta_lo,
                                                double beta_hi, int grid = 400,
                                                double tol = 1e-9) {
  return find_stability_loss(
      [&](double beta) { return numeric_fundamental_radius(p, predictors, beta); }, beta_lo,
      beta_hi, grid, tol);
}

// ---------------------------------------------------------------------------
// Uniqueness of the fundamental steady state.

struct UniquenessVerdict {
  bool hypothesis_holds = false;  ///< every slope below R, or every slope above R
  double min_slope = kInf;
  double max_slope = -kInf;
  std::size_t probes = 0;
};

/// Sign-symmetric probe grid of magnitudes 1e-4 .. 0.9 * cap.
inline std::vector<double> default_probe_grid(double cap, int per_side = 40) {
  std::vector<double> grid;
  const double lo = std::log(1e-4), hi = std::log(0.9 * cap);
  for (int i = 0; i < per_side; ++i) {
    const double x = std::exp(lo + (hi - lo) * i / (per_side - 1));
    grid.push_back(x);
    grid.push_back(-x);
  }
  return grid;
}

/// Evaluates f_h(x 1) / x on the grid; grid points that do not give a
/// positive price are skipped.
inline UniquenessVerdict uniqueness_check(const PredictorPair& predictors, double R, double pbar,
                                          const std::vector<double>& probes) {
  UniquenessVerdict out;
  const std::size_t len = window_length_for_lag(predictors.lag());
  for (double x : probes) {
    if (x == 0.0 || !(x > -pbar)) continue;
    const auto w = DeviationWindow::constant(x, len);
    const auto f = predictors.predict(w.view());
    for (double fh : f) {
      const double slope = fh / x;
      out.min_slope = std::min(out.min_slope, slope);
      out.max_slope = std::max(out.max_slope, slope);
    }
    ++out.probes;
  }
  out.hypothesis_holds = out.probes > 0 && (out.max_slope < R || out.min_slope > R);
  return out;
}

// ---------------------------------------------------------------------------
// Fixed points of the restricted branches (diagnostic only: they sit on a
// downward tick and are unstable by construction).

struct BranchFixedPoint {
  Region region = Region::Z1;
  double x = kNaN;
  double m = kNaN;
  std::array<double, 2> demands{};
  bool consistent = false;  ///< candidate demand signs select this branch
  static constexpr std::string_view tag = "unstable-by-construction";
};

namespace detail {

/// All roots of h on (-1, 1) found by sign changes on a grid plus bisection.
inline std::vector<double> roots_on_open_unit(const std::function<double(double)>& h,
                                              int grid = 4000) {
  std::vector<double> roots;
  const double edge = 1.0 - 1e-12;
  double a = -edge, ha = h(a);
  for (int i = 1; i <= grid; ++i) {
    const double b = -edge + 2.0 * edge * i / grid;
    const double hb = h(b);
    if (ha == 0.0) roots.push_back(a);
    else if (std::signbit(ha) != std::signbit(hb) && hb != 0.0) {
      double lo = a, hi = b, hlo = ha;
      for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
        const double mid = 0.5 * (lo + hi);
        const double hm = h(mid);
        if (std::signbit(hm) == std::signbit(hlo)) {
          lo = mid;
          hlo = hm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    a = b;
    ha = hb;
  }
  return roots;
}

}  // namespace detail

inline std::vector<BranchFixedPoint> branch_fixed_points(const MarketParams& p, double v,
                                                         double g) {
  check_chartist_pair(v, g);
  std::vector<BranchFixedPoint> out;
  const double as2 = p.a_sigma2(), s = p.s, C = p.cost_difference();
  if (!(s > 0.0)) return out;

  auto finish = [&](Region region, double m, double x, std::array<double, 2> z) {
    BranchFixedPoint fp;
    fp.region = region;
    fp.x = x;
    fp.m = m;
    fp.demands = z;
    const auto cand = candidate_demands(v * x, g * x, m, p);
    fp.consistent = region == Region::Z1 ? (cand[0] < 0.0 && cand[1] > 0.0)
                                         : (cand[0] > 0.0 && cand[1] < 0.0);
    out.push_back(fp);
  };

  if (g != p.R) {
    // Z1: fundamentalists hold nothing
    auto x_of = [&](double m) { return as2 * s * (1.0 + m) / ((g - p.R) * (1.0 - m)); };
    auto h = [&](double m) {
      const double excess = (1.0 - p.R) * x_of(m) + as2 * s;
      return m - std::tanh(0.5 * p.beta * (-excess * 2.0 * s / (1.0 - m) - C));
    };
    for (double m : detail::roots_on_open_unit(h))
      finish(Region::Z1, m, x_of(m), {0.0, 2.0 * s / (1.0 - m)});
  }
  {
    // Z2: chartists hold nothing
    auto x_of = [&](double m) { return -as2 * s * (1.0 - m) / ((p.R - v) * (1.0 + m)); };
    auto h = [&](double m) {
      const double excess = (1.0 - p.R) * x_of(m) + as2 * s;
      return m - std::tanh(0.5 * p.beta * (excess * 2.0 * s / (1.0 + m) - C));
    };
    for (double m : detail::roots_on_open_unit(h))
      finish(Region::Z2, m, x_of(m), {2.0 * s / (1.0 + m), 0.0});
  }
  return out;
}

}  // namespace ared
