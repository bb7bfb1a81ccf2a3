#pragma once

// Uptick-rule clearing. After a downward or flat tick (x_{t-1} <= x_{t-2})
// demands are truncated at zero, which splits the state space into U, Z0, Z1
// and Z2 and makes the one-period map piecewise smooth.

#include <algorithm>
#include <array>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "ared/core_model.hpp"
#include "ared/errors.hpp"
#include "ared/predictors.hpp"

namespace ared {

enum class Mode { Constrained, Unconstrained };

inline std::string_view to_string(Mode m) {
  return m == Mode::Constrained ? "constrained" : "unconstrained";
}

/// Demands at the would-be unconstrained clearing price. They depend only on
/// the predictions and m, not on x_t.
inline std::array<double, 2> candidate_demands(double f1, double f2, double m,
                                               const MarketParams& p) {
  const double spread = (f1 - f2) / p.a_sigma2();
  return {(1.0 - m) / 2.0 * spread + p.s, -(1.0 + m) / 2.0 * spread + p.s};
}

/// Region of the constrained map. A tie x_{t-1} == x_{t-2} counts as a
/// downward tick; an exactly-zero candidate demand falls in Z0.
inline Region classify(double x_prev1, double x_prev2, std::array<double, 2> z) {
  if (x_prev1 > x_prev2) return Region::U;
  if (z[0] >= 0.0 && z[1] >= 0.0) return Region::Z0;
  if (z[0] < 0.0 && z[1] > 0.0) return Region::Z1;
  if (z[0] > 0.0 && z[1] < 0.0) return Region::Z2;
  throw InternalError("candidate demands (" + std::to_string(z[0]) + ", " +
                      std::to_string(z[1]) + ") cannot both be non-positive");
}

struct BranchPrice {
  double x;
  std::array<double, 2> demands;
};

/// Price and demands of the branch selected by `region`.
inline BranchPrice branch_price(Region region, double f1, double f2, double m,
                                const MarketParams& p) {
  const double premium = p.risk_premium();
  switch (region) {
    case Region::Z1:
      // only type 2 holds shares
      return {(f2 - premium * (1.0 + m) / (1.0 - m)) / p.R, {0.0, 2.0 * p.s / (1.0 - m)}};
    case Region::Z2:
      return {(f1 - premium * (1.0 - m) / (1.0 + m)) / p.R, {2.0 * p.s / (1.0 + m), 0.0}};
    default:
      return {clear_unconstrained(f1, f2, m, p), candidate_demands(f1, f2, m, p)};
  }
}

/// Advances `state` by one period in place and returns the period's outcome.
///
/// Warm-up: the fraction difference is first updated when clearing period 2
/// (m_2 = m_1), and with fewer than two past deviations no tick is known so
/// period 1 is always cleared unrestricted (region U in constrained mode).
inline StepOutcome advance(MarketState& state, const PredictorPair& predictors,
                           const MarketParams& p, Mode mode, double pbar) {
  const auto window = state.deviations.view();
  StepOutcome out;
  try {
    out.predictions = predictors.predict(window);
  } catch (const DomainError& e) {
    throw e.at_period(state.period + 1);
  }
  const auto [f1, f2] = out.predictions;
  const double m = state.m;
  out.m = m;
  out.fractions = fractions(m);

  const auto candidates = candidate_demands(f1, f2, m, p);
  if (mode == Mode::Unconstrained) out.region = Region::Unconstrained;
  else if (window.size() < 2) out.region = Region::U;
  else out.region = classify(window[0], window[1], candidates);

  const BranchPrice branch = branch_price(out.region, f1, f2, m, p);
  out.x = branch.x;
  out.demands = branch.demands;
  if (!(out.x > -pbar))
    throw DomainError("non-positive price: deviation " + std::to_string(out.x) + " <= -pbar")
        .at_period(state.period + 1);

  const double x_prev = window[0];
  out.excess_return = excess_return(out.x, x_prev, p);
  out.net_profits = {net_profit(out.excess_return, state.z_prev[0], p.C1),
                     net_profit(out.excess_return, state.z_prev[1], p.C2)};

  const double m_next =
      state.period == 0 ? m : update_fraction_difference(out.excess_return, state.z_prev, p);

  state.deviations.push(out.x);
  state.m = m_next;
  state.z_prev = out.demands;
  ++state.period;
  return out;
}

struct StepResult {
  StepOutcome outcome;
  MarketState next;
};

/// Pure form of `advance`.
inline StepResult step(const MarketState& state, const PredictorPair& predictors,
                       const MarketParams& p, Mode mode) {
  StepResult r{{}, state};
  r.outcome = advance(r.next, predictors, p, mode, fundamental_price(p));
  return r;
}

// ---------------------------------------------------------------------------
// General H-type clearing with non-negative demands.

/// z_h(x) = slope * (x - intercept_deviation), truncated at zero.
struct DemandCurve {
  double intercept_deviation;  ///< deviation at which the demand vanishes
  double slope;                ///< -R / (a sigma^2)
  double fraction;             ///< n_h
};

inline DemandCurve demand_curve(double prediction, double fraction, const MarketParams& p) {
  return {(prediction + p.risk_premium()) / p.R, -p.R / p.a_sigma2(), fraction};
}

inline double per_capita_demand(std::span<const DemandCurve> curves, double x) {
  double d = 0.0;
  for (const auto& c : curves) d += c.fraction * std::max(0.0, c.slope * (x - c.intercept_deviation));
  return d;
}

/// Unique x with sum_h n_h max(0, z_h(x)) = s. The aggregate is piecewise
/// linear and decreasing, so the root is found by walking the breakpoints
/// from the top and solving the first linear segment that contains it.
inline double clear_general(std::span<const DemandCurve> curves, double s) {
  if (curves.empty()) throw ParameterError("curves", "at least one demand curve is required");
  if (!(s > 0.0)) throw ParameterError("s", "general clearing requires s > 0");
  for (const auto& c : curves)
    if (!(c.slope < 0.0) || !(c.fraction > 0.0))
      throw ParameterError("curves", "slopes must be negative and fractions positive");

  std::vector<DemandCurve> sorted(curves.begin(), curves.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& l, const auto& r) {
    return l.intercept_deviation > r.intercept_deviation;
  });

  double weighted_slope = 0.0;      // sum n_i slope_i over active curves
  double weighted_intercept = 0.0;  // sum n_i slope_i x*_i
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    weighted_slope += sorted[j].fraction * sorted[j].slope;
    weighted_intercept += sorted[j].fraction * sorted[j].slope * sorted[j].intercept_deviation;
    const double x = (s + weighted_intercept) / weighted_slope;
    if (j + 1 == sorted.size() || x >= sorted[j + 1].intercept_deviation) return x;
  }
  throw InternalError("clear_general: no segment contains the root");
}

}  // namespace ared
