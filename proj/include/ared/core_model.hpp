#pragma once

// Model constants and the unconstrained one-period market mechanics for two
// trader types: pricing, optimal demands, excess return and the evolutionary
// update of the fraction difference m = n1 - n2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>

#include "ared/errors.hpp"

namespace ared {

/// Structural constants. Defaults are the reference parameter set
/// R = 1.1, a = 1, sigma^2 = 1, ybar = 1, s = 0.1, C1 = 1.
struct MarketParams {
  double R = 1.1;       ///< gross risk-free return 1 + r
  double a = 1.0;       ///< risk aversion
  double sigma2 = 1.0;  ///< common belief variance
  double s = 0.1;       ///< outside supply per trader S/N
  double ybar = 1.0;    ///< mean dividend
  double C1 = 1.0;      ///< per-period cost of the type-1 (fundamental) predictor
  double C2 = 0.0;      ///< per-period cost of the type-2 predictor
  double beta = 0.0;    ///< intensity of choice

  /// Lifts the R < 2 bound (r in (0,1)); R > 1 is always required.
  bool allow_large_R = false;

  double a_sigma2() const noexcept { return a * sigma2; }
  double risk_premium() const noexcept { return a * sigma2 * s; }
  double cost_difference() const noexcept { return C1 - C2; }
};

inline void validate(const MarketParams& p) {
  auto finite = [](std::string_view key, double v) {
    if (!std::isfinite(v)) throw ParameterError(std::string(key), "must be finite");
  };
  finite("R", p.R);
  finite("a", p.a);
  finite("sigma2", p.sigma2);
  finite("s", p.s);
  finite("ybar", p.ybar);
  finite("C1", p.C1);
  finite("C2", p.C2);
  finite("beta", p.beta);
  if (!(p.R > 1.0)) throw ParameterError("R", "must satisfy R > 1");
  if (!p.allow_large_R && !(p.R < 2.0))
    throw ParameterError("R", "must satisfy R < 2 (set allow_large_R to override)");
  if (!(p.a > 0.0)) throw ParameterError("a", "must satisfy a > 0");
  if (!(p.sigma2 > 0.0)) throw ParameterError("sigma2", "must satisfy sigma2 > 0");
  if (!(p.s >= 0.0)) throw ParameterError("s", "must satisfy s >= 0");
  if (!(p.beta >= 0.0)) throw ParameterError("beta", "must satisfy beta >= 0");
  if (!(p.ybar - p.a_sigma2() * p.s > 0.0))
    throw ParameterError("ybar", "fundamental price requires ybar - a*sigma2*s > 0");
}

/// pbar = (ybar - a sigma^2 s) / (R - 1).
inline double fundamental_price(const MarketParams& p) {
  if (!(p.R > 1.0)) throw ParameterError("R", "fundamental price requires R > 1");
  const double numerator = p.ybar - p.a_sigma2() * p.s;
  if (!(numerator > 0.0))
    throw ParameterError("ybar", "fundamental price requires ybar - a*sigma2*s > 0");
  return numerator / (p.R - 1.0);
}

/// Unconstrained clearing deviation x_t = [(1+m) f1 + (1-m) f2] / (2R).
inline double clear_unconstrained(double f1, double f2, double m, const MarketParams& p) {
  return ((1.0 + m) * f1 + (1.0 - m) * f2) / (2.0 * p.R);
}

/// Mean-variance demand (f_h - R x) / (a sigma^2) + s. Negative means short.
inline double optimal_demand(double prediction, double x, const MarketParams& p) {
  return (prediction - p.R * x) / p.a_sigma2() + p.s;
}

/// Realized excess return per share with the dividend shock fixed to zero.
inline double excess_return(double x, double x_prev, const MarketParams& p) {
  return x - p.R * x_prev + p.risk_premium();
}

inline double net_profit(double excess, double z_prev, double cost) {
  return excess * z_prev - cost;
}

/// Largest double strictly below one; tanh rounds to +-1 for |arg| > ~19.
inline constexpr double kFractionBound = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;

/// m_{t+1} = tanh(beta/2 * (R_t (z1 - z2) - (C1 - C2))), using realized demands
/// of the previous period. The result is kept strictly inside (-1, 1).
inline double update_fraction_difference(double excess, std::array<double, 2> z_prev,
                                         const MarketParams& p) {
  const double arg =
      0.5 * p.beta * (excess * (z_prev[0] - z_prev[1]) - p.cost_difference());
  return std::clamp(std::tanh(arg), -kFractionBound, kFractionBound);
}

inline std::array<double, 2> fractions(double m) { return {(1.0 + m) / 2.0, (1.0 - m) / 2.0}; }

// ---------------------------------------------------------------------------
// State and per-period outcome.

enum class Region { U, Z0, Z1, Z2, Unconstrained };

inline std::string_view to_string(Region r) {
  switch (r) {
    case Region::U: return "U";
    case Region::Z0: return "Z0";
    case Region::Z1: return "Z1";
    case Region::Z2: return "Z2";
    case Region::Unconstrained: return "UNCONSTRAINED";
  }
  return "?";
}

/// Fixed-capacity rolling window of past deviations, most recent first.
class DeviationWindow {
public:
  static constexpr std::size_t kCapacity = 34;

  DeviationWindow() = default;
  DeviationWindow(double x0, std::size_t limit) : limit_(checked(limit)) { push(x0); }

  /// Constant window of `count` copies of x.
  static DeviationWindow constant(double x, std::size_t count) {
    DeviationWindow w;
    w.limit_ = checked(count);
    for (std::size_t i = 0; i < count; ++i) w.push(x);
    return w;
  }

  void push(double x) {
    const std::size_t n = std::min(size_ + 1, limit_);
    for (std::size_t i = n; i-- > 1;) data_[i] = data_[i - 1];
    data_[0] = x;
    size_ = n;
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t limit() const noexcept { return limit_; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  std::span<const double> view() const noexcept { return {data_.data(), size_}; }

private:
  static std::size_t checked(std::size_t limit) {
    if (limit == 0 || limit > kCapacity)
      throw ParameterError("window", "length must be in [1, " + std::to_string(kCapacity) + "]");
    return limit;
  }

  std::array<double, kCapacity> data_{};
  std::size_t size_ = 0;
  std::size_t limit_ = 3;
};

/// Window length needed for a predictor lag L: x_{t-2} is always needed for
/// the uptick test.
inline std::size_t window_length_for_lag(std::size_t lag) { return std::max<std::size_t>(lag, 2) + 1; }

struct MarketState {
  DeviationWindow deviations;            ///< x_{t-1}, x_{t-2}, ...
  double m = 0.0;                        ///< m_t, used to clear period t
  std::array<double, 2> z_prev{0.0, 0.0};  ///< (z_{1,t-1}, z_{2,t-1})
  std::int64_t period = 0;               ///< periods already cleared

  /// Opening state (x0, m1) before period 1; previous demands default to s.
  static MarketState opening(double x0, double m1, std::array<double, 2> z0, std::size_t lag) {
    MarketState st;
    st.deviations = DeviationWindow(x0, window_length_for_lag(lag));
    st.m = m1;
    st.z_prev = z0;
    return st;
  }

  /// State sitting on a stationary point (xbar, mbar) with demands zbar.
  static MarketState stationary(double xbar, double mbar, std::array<double, 2> zbar,
                                std::size_t lag) {
    MarketState st;
    const std::size_t len = window_length_for_lag(lag);
    st.deviations = DeviationWindow::constant(xbar, len);
    st.m = mbar;
    st.z_prev = zbar;
    st.period = static_cast<std::int64_t>(len);
    return st;
  }

  double last() const noexcept { return deviations[0]; }
};

struct StepOutcome {
  double x = 0.0;                          ///< realized deviation x_t
  std::array<double, 2> demands{};         ///< (z1, z2)
  Region region = Region::Unconstrained;
  double excess_return = 0.0;              ///< R_t
  std::array<double, 2> net_profits{};     ///< (U1, U2)
  std::array<double, 2> fractions{};       ///< (n1, n2) at t
  double m = 0.0;                          ///< m_t
  std::array<double, 2> predictions{};     ///< (f1, f2)
};

/// |n1 z1 + n2 z2 - s|
inline double clearing_residual(const StepOutcome& o, double s) {
  return std::abs(o.fractions[0] * o.demands[0] + o.fractions[1] * o.demands[1] - s);
}

inline constexpr double kClearingTolerance = 1e-12;

}  // namespace ared
