#pragma once

// Belief functions f_h mapping the window of past deviations (most recent
// first) to a forecast of the next deviation.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ared/core_model.hpp"
#include "ared/errors.hpp"

namespace ared {

namespace detail {

/// ROC - 1, computed without forming pbar + x so that deviations far below
/// the resolution of pbar still move the forecast.
inline double roc_excess_rate(std::span<const double> window, std::size_t lag, double pbar) {
  if (window.empty()) throw DomainError("rate of change needs at least one past deviation");
  const std::size_t span = std::min(lag, window.size()) - 1;
  if (span == 0) return 0.0;
  const double recent = pbar + window[0];
  const double oldest = pbar + window[span];
  if (!(recent > 0.0) || !(oldest > 0.0))
    throw DomainError("rate of change undefined for a non-positive price level");
  const double delta = (window[0] - window[span]) / oldest;
  return span == 1 ? delta : std::expm1(std::log1p(delta) / static_cast<double>(span));
}

/// (pbar + x_{t-1}) b^2 - pbar with b = 1 + eb.
inline double extrapolate(double x_last, double pbar, double eb) {
  return x_last + (pbar + x_last) * eb * (2.0 + eb);
}

}  // namespace detail

/// ((pbar + x_{t-1}) / (pbar + x_{t-L}))^(1/(L-1)). Before L deviations exist
/// the oldest available one is used and the exponent follows the actual span;
/// with a single deviation the rate is 1.
inline double roc_rate(std::span<const double> window, std::size_t lag, double pbar) {
  return 1.0 + detail::roc_excess_rate(window, lag, pbar);
}

/// Confidence weight 2 / (rate^alpha + rate^-alpha), in (0, 1], equal to 1 at rate 1.
inline double roc_confidence(double rate, double alpha) {
  const double up = std::pow(rate, alpha);
  return 2.0 / (up + 1.0 / up);
}

inline double predict_fundamental(std::span<const double> window, double v) { return v * window[0]; }

inline double predict_chartist(std::span<const double> window, double g) { return g * window[0]; }

/// Plain rate-of-change extrapolation (pbar + x_{t-1}) ROC^2 - pbar.
inline double predict_roc(std::span<const double> window, std::size_t lag, double pbar) {
  const double e = detail::roc_excess_rate(window, lag, pbar);
  return detail::extrapolate(window[0], pbar, e);
}

/// Smoothed rate of change: the rate is blended toward 1 by the confidence
/// weight before being applied twice.
inline double predict_sroc(std::span<const double> window, std::size_t lag, double alpha,
                           double pbar) {
  const double e = detail::roc_excess_rate(window, lag, pbar);
  const double w = roc_confidence(1.0 + e, alpha);
  return detail::extrapolate(window[0], pbar, w * e);
}

struct Fundamental {
  double v = 0.0;
};
struct Chartist {
  double g = 1.2;
};
struct Roc {
  std::size_t lag = 2;
};
struct SRoc {
  std::size_t lag = 2;
  double alpha = 10.0;
};

/// A belief function together with its per-period cost.
class Predictor {
public:
  using Kind = std::variant<Fundamental, Chartist, Roc, SRoc>;

  static Predictor fundamental(double v, double cost = 1.0) {
    if (!(v >= 0.0 && v < 1.0)) throw ParameterError("v", "must satisfy 0 <= v < 1");
    return Predictor(Fundamental{v}, cost, 0.0);
  }
  static Predictor chartist(double g, double cost = 0.0) {
    if (!(g > 1.0)) throw ParameterError("g", "must satisfy g > 1");
    return Predictor(Chartist{g}, cost, 0.0);
  }
  static Predictor roc(std::size_t lag, double pbar, double cost = 0.0) {
    check_lag(lag);
    check_pbar(pbar);
    return Predictor(Roc{lag}, cost, pbar);
  }
  static Predictor sroc(std::size_t lag, double alpha, double pbar, double cost = 0.0) {
    check_lag(lag);
    check_pbar(pbar);
    if (!(alpha > 0.0)) throw ParameterError("alpha", "must satisfy alpha > 0");
    return Predictor(SRoc{lag, alpha}, cost, pbar);
  }

  double predict(std::span<const double> window) const {
    if (window.empty()) throw DomainError("prediction needs at least one past deviation");
    return std::visit(
        [&](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Fundamental>) return predict_fundamental(window, k.v);
          else if constexpr (std::is_same_v<T, Chartist>) return predict_chartist(window, k.g);
          else if constexpr (std::is_same_v<T, Roc>) return predict_roc(window, k.lag, pbar_);
          else return predict_sroc(window, k.lag, k.alpha, pbar_);
        },
        kind_);
  }

  /// Number of past deviations the predictor reads.
  std::size_t lag() const {
    return std::visit(
        [](const auto& k) -> std::size_t {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Roc> || std::is_same_v<T, SRoc>) return k.lag;
          else return 1;
        },
        kind_);
  }

  /// Partial derivatives df/dx_{t-i}, i = 1..lag(), at the zero window.
  /// For the rate-of-change kinds the confidence weight has zero slope at
  /// rate 1, so both share the plain ROC gradient.
  std::vector<double> gradient_at_zero() const {
    return std::visit(
        [](const auto& k) -> std::vector<double> {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Fundamental>) return {k.v};
          else if constexpr (std::is_same_v<T, Chartist>) return {k.g};
          else {
            std::vector<double> grad(k.lag, 0.0);
            const double span = static_cast<double>(k.lag - 1);
            grad.front() = 1.0 + 2.0 / span;
            grad.back() += -2.0 / span;
            return grad;
          }
        },
        kind_);
  }

  const Kind& kind() const noexcept { return kind_; }
  double cost() const noexcept { return cost_; }
  double pbar() const noexcept { return pbar_; }

  std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Fundamental>) return "fundamental";
          else if constexpr (std::is_same_v<T, Chartist>) return "chartist";
          else if constexpr (std::is_same_v<T, Roc>) return "roc";
          else return "sroc";
        },
        kind_);
  }

private:
  Predictor(Kind kind, double cost, double pbar) : kind_(kind), cost_(cost), pbar_(pbar) {}

  static void check_lag(std::size_t lag) {
    if (lag < 2 || lag + 1 > DeviationWindow::kCapacity)
      throw ParameterError("L", "must satisfy 2 <= L <= " +
                                    std::to_string(DeviationWindow::kCapacity - 1));
  }
  static void check_pbar(double pbar) {
    if (!(pbar > 0.0)) throw ParameterError("pbar", "fundamental price must be positive");
  }

  Kind kind_;
  double cost_ = 0.0;
  double pbar_ = 0.0;
};

/// Type 1 is the fundamental trader, type 2 the non-fundamental one.
struct PredictorPair {
  Predictor first;
  Predictor second;

  std::size_t lag() const { return std::max(first.lag(), second.lag()); }
  std::array<double, 2> predict(std::span<const double> window) const {
    return {first.predict(window), second.predict(window)};
  }
};

/// Copy of `p` with C1, C2 taken from the predictor pair.
inline MarketParams with_costs(MarketParams p, const PredictorPair& pair) {
  p.C1 = pair.first.cost();
  p.C2 = pair.second.cost();
  return p;
}

}  // namespace ared
