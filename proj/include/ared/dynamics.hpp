#pragma once

// Orbits, largest Lyapunov exponent, beta scans and attractor statistics.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ared/clearing.hpp"
#include "ared/equilibria.hpp"

namespace ared {

/// |x| beyond this multiple of pbar counts as divergence.
inline constexpr double kDivergenceFactor = 1e6;

struct OrbitRecord {
  MarketParams params;
  Mode mode = Mode::Constrained;
  double x0 = 0.0;
  double m1 = 0.0;
  std::int64_t transient = 0;
  std::vector<StepOutcome> steps;  ///< periods T0+1 .. T0+T
  bool diverged = false;           ///< stopped early on |x| > 1e6 pbar
  double max_residual = 0.0;       ///< largest clearing residual, transient included
  MarketState final_state;
};

/// Runs `transient` discarded periods then records `length` periods,
/// starting from `state`.
inline OrbitRecord simulate_from(MarketState state, const MarketParams& p,
                                 const PredictorPair& predictors, Mode mode, std::int64_t length,
                                 std::int64_t transient) {
  if (length < 0) throw ParameterError("T", "must satisfy T >= 0");
  if (transient < 0) throw ParameterError("T0", "must satisfy T0 >= 0");
  const double pbar = fundamental_price(p);
  const double cutoff = kDivergenceFactor * pbar;
  OrbitRecord rec;
  rec.params = p;
  rec.mode = mode;
  rec.x0 = state.last();
  rec.m1 = state.m;
  rec.transient = transient;
  rec.steps.reserve(static_cast<std::size_t>(length));
  for (std::int64_t t = 0; t < transient + length; ++t) {
    const StepOutcome o = advance(state, predictors, p, mode, pbar);
    rec.max_residual = std::max(rec.max_residual, clearing_residual(o, p.s));
    if (t >= transient) rec.steps.push_back(o);
    if (!(std::abs(o.x) <= cutoff)) {
      rec.diverged = true;
      break;
    }
  }
  rec.final_state = state;
  return rec;
}

inline OrbitRecord simulate(const MarketParams& p, const PredictorPair& predictors, Mode mode,
                            double x0, double m1, std::int64_t length, std::int64_t transient,
                            std::optional<std::array<double, 2>> z0 = std::nullopt) {
  const double pbar = fundamental_price(p);
  if (!(x0 > -pbar)) throw ParameterError("x0", "must satisfy x0 > -pbar");
  if (!(m1 > -1.0 && m1 < 1.0)) throw ParameterError("m1", "must satisfy -1 < m1 < 1");
  const auto st = MarketState::opening(x0, m1, z0.value_or(std::array{p.s, p.s}),
                                       predictors.lag());
  return simulate_from(st, p, predictors, mode, length, transient);
}

// ---------------------------------------------------------------------------
// Largest Lyapunov exponent (two-orbit renormalization).

enum class ScanStatus { Ok, Divergent, DomainError };

inline std::string_view to_string(ScanStatus s) {
  switch (s) {
    case ScanStatus::Ok: return "ok";
    case ScanStatus::Divergent: return "divergent";
    case ScanStatus::DomainError: return "domain_error";
  }
  return "?";
}

struct LyapunovEstimate {
  double exponent = kNaN;
  ScanStatus status = ScanStatus::Ok;
  int reseeds = 0;
  double max_residual = 0.0;  ///< over the reference orbit
  MarketState final_state;
  std::vector<double> tail;  ///< last deviations of the reference orbit
};

namespace detail {

inline double state_distance(const MarketState& a, const MarketState& b) {
  double d2 = 0.0;
  const std::size_t n = std::min(a.deviations.size(), b.deviations.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.deviations[i] - b.deviations[i];
    d2 += d * d;
  }
  const double dm = a.m - b.m, dz1 = a.z_prev[0] - b.z_prev[0], dz2 = a.z_prev[1] - b.z_prev[1];
  return std::sqrt(d2 + dm * dm + dz1 * dz1 + dz2 * dz2);
}

/// shadow <- ref + (shadow - ref) * scale
inline void rescale_toward(MarketState& shadow, const MarketState& ref, double scale) {
  const std::size_t n = std::min(shadow.deviations.size(), ref.deviations.size());
  for (std::size_t i = 0; i < n; ++i)
    shadow.deviations[i] = ref.deviations[i] + (shadow.deviations[i] - ref.deviations[i]) * scale;
  shadow.m = ref.m + (shadow.m - ref.m) * scale;
  for (int h = 0; h < 2; ++h)
    shadow.z_prev[h] = ref.z_prev[h] + (shadow.z_prev[h] - ref.z_prev[h]) * scale;
}

inline MarketState offset_last(const MarketState& ref, double d0) {
  MarketState s = ref;
  s.deviations[0] += d0;
  return s;
}

}  // namespace detail

/// Benettin estimate over `length` periods from `state`. The shadow orbit
/// starts d0 away in x_{t-1}. If the shadow leaves the valid domain it is
/// re-seeded once on the opposite side; a second failure aborts with a
/// DomainError. `keep` deviations of the reference orbit are returned.
inline LyapunovEstimate lyapunov_from(MarketState state, const MarketParams& p,
                                      const PredictorPair& predictors, Mode mode,
                                      std::int64_t length, double d0 = 1e-8,
                                      std::size_t keep = 0) {
  if (!(d0 > 0.0)) throw ParameterError("d0", "must satisfy d0 > 0");
  const double pbar = fundamental_price(p);
  const double cutoff = kDivergenceFactor * pbar;
  LyapunovEstimate est;
  MarketState shadow = detail::offset_last(state, d0);
  double sum = 0.0;
  std::int64_t counted = 0;
  double sign = 1.0;
  int domain_failures = 0;
  const auto keep_from = length - static_cast<std::int64_t>(keep);
  for (std::int64_t t = 0; t < length; ++t) {
    const StepOutcome o = advance(state, predictors, p, mode, pbar);
    est.max_residual = std::max(est.max_residual, clearing_residual(o, p.s));
    if (t >= keep_from) est.tail.push_back(o.x);
    if (!(std::abs(o.x) <= cutoff)) {
      est.status = ScanStatus::Divergent;
      est.final_state = state;
      return est;
    }
    bool shadow_ok = true;
    try {
      advance(shadow, predictors, p, mode, pbar);
    } catch (const DomainError&) {
      shadow_ok = false;
    }
    const double d = shadow_ok ? detail::state_distance(state, shadow) : 0.0;
    if (!shadow_ok || !(d > 0.0) || !std::isfinite(d)) {
      if (!shadow_ok && ++domain_failures > 1)
        throw DomainError("shadow orbit left the valid domain twice", state.period);
      ++est.reseeds;
      sign = -sign;
      shadow = detail::offset_last(state, sign * d0);
      continue;
    }
    sum += std::log(d / d0);
    ++counted;
    detail::rescale_toward(shadow, state, d0 / d);
  }
  est.exponent = counted > 0 ? sum / static_cast<double>(counted) : kNaN;
  est.final_state = state;
  return est;
}

inline double lyapunov(const MarketParams& p, const PredictorPair& predictors, Mode mode,
                       double x0, double m1, std::int64_t length, std::int64_t transient,
                       double d0 = 1e-8) {
  const auto warm = simulate(p, predictors, mode, x0, m1, 0, transient);
  if (warm.diverged) return kNaN;
  return lyapunov_from(warm.final_state, p, predictors, mode, length, d0).exponent;
}

// ---------------------------------------------------------------------------
// Initial conditions.

enum class IcFamily { PositiveSmall, NegativeSmall, FarPositive, FarNegative, Continuation };

inline std::string_view to_string(IcFamily f) {
  switch (f) {
    case IcFamily::PositiveSmall: return "positive-small";
    case IcFamily::NegativeSmall: return "negative-small";
    case IcFamily::FarPositive: return "far-positive";
    case IcFamily::FarNegative: return "far-negative";
    case IcFamily::Continuation: return "continuation";
  }
  return "?";
}

inline std::optional<IcFamily> parse_ic_family(std::string_view s) {
  for (auto f : {IcFamily::PositiveSmall, IcFamily::NegativeSmall, IcFamily::FarPositive,
                 IcFamily::FarNegative, IcFamily::Continuation})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

/// Uniform draw in [0, 1) from the top 53 bits, identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Opening deviation for a family: small is |x| in [1e-3, 1e-2], far is
/// |x| in [0.5, 1.5]. The stream is seeded with seed + index.
inline double draw_initial_deviation(IcFamily family, std::uint64_t seed, std::uint64_t index) {
  std::mt19937_64 rng(seed + index);
  const double u = unit_uniform(rng);
  switch (family) {
    case IcFamily::PositiveSmall: return 1e-3 + 9e-3 * u;
    case IcFamily::NegativeSmall: return -(1e-3 + 9e-3 * u);
    case IcFamily::FarPositive: return 0.5 + u;
    case IcFamily::FarNegative: return -(0.5 + u);
    case IcFamily::Continuation: break;
  }
  throw ParameterError("ic_family", "continuation has no direct initial deviation");
}

// ---------------------------------------------------------------------------
// Beta scans.

struct ScanSettings {
  std::int64_t length = 100000;     ///< T
  std::int64_t transient = 10000;   ///< T0
  std::size_t samples = 500;
  std::uint64_t seed = 0;
  double m1 = 0.0;
  double d0 = 1e-8;
  bool with_lyapunov = true;
  /// Family used for the first grid point of a continuation run and after
  /// any point that diverged.
  IcFamily continuation_start = IcFamily::PositiveSmall;
  /// When set, the first continuation point starts here instead.
  std::optional<MarketState> continuation_state;
  unsigned threads = 0;  ///< 0: hardware concurrency
};

struct ScanPoint {
  double beta = kNaN;
  std::vector<double> samples;
  double lyapunov = kNaN;
  int attractor_id = 0;  ///< -1 when no attractor was recorded
  IcFamily family = IcFamily::PositiveSmall;
  ScanStatus status = ScanStatus::Ok;
  double x0 = kNaN;
  MarketState final_state;
  double max_residual = 0.0;  ///< largest clearing residual over all simulated periods
};

namespace detail {

inline ScanPoint scan_one(MarketParams p, const PredictorPair& predictors, Mode mode, double beta,
                          const MarketState& start, IcFamily family, const ScanSettings& cfg) {
  p.beta = beta;
  ScanPoint pt;
  pt.beta = beta;
  pt.family = family;
  pt.x0 = start.last();
  try {
    const auto warm = simulate_from(start, p, predictors, mode, 0, cfg.transient);
    pt.max_residual = warm.max_residual;
    if (warm.diverged) {
      pt.status = ScanStatus::Divergent;
    } else if (cfg.with_lyapunov) {
      auto est = lyapunov_from(warm.final_state, p, predictors, mode, cfg.length, cfg.d0,
                               cfg.samples);
      pt.status = est.status;
      pt.max_residual = std::max(pt.max_residual, est.max_residual);
      pt.lyapunov = est.exponent;
      pt.samples = std::move(est.tail);
      pt.final_state = est.final_state;
    } else {
      const auto rec = simulate_from(warm.final_state, p, predictors, mode, cfg.length, 0);
      pt.status = rec.diverged ? ScanStatus::Divergent : ScanStatus::Ok;
      pt.max_residual = std::max(pt.max_residual, rec.max_residual);
      const std::size_t n = rec.steps.size();
      for (std::size_t i = n - std::min(n, cfg.samples); i < n; ++i)
        pt.samples.push_back(rec.steps[i].x);
      pt.final_state = rec.final_state;
    }
  } catch (const DomainError&) {
    pt.status = ScanStatus::DomainError;
  }
  if (pt.status != ScanStatus::Ok) {
    pt.samples.clear();
    pt.lyapunov = kNaN;
    pt.attractor_id = -1;
  }
  return pt;
}

inline MarketState fresh_start(const MarketParams& p, const PredictorPair& predictors,
                               IcFamily family, const ScanSettings& cfg, std::size_t index) {
  const double x0 = draw_initial_deviation(family, cfg.seed, index);
  return MarketState::opening(x0, cfg.m1, {p.s, p.s}, predictors.lag());
}

}  // namespace detail

/// Scans `grid` with one initial-condition family. Independent families
/// run in parallel over grid points; continuation runs sequentially in grid
/// order, reusing each point's final state as the next starting state.
inline std::vector<ScanPoint> bifurcation_scan(const MarketParams& p,
                                               const PredictorPair& predictors, Mode mode,
                                               const std::vector<double>& grid, IcFamily family,
                                               const ScanSettings& cfg = {}) {
  validate(p);
  const bool ascending = std::is_sorted(grid.begin(), grid.end());
  const bool descending = std::is_sorted(grid.rbegin(), grid.rend());
  if (!ascending && !descending) throw ParameterError("beta_grid", "grid must be sorted");
  for (double b : grid)
    if (!(b >= 0.0) || !std::isfinite(b)) throw ParameterError("beta", "grid values must be >= 0");

  std::vector<ScanPoint> out(grid.size());
  if (grid.empty()) return out;

  if (family == IcFamily::Continuation) {
    std::optional<MarketState> carry = cfg.continuation_state;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const MarketState start =
          carry ? *carry : detail::fresh_start(p, predictors, cfg.continuation_start, cfg, i);
      out[i] = detail::scan_one(p, predictors, mode, grid[i], start, family, cfg);
      if (out[i].status == ScanStatus::Ok) {
        carry = out[i].final_state;
      } else {
        carry.reset();
      }
    }
    return out;
  }

  unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, grid.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        out[i] = detail::scan_one(p, predictors, mode, grid[i],
                                  detail::fresh_start(p, predictors, family, cfg, i), family, cfg);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// L1 distance between normalized histograms of two sample sets on common bins.
inline double histogram_distance(std::span<const double> a, std::span<const double> b,
                                 int bins = 50) {
  if (a.empty() || b.empty()) return a.empty() && b.empty() ? 0.0 : 2.0;
  double lo = a[0], hi = a[0];
  for (auto s : {a, b})
    for (double x : s) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  // both sets inside one narrow band: the same point attractor
  if (hi - lo < 1e-6 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)))) return 0.0;
  std::vector<double> ha(static_cast<std::size_t>(bins), 0.0), hb = ha;
  auto fill = [&](std::span<const double> s, std::vector<double>& h) {
    for (double x : s) {
      int k = hi > lo ? static_cast<int>((x - lo) / (hi - lo) * bins) : 0;
      h[static_cast<std::size_t>(std::clamp(k, 0, bins - 1))] += 1.0 / static_cast<double>(s.size());
    }
  };
  fill(a, ha);
  fill(b, hb);
  double d = 0.0;
  for (std::size_t k = 0; k < ha.size(); ++k) d += std::abs(ha[k] - hb[k]);
  return d;
}

/// Runs every family over the grid and numbers distinct attractors per beta.
/// Two points share an id when their histogram distance is below `tolerance`.
/// Result is ordered by grid index, then by family order.
inline std::vector<ScanPoint> scan_families(const MarketParams& p, const PredictorPair& predictors,
                                            Mode mode, const std::vector<double>& grid,
                                            const std::vector<IcFamily>& families,
                                            const ScanSettings& cfg = {},
                                            double tolerance = 1e-3) {
  std::vector<std::vector<ScanPoint>> runs;
  for (auto f : families) runs.push_back(bifurcation_scan(p, predictors, mode, grid, f, cfg));
  std::vector<ScanPoint> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<const ScanPoint*> reps;
    for (auto& run : runs) {
      ScanPoint pt = run[i];
      if (pt.status == ScanStatus::Ok) {
        pt.attractor_id = -1;
        for (std::size_t k = 0; k < reps.size(); ++k)
          if (histogram_distance(pt.samples, reps[k]->samples) < tolerance) {
            pt.attractor_id = static_cast<int>(k);
            break;
          }
        if (pt.attractor_id < 0) {
          pt.attractor_id = static_cast<int>(reps.size());
          reps.push_back(&run[i]);
        }
      }
      out.push_back(std::move(pt));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attractor statistics.

struct AttractorStats {
  double max_dev = kNaN;
  double min_dev = kNaN;
  double mean_dev = kNaN;
  std::size_t peak_count = 0;
  double mean_inter_peak = kNaN;  ///< NaN with fewer than two peaks

  double amplitude() const { return std::max(std::abs(max_dev), std::abs(min_dev)); }
};

/// Peaks are interior local maxima of |x| reaching `peak_fraction` of max |x|.
inline AttractorStats attractor_stats(std::span<const double> xs, double peak_fraction = 0.5) {
  if (xs.empty()) throw ParameterError("record", "attractor statistics need a non-empty orbit");
  if (!(peak_fraction >= 0.0 && peak_fraction <= 1.0))
    throw ParameterError("peak_fraction", "must lie in [0, 1]");
  AttractorStats st;
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  st.min_dev = *lo;
  st.max_dev = *hi;
  double sum = 0.0;
  for (double x : xs) sum += x;
  st.mean_dev = sum / static_cast<double>(xs.size());

  const double level = peak_fraction * st.amplitude();
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
    const double a = std::abs(xs[i]);
    if (a > 0.0 && a >= level && a > std::abs(xs[i - 1]) && a >= std::abs(xs[i + 1]))
      peaks.push_back(i);
  }
  st.peak_count = peaks.size();
  if (peaks.size() >= 2)
    st.mean_inter_peak = static_cast<double>(peaks.back() - peaks.front()) /
                         static_cast<double>(peaks.size() - 1);
  return st;
}

inline std::vector<double> deviations(const OrbitRecord& rec) {
  std::vector<double> xs;
  xs.reserve(rec.steps.size());
  for (const auto& o : rec.steps) xs.push_back(o.x);
  return xs;
}

inline AttractorStats attractor_stats(const OrbitRecord& rec, double peak_fraction = 0.5) {
  const auto xs = deviations(rec);
  return attractor_stats(std::span<const double>(xs), peak_fraction);
}

}  // namespace ared
