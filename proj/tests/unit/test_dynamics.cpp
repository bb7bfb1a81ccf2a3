#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

#include "ared/dynamics.hpp"
#include "ared/equilibria.hpp"
#include "test_support.hpp"

using namespace ared;

namespace {

MarketParams at_beta(double beta) {
  MarketParams p;
  p.beta = beta;
  return p;
}

}  // namespace

TEST(Simulate, ConvergesBelowLimitPoint) {
  const auto p = at_beta(0.5);
  const auto rec = simulate(p, chartist_pair(0.0, 1.2, p), Mode::Constrained, 0.5, 0.0, 100, 2000);
  ASSERT_EQ(rec.steps.size(), 100u);
  EXPECT_FALSE(rec.diverged);
  for (const auto& o : rec.steps) EXPECT_LT(std::abs(o.x), 1e-12);
  EXPECT_NEAR(rec.final_state.m, fundamental_fraction_difference(p), 1e-12);
}

TEST(Simulate, FundamentalStartStaysPut) {
  const auto p = at_beta(3.0);
  const auto pair = chartist_pair(0.0, 1.2, p);
  for (Mode mode : {Mode::Constrained, Mode::Unconstrained}) {
    const auto rec = simulate(p, pair, mode, 0.0, fundamental_fraction_difference(p), 50, 0);
    for (const auto& o : rec.steps) EXPECT_EQ(o.x, 0.0);
  }
}

TEST(Simulate, ConstrainedPositiveAttractorAtThree) {
  const auto p = at_beta(3.0);
  const auto pair = chartist_pair(0.0, 1.2, p);
  for (double x0 : {0.1, 0.5, 1.0}) {
    const auto c = attractor_stats(simulate(p, pair, Mode::Constrained, x0, 0.0, 2000, 20000));
    const auto u = attractor_stats(simulate(p, pair, Mode::Unconstrained, x0, 0.0, 2000, 20000));
    EXPECT_GT(c.min_dev, 0.0) << x0;
    EXPECT_GT(u.min_dev, 0.0) << x0;
    EXPECT_GT(c.max_dev, u.max_dev) << x0;
  }
}

TEST(Simulate, RecordLayout) {
  const auto p = at_beta(2.0);
  const auto rec = simulate(p, chartist_pair(0.0, 1.2, p), Mode::Constrained, 0.2, 0.1, 7, 3);
  EXPECT_EQ(rec.steps.size(), 7u);
  EXPECT_EQ(rec.transient, 3);
  EXPECT_EQ(rec.x0, 0.2);
  EXPECT_EQ(rec.m1, 0.1);
  EXPECT_EQ(rec.final_state.period, 10);
  EXPECT_EQ(rec.final_state.last(), rec.steps.back().x);
  const auto empty = simulate(p, chartist_pair(0.0, 1.2, p), Mode::Constrained, 0.2, 0.1, 0, 0);
  EXPECT_TRUE(empty.steps.empty());
}

TEST(Simulate, Deterministic) {
  const double pbar = fundamental_price(at_beta(4.5));
  const PredictorPair pair{Predictor::fundamental(0.0), Predictor::sroc(2, 10.0, pbar)};
  const auto p = at_beta(4.5);
  const auto a = deviations(simulate(p, pair, Mode::Constrained, 0.1, 0.0, 500, 500));
  const auto b = deviations(simulate(p, pair, Mode::Constrained, 0.1, 0.0, 500, 500));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(std::bit_cast<std::uint64_t>(a[i]),
                                                      std::bit_cast<std::uint64_t>(b[i]));
}

TEST(Simulate, Errors) {
  const auto p = at_beta(1.0);
  const auto pair = chartist_pair(0.0, 1.2, p);
  EXPECT_THROW(simulate(p, pair, Mode::Constrained, -9.0, 0.0, 1, 0), ParameterError);
  EXPECT_THROW(simulate(p, pair, Mode::Constrained, 0.1, 1.0, 1, 0), ParameterError);
  EXPECT_THROW(simulate(p, pair, Mode::Constrained, 0.1, 0.0, -1, 0), ParameterError);
  EXPECT_THROW(simulate(p, pair, Mode::Constrained, 0.1, 0.0, 1, -1), ParameterError);
  EXPECT_THROW(simulate(p, pair, Mode::Unconstrained, -8.9, -0.99, 5, 0), DomainError);
}

TEST(Simulate, DivergenceStopsEarly) {
  const auto p = at_beta(0.0);
  const auto rec = simulate(p, chartist_pair(0.0, 3.0, p), Mode::Unconstrained, 0.1, 0.0, 1000, 0);
  EXPECT_TRUE(rec.diverged);
  EXPECT_LT(rec.steps.size(), 1000u);
  EXPECT_GT(std::abs(rec.steps.back().x), kDivergenceFactor * fundamental_price(p));
}

TEST(Lyapunov, FixedPointMatchesDominantEigenvalue) {
  const auto p = at_beta(0.5);
  const auto pair = chartist_pair(0.0, 1.2, p);
  const double expected = std::log(fundamental_equilibrium(p, pair).spectral_radius());
  EXPECT_NEAR(lyapunov(p, pair, Mode::Unconstrained, 0.1, 0.0, 2000, 100), expected, 5e-3);
}

TEST(Lyapunov, Signs) {
  const auto p = at_beta(4.0);
  const auto pair = chartist_pair(0.0, 1.2, p);
  EXPECT_GT(lyapunov(p, pair, Mode::Constrained, -0.1, 0.0, 20000, 1000), 0.05);
  // quasi-periodic beyond the minus-branch crossing
  EXPECT_LT(std::abs(lyapunov(p, pair, Mode::Unconstrained, -0.1, 0.0, 20000, 1000)), 0.01);
}

TEST(Lyapunov, Errors) {
  const auto p = at_beta(1.0);
  const auto st = MarketState::opening(0.1, 0.0, {p.s, p.s}, 1);
  EXPECT_THROW(lyapunov_from(st, p, chartist_pair(0.0, 1.2, p), Mode::Constrained, 10, 0.0),
               ParameterError);
}

TEST(InitialConditions, Draws) {
  std::mt19937_64 golden(5489);
  EXPECT_EQ(golden(), 14514284786278117030ULL);
  const double u = static_cast<double>(14514284786278117030ULL >> 11) * 0x1.0p-53;
  EXPECT_EQ(draw_initial_deviation(IcFamily::PositiveSmall, 5489, 0), 1e-3 + 9e-3 * u);
  EXPECT_EQ(draw_initial_deviation(IcFamily::FarNegative, 5000, 489), -(0.5 + u));
  for (std::uint64_t i = 0; i < 200; ++i) {
    const double a = draw_initial_deviation(IcFamily::NegativeSmall, 7, i);
    EXPECT_LE(a, -1e-3);
    EXPECT_GT(a, -1e-2);
    const double b = draw_initial_deviation(IcFamily::FarPositive, 7, i);
    EXPECT_GE(b, 0.5);
    EXPECT_LT(b, 1.5);
  }
  EXPECT_THROW(draw_initial_deviation(IcFamily::Continuation, 1, 0), ParameterError);
  EXPECT_EQ(parse_ic_family("far-negative"), IcFamily::FarNegative);
  EXPECT_FALSE(parse_ic_family("far").has_value());
}

TEST(Scan, EdgeCases) {
  const auto p = at_beta(0.0);
  const auto pair = chartist_pair(0.0, 1.2, p);
  ScanSettings cfg;
  cfg.length = 200;
  cfg.transient = 200;
  cfg.samples = 50;
  EXPECT_TRUE(bifurcation_scan(p, pair, Mode::Constrained, {}, IcFamily::PositiveSmall, cfg).empty());
  EXPECT_THROW(bifurcation_scan(p, pair, Mode::Constrained, {1.0, 0.5, 2.0},
                                IcFamily::PositiveSmall, cfg),
               ParameterError);
  EXPECT_THROW(bifurcation_scan(p, pair, Mode::Constrained, {-1.0}, IcFamily::PositiveSmall, cfg),
               ParameterError);
  const auto one = bifurcation_scan(p, pair, Mode::Constrained, {0.5}, IcFamily::PositiveSmall, cfg);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].status, ScanStatus::Ok);
  EXPECT_EQ(one[0].samples.size(), 50u);
  EXPECT_LT(one[0].lyapunov, 0.0);
  const auto down =
      bifurcation_scan(p, pair, Mode::Constrained, {1.0, 0.5}, IcFamily::Continuation, cfg);
  EXPECT_EQ(down.size(), 2u);
}

TEST(Scan, DivergentPointsAreFlagged) {
  const auto p = at_beta(0.0);
  ScanSettings cfg;
  cfg.length = 200;
  cfg.transient = 200;
  const auto pts = bifurcation_scan(p, chartist_pair(0.0, 3.0, p), Mode::Unconstrained, {0.0, 0.1},
                                    IcFamily::FarPositive, cfg);
  for (const auto& pt : pts) {
    EXPECT_EQ(pt.status, ScanStatus::Divergent);
    EXPECT_EQ(pt.attractor_id, -1);
    EXPECT_TRUE(pt.samples.empty());
    EXPECT_TRUE(std::isnan(pt.lyapunov));
  }
}

TEST(Scan, ParallelEqualsSerial) {
  const auto p = at_beta(0.0);
  const auto pair = chartist_pair(0.0, 1.2, p);
  ScanSettings cfg;
  cfg.length = 300;
  cfg.transient = 300;
  cfg.samples = 20;
  std::vector<double> grid;
  for (int i = 0; i < 12; ++i) grid.push_back(2.0 + 0.2 * i);
  cfg.threads = 1;
  const auto serial = bifurcation_scan(p, pair, Mode::Constrained, grid, IcFamily::FarPositive, cfg);
  cfg.threads = 4;
  const auto parallel = bifurcation_scan(p, pair, Mode::Constrained, grid, IcFamily::FarPositive, cfg);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(serial[i].samples, parallel[i].samples);
    EXPECT_EQ(serial[i].x0, parallel[i].x0);
  }
}

TEST(Scan, FamiliesShareConvergedAttractor) {
  const auto p = at_beta(0.0);
  ScanSettings cfg;
  cfg.length = 2000;
  cfg.transient = 2000;
  cfg.samples = 100;
  const auto pts = scan_families(p, chartist_pair(0.0, 1.2, p), Mode::Constrained, {0.5, 1.0},
                                 {IcFamily::PositiveSmall, IcFamily::NegativeSmall,
                                  IcFamily::FarPositive},
                                 cfg);
  ASSERT_EQ(pts.size(), 6u);
  for (const auto& pt : pts) EXPECT_EQ(pt.attractor_id, 0);
}

TEST(Scan, FamiliesSeparateCoexistingAttractors) {
  // at beta = 3 the constrained orbit from far-negative starts settles away
  // from the positive attractor reached by far-positive starts
  const auto p = at_beta(0.0);
  ScanSettings cfg;
  cfg.length = 2000;
  cfg.transient = 20000;
  cfg.samples = 500;
  cfg.with_lyapunov = false;
  const auto pts = scan_families(p, chartist_pair(0.0, 1.2, p), Mode::Constrained, {3.0},
                                 {IcFamily::FarPositive, IcFamily::FarNegative}, cfg);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0].attractor_id, 0);
  EXPECT_EQ(pts[1].attractor_id, 1);
}

TEST(HistogramDistance, Cases) {
  const std::vector<double> a{0.0, 1.0, 2.0}, b{2.0, 1.0, 0.0}, c{5.0, 5.0, 5.0};
  EXPECT_EQ(histogram_distance(a, b), 0.0);
  EXPECT_NEAR(histogram_distance(a, c), 2.0, 1e-15);
  EXPECT_EQ(histogram_distance({}, {}), 0.0);
  EXPECT_EQ(histogram_distance(a, {}), 2.0);
  const std::vector<double> tiny_pos{1e-40, 2e-40}, tiny_neg{-1e-40, -3e-40};
  EXPECT_EQ(histogram_distance(tiny_pos, tiny_neg), 0.0);
}

TEST(AttractorStats, Cases) {
  const std::vector<double> xs{0.0, 1.0, 0.0, -2.0, 0.0, 1.0, 0.0};
  const auto st = attractor_stats(xs);
  EXPECT_EQ(st.min_dev, -2.0);
  EXPECT_EQ(st.max_dev, 1.0);
  EXPECT_EQ(st.mean_dev, 0.0);
  EXPECT_EQ(st.amplitude(), 2.0);
  EXPECT_EQ(st.peak_count, 3u);
  EXPECT_EQ(st.mean_inter_peak, 2.0);
  const auto high = attractor_stats(xs, 1.0);
  EXPECT_EQ(high.peak_count, 1u);
  EXPECT_TRUE(std::isnan(high.mean_inter_peak));
  const std::vector<double> flat(10, 0.0);
  EXPECT_EQ(attractor_stats(flat).peak_count, 0u);
  EXPECT_THROW(attractor_stats(std::vector<double>{}), ParameterError);
  EXPECT_THROW(attractor_stats(xs, 1.5), ParameterError);
}

TEST(Properties, OrbitsRespectClearingAndBounds) {
  proptest::Gen gen(51);
  for (int i = 0; i < 200; ++i) {
    auto p = gen.params();
    p.beta = gen.uniform(0.0, 6.0);
    const double pbar = fundamental_price(p);
    PredictorPair pair{Predictor::fundamental(gen.uniform(0, 0.99), p.C1),
                       Predictor::chartist(gen.uniform(1.01, 1.6))};
    if (gen.coin()) pair.second = Predictor::sroc(2, gen.uniform(2, 20), pbar);
    const Mode mode = gen.coin() ? Mode::Constrained : Mode::Unconstrained;
    try {
      const auto rec = simulate(p, pair, mode, gen.uniform(-0.5, 0.5), gen.uniform(-0.9, 0.9), 300, 0);
      for (const auto& o : rec.steps) {
        ASSERT_LT(clearing_residual(o, p.s), kClearingTolerance);
        ASSERT_GT(o.x, -pbar);
        ASSERT_LT(std::abs(o.m), 1.0);
        if (mode == Mode::Constrained) {
          ASSERT_GE(o.demands[0], 0.0 - (o.region == Region::U ? HUGE_VAL : 0.0));
          ASSERT_GE(o.demands[1], 0.0 - (o.region == Region::U ? HUGE_VAL : 0.0));
        }
      }
    } catch (const DomainError&) {
      // prices may legitimately leave the domain for aggressive draws
    }
  }
}
