#include <cstdio>

#include "ared/cli.hpp"

int main() {
  ared::MarketParams p;
  const double pbar = ared::fundamental_price(p);
  const ared::PredictorPair pair{ared::Predictor::fundamental(0.0, p.C1),
                                 ared::Predictor::sroc(2, 10.0, pbar, p.C2)};
  for (double beta : {0.5, 1.4, 2.5, 4.5}) {
    p.beta = beta;
    const auto c = ared::compare_modes(p, pair, 0.1, 0.0, 20000, 10000);
    std::printf("beta=%.2f  amplitude ratio %.3f  peak frequency ratio %.3f\n", beta,
                c.amplitude_ratio(), c.peak_frequency_ratio());
  }
}
