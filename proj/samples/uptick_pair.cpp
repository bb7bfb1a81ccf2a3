// Paired run below the fundamental price: the uptick rule lifts the floor.
#include <cstdio>

#include "ared/cli.hpp"

int main() {
  ared::MarketParams p;
  p.beta = 4.0;
  const auto pair = ared::chartist_pair(0.0, 1.2, p);
  for (double x0 : {-0.1, -0.5, -1.0}) {
    const auto c = ared::compare_modes(p, pair, x0, 0.0, 20000, 10000);
    std::printf("x0=%5.2f  min constrained %.4f  unconstrained %.4f\n", x0, c.constrained.min_dev,
                c.unconstrained.min_dev);
  }
}
