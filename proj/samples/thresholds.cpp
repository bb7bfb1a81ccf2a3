// Prints the analytic thresholds for a fundamentalist/chartist market over
// a few supply levels.
#include <cstdio>
#include <string>

#include "ared/equilibria.hpp"

int main() {
  ared::MarketParams p;
  std::printf("%6s %12s %12s %12s %12s\n", "s", "beta_LP", "beta_TR", "beta_BC+", "beta_BC-");
  for (double s : {0.0, 0.1, 0.2, 0.3}) {
    p.s = s;
    const auto t = ared::chartist_thresholds(p, 0.0, 1.2);
    auto show = [](const ared::Flagged& f) {
      char buf[32];
      if (f.applicable) std::snprintf(buf, sizeof buf, "%.6f", f.value);
      else std::snprintf(buf, sizeof buf, "n/a");
      return std::string(buf);
    };
    std::printf("%6.2f %12s %12s %12s %12s\n", s, show(t.beta_LP).c_str(), show(t.beta_TR).c_str(),
                show(t.beta_BC_plus).c_str(), show(t.beta_BC_minus).c_str());
  }
}
