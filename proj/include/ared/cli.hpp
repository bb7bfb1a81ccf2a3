#pragma once

// Subcommands simulate, bifurcation, equilibria and compare.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure
// (domain error, I/O, internal). Failures print one line to stderr:
//   error=config key=<key> reason="<text>"
//   error=domain period=<n> reason="<text>"
//   error=io path=<path> reason="<text>"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ared/io.hpp"

namespace ared {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

class IoError : public std::runtime_error {
public:
  IoError(std::string path, const std::string& reason)
      : std::runtime_error(reason), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

struct CliOptions {
  std::string out;  ///< empty: standard output
  bool svg = false;
};

/// `stem.ext` -> `stem_<mode>.ext` when both modes are written.
inline std::string output_path(const std::string& base, Mode mode, bool both) {
  if (!both) return base;
  const std::filesystem::path p(base);
  std::string name = p.stem().string() + "_" + std::string(to_string(mode)) + p.extension().string();
  return (p.parent_path() / name).string();
}

inline std::string with_extension(const std::string& base, std::string_view ext) {
  std::filesystem::path p(base);
  p.replace_extension(ext);
  return p.string();
}

/// Writes through `emit` to `path`, or to `fallback` when path is empty.
template <class Emit>
void write_output(const std::string& path, std::ostream& fallback, std::ostream& log, Emit emit) {
  if (path.empty()) {
    emit(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for writing");
  emit(f);
  f.flush();
  if (!f) throw IoError(path, "write failed");
  log << "wrote " << path << '\n';
}

inline std::array<double, 2> initial_demands(const RunConfig& c) {
  return {initial_demand(c, 0), initial_demand(c, 1)};
}

// ---------------------------------------------------------------------------

inline void cmd_simulate(const RunConfig& c, const CliOptions& o, std::ostream& out) {
  const bool both = c.mode == ModeSelection::Both;
  if (both && o.out.empty()) throw ParameterError("out", "mode=both needs --out");
  const auto predictors = build_predictors(c);
  for (Mode mode : modes_of(c.mode)) {
    const auto rec =
        simulate(c.params, predictors, mode, c.x0, c.m1, c.T, c.T0, initial_demands(c));
    write_output(o.out.empty() ? "" : output_path(o.out, mode, both), out, out,
                 [&](std::ostream& f) { write_simulation_csv(f, c, rec); });
  }
}

inline std::vector<ScanPoint> run_scan(const RunConfig& c, const PredictorPair& predictors,
                                       Mode mode) {
  const auto grid = beta_grid(c);
  const auto settings = scan_settings(c);
  if (c.ic_families.size() == 1)
    return bifurcation_scan(c.params, predictors, mode, grid, c.ic_families.front(), settings);
  return scan_families(c.params, predictors, mode, grid, c.ic_families, settings);
}

inline void cmd_bifurcation(const RunConfig& c, const CliOptions& o, std::ostream& out) {
  const bool both = c.mode == ModeSelection::Both;
  if (both && o.out.empty()) throw ParameterError("out", "mode=both needs --out");
  if (o.svg && o.out.empty()) throw ParameterError("out", "--svg needs --out");
  const auto predictors = build_predictors(c);
  for (Mode mode : modes_of(c.mode)) {
    const auto points = run_scan(c, predictors, mode);
    const std::string path = o.out.empty() ? "" : output_path(o.out, mode, both);
    write_output(path, out, out, [&](std::ostream& f) { write_bifurcation_csv(f, c, mode, points); });
    if (o.svg)
      write_output(with_extension(path, ".svg"), out, out, [&](std::ostream& f) {
        write_bifurcation_svg(f, points, std::string(to_string(mode)) + " market");
      });
  }
}

// ---------------------------------------------------------------------------
// Equilibria report.

struct ReportItem {
  std::string item;
  double value = kNaN;
  std::string status;
  std::string note;
};

inline std::string yes_no(bool b) { return b ? "yes" : "no"; }

inline void add_equilibrium(std::vector<ReportItem>& items, const EquilibriumReport& r) {
  const std::string k(to_string(r.kind));
  const std::string status(to_string(r.status));
  items.push_back({k + ".x_bar", r.x_bar, status, ""});
  items.push_back({k + ".m_bar", r.m_bar, status, ""});
  if (!r.defined()) return;
  items.push_back({k + ".z1", r.demands[0], status, ""});
  items.push_back({k + ".z2", r.demands[1], status, ""});
  std::string moduli;
  for (const auto& z : r.eigenvalues) {
    if (!moduli.empty()) moduli += ' ';
    moduli += format_double(std::abs(z));
  }
  const double rho = r.spectral_radius();
  items.push_back({k + ".spectral_radius", rho, rho < 1.0 ? "stable" : "unstable",
                   "eigenvalue moduli: " + moduli});
}

inline std::vector<ReportItem> equilibria_report(const RunConfig& c) {
  std::vector<ReportItem> items;
  const auto& p = c.params;
  const auto predictors = build_predictors(c);
  const double pbar = fundamental_price(p);
  items.push_back({"pbar", pbar, "ok", "(ybar - a*sigma2*s)/(R - 1)"});
  items.push_back({"beta", p.beta, "ok", "intensity of choice used for equilibria"});
  add_equilibrium(items, fundamental_equilibrium(p, predictors));

  const auto unique = uniqueness_check(predictors, p.R, pbar, default_probe_grid(pbar));
  items.push_back({"uniqueness", kNaN, unique.hypothesis_holds ? "holds" : "fails",
                   unique.hypothesis_holds
                       ? "unique fixed point (uniqueness hypothesis holds on probe grid)"
                       : "slopes f(x)/x straddle R on probe grid; other fixed points possible"});

  if (c.type2 == "chartist") {
    const auto th = chartist_thresholds(p, c.v, c.g);
    if (th.unbounded_warning)
      items.push_back({"warning", kNaN, "unbounded", "g > R^2: dynamics may be unbounded"});
    if (th.regime == ChartistRegime::GloballyStable) {
      items.push_back({"verdict", kNaN, "globally-stable", "fundamental globally stable (g <= R)"});
      return items;
    }
    auto flagged = [&](const char* name, const Flagged& f, const char* formula) {
      items.push_back({name, f.value, f.applicable ? "applicable" : "n/a", formula});
    };
    flagged("beta_TR", th.beta_TR, "ln((R-v)/(g-R))/C");
    flagged("beta_LP", th.beta_LP, "beta_TR/(1 + a*sigma2*s^2*(g-v)/(4C(R-1)))");
    flagged("beta_BC_plus", th.beta_BC_plus, "beta_TR/(1 + a*sigma2*s^2*(g-v)(1-v)/(C(R-v)^2))");
    flagged("beta_BC_minus", th.beta_BC_minus, "beta_TR/(1 - a*sigma2*s^2*(g-v)(g-1)/(C(g-R)^2))");
    flagged("x_LP", th.x_LP, "a*sigma2*s/(2(R-1))");
    flagged("x_BC_plus", th.x_BC_plus, "a*sigma2*s/(R-v)");
    flagged("x_BC_minus", th.x_BC_minus, "-a*sigma2*s/(g-R)");
    flagged("s_BC_minus", th.s_BC_minus, "sqrt(C(g-R)^2/(a*sigma2*(g-v)(g-1)))");
    if (p.s > 0.0)
      items.push_back({"ns_plus_reference", ns_plus_reference_beta(p, c.v, c.g), "ok",
                       "(R-1)^2/(a*sigma2*s^2*(g-R)(R-v)); plus-branch loses stability before "
                       "beta_TR iff this is below beta_TR"});

    auto [plus, minus] = nonfundamental_equilibria(p, c.v, c.g);
    add_equilibrium(items, plus);
    add_equilibrium(items, minus);

    auto ns = [&](const char* name, Branch b, const Flagged& from) {
      if (!from.applicable) return;
      const auto r = ns_bifurcation_search(p, c.v, c.g, b, from.value, from.value + 10.0);
      items.push_back({name, r.beta, r.found ? "found" : "not-found",
                       r.found ? "numeric; admissible at crossing: " +
                                     yes_no(r.admissible_at_crossing) +
                                     "; complex pair: " + yes_no(r.complex_pair)
                               : "no stability loss within 10 of the branch origin"});
    };
    ns("beta_NS_plus", Branch::Plus, th.beta_LP);
    ns("beta_NS_minus", Branch::Minus, th.beta_TR);

    int index = 0;
    for (const auto& fp : branch_fixed_points(p, c.v, c.g)) {
      const std::string k = "branch_" + std::string(to_string(fp.region)) + "_" + std::to_string(index++);
      const std::string status = fp.consistent ? "consistent" : "inconsistent";
      items.push_back({k + ".x", fp.x, status, std::string(BranchFixedPoint::tag)});
      items.push_back({k + ".m", fp.m, status, std::string(BranchFixedPoint::tag)});
    }
  } else if (c.type2 == "roc" || c.type2 == "sroc") {
    const double ns = roc_ns_threshold(p);
    items.push_back({"beta_NS", ns, std::isfinite(ns) ? "applicable" : "never",
                     "ln(R/(2-R))/C; fundamental steady state loses stability via a complex pair"});
    if (c.L == 2 && std::isfinite(ns)) {
      const auto loss = fundamental_stability_loss(p, predictors, 0.0, 2.0 * ns + 1.0);
      items.push_back({"beta_NS_numeric", loss.beta, loss.found ? "found" : "not-found",
                       "bisection on finite-difference Jacobian eigenvalue moduli"});
    }
  }
  return items;
}

inline std::string csv_quote(const std::string& s) {
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

inline void cmd_equilibria(const RunConfig& c, const CliOptions& o, std::ostream& out) {
  const auto items = equilibria_report(c);
  for (const auto& it : items) {
    out << it.item;
    if (!std::isnan(it.value)) out << " = " << format_double(it.value);
    out << "  [" << it.status << "]";
    if (!it.note.empty()) out << "  " << it.note;
    out << '\n';
  }
  if (o.out.empty()) return;
  write_output(o.out, out, out, [&](std::ostream& f) {
    write_config_echo(f, c, std::nullopt);
    f << "item,value,status,note\n";
    for (const auto& it : items)
      f << it.item << ',' << format_double(it.value) << ',' << it.status << ','
        << csv_quote(it.note) << '\n';
  });
}

// ---------------------------------------------------------------------------
// Paired constrained/unconstrained comparison.

struct Comparison {
  AttractorStats constrained, unconstrained;
  std::int64_t length = 0;

  double min_dev_delta() const { return constrained.min_dev - unconstrained.min_dev; }
  double max_dev_delta() const { return constrained.max_dev - unconstrained.max_dev; }
  double amplitude_ratio() const { return constrained.amplitude() / unconstrained.amplitude(); }
  double peak_frequency_ratio() const {
    return static_cast<double>(constrained.peak_count) /
           static_cast<double>(unconstrained.peak_count);
  }
};

inline Comparison compare_modes(const MarketParams& p, const PredictorPair& predictors, double x0,
                                double m1, std::int64_t length, std::int64_t transient,
                                double peak_fraction = 0.5,
                                std::optional<std::array<double, 2>> z0 = std::nullopt) {
  Comparison cmp;
  cmp.length = length;
  for (Mode mode : {Mode::Constrained, Mode::Unconstrained}) {
    const auto rec = simulate(p, predictors, mode, x0, m1, length, transient, z0);
    if (rec.diverged || rec.steps.empty())
      throw DomainError(std::string(to_string(mode)) + " orbit diverged or is empty");
    (mode == Mode::Constrained ? cmp.constrained : cmp.unconstrained) =
        attractor_stats(rec, peak_fraction);
  }
  return cmp;
}

inline void cmd_compare(const RunConfig& c, const CliOptions& o, std::ostream& out) {
  if (c.mode_explicit && c.mode != ModeSelection::Both)
    throw ParameterError("mode", "compare runs both modes; use mode=both or omit it");
  RunConfig echo = c;
  echo.mode = ModeSelection::Both;
  const auto cmp = compare_modes(c.params, build_predictors(c), c.x0, c.m1, c.T, c.T0,
                                 c.peak_fraction, initial_demands(c));
  const auto& a = cmp.constrained;
  const auto& b = cmp.unconstrained;
  const double T = static_cast<double>(cmp.length);
  write_output(o.out, out, out, [&](std::ostream& f) {
    write_config_echo(f, echo, std::nullopt);
    f << "metric,constrained,unconstrained,comparison,value\n";
    auto row = [&](const char* name, double x, double y, const char* kind, double v) {
      f << name << ',' << format_double(x) << ',' << format_double(y) << ',' << kind << ','
        << format_double(v) << '\n';
    };
    row("max_dev", a.max_dev, b.max_dev, "difference", cmp.max_dev_delta());
    row("min_dev", a.min_dev, b.min_dev, "difference", cmp.min_dev_delta());
    row("mean_dev", a.mean_dev, b.mean_dev, "difference", a.mean_dev - b.mean_dev);
    row("amplitude", a.amplitude(), b.amplitude(), "ratio", cmp.amplitude_ratio());
    row("peak_count", static_cast<double>(a.peak_count), static_cast<double>(b.peak_count),
        "difference", static_cast<double>(a.peak_count) - static_cast<double>(b.peak_count));
    row("peak_frequency", static_cast<double>(a.peak_count) / T,
        static_cast<double>(b.peak_count) / T, "ratio", cmp.peak_frequency_ratio());
    row("mean_inter_peak", a.mean_inter_peak, b.mean_inter_peak, "difference",
        a.mean_inter_peak - b.mean_inter_peak);
  });
}

// ---------------------------------------------------------------------------

inline std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
    else if (ch == '"') ch = '\'';
  return s;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ared: two-type asset market with an uptick rule"};
  app.require_subcommand(1);

  std::string config_path, mode_flag;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed_flag;
  CliOptions opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key=value configuration file");
    sub->add_option("--set", overrides, "override key=value (repeatable)");
    sub->add_option("--out", opts.out, "output path (default: standard output)");
    sub->add_option("--mode", mode_flag, "constrained | unconstrained | both");
    sub->add_option("--seed", seed_flag, "random seed for initial conditions");
    sub->add_flag("--svg", opts.svg, "also write an SVG next to the CSV (bifurcation)");
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "time series CSV of one orbit per mode");
  auto* bifurcation_cmd = app.add_subcommand("bifurcation", "beta scan CSV with Lyapunov exponents");
  auto* equilibria_cmd = app.add_subcommand("equilibria", "thresholds and steady states");
  auto* compare_cmd = app.add_subcommand("compare", "paired constrained/unconstrained statistics");
  for (auto* sub : {simulate_cmd, bifurcation_cmd, equilibria_cmd, compare_cmd}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error=usage reason=\"" << one_line(e.what()) << "\"\n";
    return kExitConfig;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ParameterError("config", "cannot read '" + config_path + "'");
      apply_config_text(cfg, f);
    }
    for (const auto& o : overrides) apply_assignment(cfg, o);
    if (!mode_flag.empty()) set_key(cfg, "mode", mode_flag);
    if (seed_flag) cfg.seed = *seed_flag;
    validate(cfg);
  } catch (const ParameterError& e) {
    err << "error=config key=" << e.key() << " reason=\"" << one_line(e.what()) << "\"\n";
    return kExitConfig;
  }

  try {
    if (simulate_cmd->parsed()) cmd_simulate(cfg, opts, out);
    else if (bifurcation_cmd->parsed()) cmd_bifurcation(cfg, opts, out);
    else if (equilibria_cmd->parsed()) cmd_equilibria(cfg, opts, out);
    else cmd_compare(cfg, opts, out);
  } catch (const ParameterError& e) {
    err << "error=config key=" << e.key() << " reason=\"" << one_line(e.what()) << "\"\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "error=domain period=" << e.period() << " reason=\"" << one_line(e.what()) << "\"\n";
    return kExitRuntime;
  } catch (const IoError& e) {
    err << "error=io path=" << e.path() << " reason=\"" << one_line(e.what()) << "\"\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error=internal reason=\"" << one_line(e.what()) << "\"\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace ared
