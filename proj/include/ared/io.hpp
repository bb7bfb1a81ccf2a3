#pragma once

// Run configuration (flat key=value text), CSV and SVG emission, and the
// CSV reader used to replay simulation output through the clearing check.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ared/dynamics.hpp"
#include "ared/equilibria.hpp"

namespace ared {

/// Shortest form is not used on purpose: 17 significant digits round-trip
/// every double and keep files byte-stable.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || first == s.data() + s.size())
    return std::nullopt;
  return v;
}

template <class Int>
std::optional<Int> parse_integer(std::string_view s) {
  Int v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// ---------------------------------------------------------------------------
// Configuration.

enum class ModeSelection { Constrained, Unconstrained, Both };

struct RunConfig {
  MarketParams params{.R = 1.1, .a = 1.0, .sigma2 = 1.0, .s = 0.1, .ybar = 1.0,
                      .C1 = 1.0, .C2 = 0.0, .beta = 3.0};
  std::string type2 = "chartist";  ///< chartist | roc | sroc | fundamental
  double v = 0.0;                  ///< type-1 reversion coefficient
  double g = 1.2;                  ///< chartist extrapolation
  std::int64_t L = 2;              ///< ROC lag
  double alpha = 10.0;             ///< S-ROC confidence exponent
  double v2 = 0.5;                 ///< type-2 coefficient when type2 = fundamental

  ModeSelection mode = ModeSelection::Constrained;
  bool mode_explicit = false;
  std::int64_t T = 100000;
  std::int64_t T0 = 10000;
  double x0 = 0.1;
  double m1 = 0.0;
  std::optional<double> z10, z20;  ///< previous demands before period 1; s when unset
  double beta_min = 2.0, beta_max = 5.0, beta_step = 0.01;
  std::string beta_order = "ascending";
  std::vector<IcFamily> ic_families{IcFamily::PositiveSmall};
  IcFamily continuation_start = IcFamily::PositiveSmall;
  std::int64_t samples = 500;
  std::uint64_t seed = 1;
  double d0 = 1e-8;
  double peak_fraction = 0.5;
  std::int64_t threads = 0;
};

inline std::string_view to_string(ModeSelection m) {
  switch (m) {
    case ModeSelection::Constrained: return "constrained";
    case ModeSelection::Unconstrained: return "unconstrained";
    case ModeSelection::Both: return "both";
  }
  return "?";
}

inline std::vector<Mode> modes_of(ModeSelection m) {
  switch (m) {
    case ModeSelection::Constrained: return {Mode::Constrained};
    case ModeSelection::Unconstrained: return {Mode::Unconstrained};
    case ModeSelection::Both: return {Mode::Constrained, Mode::Unconstrained};
  }
  return {};
}

namespace detail {

inline double need_double(const std::string& key, std::string_view value) {
  auto v = parse_double(value);
  if (!v) throw ParameterError(key, "expected a number, got '" + std::string(value) + "'");
  return *v;
}

template <class Int>
Int need_integer(const std::string& key, std::string_view value) {
  auto v = parse_integer<Int>(value);
  if (!v) throw ParameterError(key, "expected an integer, got '" + std::string(value) + "'");
  return *v;
}

inline std::string join_families(const std::vector<IcFamily>& fs) {
  std::string out;
  for (auto f : fs) {
    if (!out.empty()) out += ',';
    out += to_string(f);
  }
  return out;
}

struct KeySpec {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<KeySpec>& key_table() {
  auto real = [](double RunConfig::*field, const char* key) {
    return KeySpec{key,
                   [=](RunConfig& c, const std::string& v) { c.*field = need_double(key, v); },
                   [=](const RunConfig& c) { return format_double(c.*field); }};
  };
  auto param = [](double MarketParams::*field, const char* key) {
    return KeySpec{
        key, [=](RunConfig& c, const std::string& v) { c.params.*field = need_double(key, v); },
        [=](const RunConfig& c) { return format_double(c.params.*field); }};
  };
  auto integer = [](std::int64_t RunConfig::*field, const char* key) {
    return KeySpec{
        key,
        [=](RunConfig& c, const std::string& v) { c.*field = need_integer<std::int64_t>(key, v); },
        [=](const RunConfig& c) { return std::to_string(c.*field); }};
  };
  auto demand = [](std::optional<double> RunConfig::*field, const char* key) {
    return KeySpec{key,
                   [=](RunConfig& c, const std::string& v) {
                     if (v == "s") c.*field = std::nullopt;
                     else c.*field = need_double(key, v);
                   },
                   [=](const RunConfig& c) {
                     return (c.*field) ? format_double(*(c.*field)) : std::string("s");
                   }};
  };
  static const std::vector<KeySpec> table = {
      param(&MarketParams::R, "R"),
      param(&MarketParams::a, "a"),
      param(&MarketParams::sigma2, "sigma2"),
      param(&MarketParams::ybar, "ybar"),
      param(&MarketParams::s, "s"),
      param(&MarketParams::C1, "C1"),
      param(&MarketParams::C2, "C2"),
      param(&MarketParams::beta, "beta"),
      {"allow_large_R",
       [](RunConfig& c, const std::string& v) {
         if (v == "true" || v == "1") c.params.allow_large_R = true;
         else if (v == "false" || v == "0") c.params.allow_large_R = false;
         else throw ParameterError("allow_large_R", "expected true or false");
       },
       [](const RunConfig& c) { return std::string(c.params.allow_large_R ? "true" : "false"); }},
      {"type2",
       [](RunConfig& c, const std::string& v) {
         if (v != "chartist" && v != "roc" && v != "sroc" && v != "fundamental")
           throw ParameterError("type2", "expected chartist, roc, sroc or fundamental");
         c.type2 = v;
       },
       [](const RunConfig& c) { return c.type2; }},
      real(&RunConfig::v, "v"),
      real(&RunConfig::g, "g"),
      integer(&RunConfig::L, "L"),
      real(&RunConfig::alpha, "alpha"),
      real(&RunConfig::v2, "v2"),
      {"mode",
       [](RunConfig& c, const std::string& v) {
         if (v == "constrained") c.mode = ModeSelection::Constrained;
         else if (v == "unconstrained") c.mode = ModeSelection::Unconstrained;
         else if (v == "both") c.mode = ModeSelection::Both;
         else throw ParameterError("mode", "expected constrained, unconstrained or both");
         c.mode_explicit = true;
       },
       [](const RunConfig& c) { return std::string(to_string(c.mode)); }},
      integer(&RunConfig::T, "T"),
      integer(&RunConfig::T0, "T0"),
      real(&RunConfig::x0, "x0"),
      real(&RunConfig::m1, "m1"),
      demand(&RunConfig::z10, "z10"),
      demand(&RunConfig::z20, "z20"),
      real(&RunConfig::beta_min, "beta_min"),
      real(&RunConfig::beta_max, "beta_max"),
      real(&RunConfig::beta_step, "beta_step"),
      {"beta_order",
       [](RunConfig& c, const std::string& v) {
         if (v != "ascending" && v != "descending")
           throw ParameterError("beta_order", "expected ascending or descending");
         c.beta_order = v;
       },
       [](const RunConfig& c) { return c.beta_order; }},
      {"ic_family",
       [](RunConfig& c, const std::string& v) {
         std::vector<IcFamily> fs;
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) {
           auto f = parse_ic_family(trim(item));
           if (!f) throw ParameterError("ic_family", "unknown family '" + trim(item) + "'");
           fs.push_back(*f);
         }
         if (fs.empty()) throw ParameterError("ic_family", "at least one family is required");
         c.ic_families = fs;
       },
       [](const RunConfig& c) { return join_families(c.ic_families); }},
      {"continuation_start",
       [](RunConfig& c, const std::string& v) {
         auto f = parse_ic_family(v);
         if (!f || *f == IcFamily::Continuation)
           throw ParameterError("continuation_start", "expected a non-continuation family");
         c.continuation_start = *f;
       },
       [](const RunConfig& c) { return std::string(to_string(c.continuation_start)); }},
      integer(&RunConfig::samples, "samples"),
      {"seed",
       [](RunConfig& c, const std::string& v) { c.seed = need_integer<std::uint64_t>("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      real(&RunConfig::d0, "d0"),
      real(&RunConfig::peak_fraction, "peak_fraction"),
      integer(&RunConfig::threads, "threads"),
  };
  return table;
}

}  // namespace detail

inline void set_key(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& spec : detail::key_table())
    if (key == spec.key) {
      spec.set(c, value);
      return;
    }
  throw ParameterError(key, "unknown key");
}

/// Applies a `key=value` assignment.
inline void apply_assignment(RunConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ParameterError(trim(assignment), "expected key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (key.empty()) throw ParameterError("config", "empty key in '" + std::string(assignment) + "'");
  set_key(c, key, trim(assignment.substr(eq + 1)));
}

/// Flat key=value text; '#' starts a comment, blank lines are ignored.
inline void apply_config_text(RunConfig& c, std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    apply_assignment(c, line);
  }
}

/// Resolved configuration as ordered (key, value) pairs.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& spec : detail::key_table()) out.emplace_back(spec.key, spec.get(c));
  return out;
}

inline double initial_demand(const RunConfig& c, int h) {
  const auto& z = h == 0 ? c.z10 : c.z20;
  return z.value_or(c.params.s);
}

inline PredictorPair build_predictors(const RunConfig& c) {
  const double pbar = fundamental_price(c.params);
  Predictor first = Predictor::fundamental(c.v, c.params.C1);
  if (c.L < 2 || c.L > static_cast<std::int64_t>(DeviationWindow::kCapacity - 1))
    throw ParameterError("L", "must satisfy 2 <= L <= " +
                                  std::to_string(DeviationWindow::kCapacity - 1));
  const auto lag = static_cast<std::size_t>(c.L);
  if (c.type2 == "chartist") return {first, Predictor::chartist(c.g, c.params.C2)};
  if (c.type2 == "roc") return {first, Predictor::roc(lag, pbar, c.params.C2)};
  if (c.type2 == "sroc") return {first, Predictor::sroc(lag, c.alpha, pbar, c.params.C2)};
  if (!(c.v2 >= 0.0 && c.v2 < 1.0)) throw ParameterError("v2", "must satisfy 0 <= v2 < 1");
  return {first, Predictor::fundamental(c.v2, c.params.C2)};
}

/// Checks every key against its bound; throws ParameterError naming the key.
inline void validate(const RunConfig& c) {
  validate(c.params);
  if (!(c.params.C1 >= 0.0)) throw ParameterError("C1", "must satisfy C1 >= 0");
  const double pbar = fundamental_price(c.params);
  build_predictors(c);
  if (c.T < 0) throw ParameterError("T", "must satisfy T >= 0");
  if (c.T0 < 0) throw ParameterError("T0", "must satisfy T0 >= 0");
  if (!std::isfinite(c.x0) || !(c.x0 > -pbar))
    throw ParameterError("x0", "must satisfy x0 > -pbar = " + format_double(-pbar));
  if (!(c.m1 > -1.0 && c.m1 < 1.0)) throw ParameterError("m1", "must satisfy -1 < m1 < 1");
  for (auto [key, z] : {std::pair{"z10", c.z10}, std::pair{"z20", c.z20}})
    if (z && !std::isfinite(*z)) throw ParameterError(key, "must be finite");
  if (!std::isfinite(c.beta_min) || !(c.beta_min >= 0.0))
    throw ParameterError("beta_min", "must satisfy beta_min >= 0");
  if (!std::isfinite(c.beta_max) || !(c.beta_max >= c.beta_min))
    throw ParameterError("beta_max", "must satisfy beta_max >= beta_min");
  if (!std::isfinite(c.beta_step) || !(c.beta_step > 0.0))
    throw ParameterError("beta_step", "must satisfy beta_step > 0");
  if ((c.beta_max - c.beta_min) / c.beta_step > 1e7)
    throw ParameterError("beta_step", "grid would exceed 1e7 points");
  if (c.samples < 1) throw ParameterError("samples", "must satisfy samples >= 1");
  if (!(c.d0 > 0.0) || !std::isfinite(c.d0)) throw ParameterError("d0", "must satisfy d0 > 0");
  if (!(c.peak_fraction >= 0.0 && c.peak_fraction <= 1.0))
    throw ParameterError("peak_fraction", "must lie in [0, 1]");
  if (c.threads < 0) throw ParameterError("threads", "must satisfy threads >= 0");
}

inline std::vector<double> beta_grid(const RunConfig& c) {
  std::vector<double> grid;
  const auto n = static_cast<std::int64_t>(std::floor((c.beta_max - c.beta_min) / c.beta_step + 1e-9));
  for (std::int64_t i = 0; i <= n; ++i) grid.push_back(c.beta_min + static_cast<double>(i) * c.beta_step);
  if (c.beta_order == "descending") std::reverse(grid.begin(), grid.end());
  return grid;
}

inline ScanSettings scan_settings(const RunConfig& c) {
  ScanSettings s;
  s.length = c.T;
  s.transient = c.T0;
  s.samples = static_cast<std::size_t>(c.samples);
  s.seed = c.seed;
  s.m1 = c.m1;
  s.d0 = c.d0;
  s.continuation_start = c.continuation_start;
  s.threads = static_cast<unsigned>(c.threads);
  return s;
}

// ---------------------------------------------------------------------------
// CSV output.

/// `# key=value` lines for the resolved config; `mode` is the mode of the
/// file being written.
inline void write_config_echo(std::ostream& out, RunConfig c, std::optional<Mode> mode) {
  if (mode) c.mode = *mode == Mode::Constrained ? ModeSelection::Constrained
                                                : ModeSelection::Unconstrained;
  for (const auto& [k, v] : config_entries(c)) out << "# " << k << '=' << v << '\n';
}

inline constexpr std::string_view kSimulationHeader = "t,x,p,m,n1,n2,z1,z2,region,R_t,U1,U2";
inline constexpr std::string_view kBifurcationHeader =
    "beta,sample_index,x_sample,lyapunov,attractor_id,ic_family";

inline void write_simulation_csv(std::ostream& out, const RunConfig& c, const OrbitRecord& rec) {
  write_config_echo(out, c, rec.mode);
  out << kSimulationHeader << '\n';
  const double pbar = fundamental_price(rec.params);
  std::int64_t t = rec.transient;
  for (const auto& o : rec.steps) {
    ++t;
    out << t << ',' << format_double(o.x) << ',' << format_double(pbar + o.x) << ','
        << format_double(o.m) << ',' << format_double(o.fractions[0]) << ','
        << format_double(o.fractions[1]) << ',' << format_double(o.demands[0]) << ','
        << format_double(o.demands[1]) << ',' << to_string(o.region) << ','
        << format_double(o.excess_return) << ',' << format_double(o.net_profits[0]) << ','
        << format_double(o.net_profits[1]) << '\n';
  }
}

/// Points that produced no attractor (divergent or domain error) appear as
/// one row with sample_index -1 and x_sample nan.
inline void write_bifurcation_csv(std::ostream& out, const RunConfig& c, Mode mode,
                                  const std::vector<ScanPoint>& points) {
  write_config_echo(out, c, mode);
  out << kBifurcationHeader << '\n';
  for (const auto& pt : points) {
    const std::string head = format_double(pt.beta);
    const std::string tail = "," + format_double(pt.lyapunov) + "," +
                             std::to_string(pt.attractor_id) + "," +
                             std::string(to_string(pt.family)) + "\n";
    if (pt.samples.empty()) {
      out << head << ",-1,nan" << tail;
      continue;
    }
    for (std::size_t i = 0; i < pt.samples.size(); ++i)
      out << head << ',' << i << ',' << format_double(pt.samples[i]) << tail;
  }
}

// ---------------------------------------------------------------------------
// CSV input.

struct CsvTable {
  std::map<std::string, std::string> config;  ///< from `# key=value` lines
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DomainError("missing column '" + std::string(name) + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) t.config[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (line.empty()) continue;
    if (t.header.empty()) t.header = split_csv_line(line);
    else t.rows.push_back(split_csv_line(line));
  }
  return t;
}

struct ClearingReplay {
  std::size_t rows = 0;
  std::size_t violations = 0;
  double max_residual = 0.0;
};

/// Recomputes n1 z1 + n2 z2 - s on every row of a simulation CSV.
inline ClearingReplay replay_clearing(const CsvTable& t) {
  const auto it = t.config.find("s");
  if (it == t.config.end()) throw DomainError("simulation CSV lacks the s header line");
  const auto s = parse_double(it->second);
  if (!s) throw DomainError("simulation CSV has a malformed s header line");
  const std::size_t cn1 = t.column("n1"), cn2 = t.column("n2"), cz1 = t.column("z1"),
                    cz2 = t.column("z2");
  ClearingReplay r;
  for (const auto& row : t.rows) {
    auto get = [&](std::size_t i) {
      auto v = i < row.size() ? parse_double(row[i]) : std::nullopt;
      if (!v) throw DomainError("malformed simulation CSV row");
      return *v;
    };
    const double res = std::abs(get(cn1) * get(cz1) + get(cn2) * get(cz2) - *s);
    ++r.rows;
    r.max_residual = std::max(r.max_residual, res);
    if (!(res < kClearingTolerance)) ++r.violations;
  }
  return r;
}

// ---------------------------------------------------------------------------
// SVG: (beta, x) scatter above a (beta, Lyapunov) trace.

inline void write_bifurcation_svg(std::ostream& out, const std::vector<ScanPoint>& points,
                                  std::string_view title) {
  constexpr double W = 800, H = 600, pad = 50, split = 400;
  double bmin = kInf, bmax = -kInf, xmin = kInf, xmax = -kInf, lmin = kInf, lmax = -kInf;
  for (const auto& pt : points) {
    bmin = std::min(bmin, pt.beta);
    bmax = std::max(bmax, pt.beta);
    for (double x : pt.samples) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    if (std::isfinite(pt.lyapunov)) {
      lmin = std::min(lmin, pt.lyapunov);
      lmax = std::max(lmax, pt.lyapunov);
    }
  }
  auto span = [](double& lo, double& hi) {
    if (!(lo <= hi)) lo = -1, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  };
  span(bmin, bmax);
  span(xmin, xmax);
  span(lmin, lmax);
  auto px = [&](double b) { return pad + (b - bmin) / (bmax - bmin) * (W - 2 * pad); };
  auto py = [&](double x) { return split - pad / 2 - (x - xmin) / (xmax - xmin) * (split - pad); };
  auto ly = [&](double l) { return H - pad / 2 - (l - lmin) / (lmax - lmin) * (H - split - pad); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  for (const auto& pt : points)
    for (double x : pt.samples)
      out << "<circle cx=\"" << format_double(px(pt.beta)) << "\" cy=\"" << format_double(py(x))
          << "\" r=\"0.6\" fill=\"black\"/>\n";
  if (lmin <= 0.0 && 0.0 <= lmax)
    out << "<line x1=\"" << pad << "\" x2=\"" << W - pad << "\" y1=\"" << format_double(ly(0))
        << "\" y2=\"" << format_double(ly(0)) << "\" stroke=\"gray\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"red\" points=\"";
  for (const auto& pt : points)
    if (std::isfinite(pt.lyapunov))
      out << format_double(px(pt.beta)) << ',' << format_double(ly(pt.lyapunov)) << ' ';
  out << "\"/>\n</svg>\n";
}

}  // namespace ared
