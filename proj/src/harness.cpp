#include "poplim/harness.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include "poplim/errors.hpp"
#include "poplim/lattice.hpp"

namespace poplim {

void SweepConfig::validate() const {
  if (n_grid.empty()) throw ConfigError("sweep needs a nonempty n grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw ConfigError("sweep grid entries must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1])
      throw ConfigError("sweep grid must be strictly increasing");
  }
  if (!(tol > 0.0)) throw ConfigError("sweep tolerance must be positive");
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw TooFewPoints("rate fit needs at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double n = static_cast<double>(points.size());
  for (const auto& [x, y] : points) {
    if (!(y > 0.0)) throw NonpositiveValue("rate fit needs positive values");
    double ly = std::log(y);
    sx += x;
    sy += ly;
    sxx += x * x;
    sxy += x * ly;
    syy += ly * ly;
  }
  double den = n * sxx - sx * sx;
  if (den == 0.0) throw ConfigError("rate fit abscissae are degenerate");
  RateFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_tot = syy - sy * sy / n;
  double ss_res = 0.0;
  for (const auto& [x, y] : points) {
    double e = std::log(y) - (f.intercept + f.slope * x);
    ss_res += e * e;
  }
  f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

ConvergenceReport run_sweep(const SweepConfig& config) {
  config.validate();
  ModelSpec model = make_model(config.model, config.params);
  Skeleton skel = build_skeleton(model);

  std::vector<std::future<DistanceReport>> futs;
  futs.reserve(config.n_grid.size());
  for (long long n : config.n_grid)
    futs.push_back(std::async(std::launch::async,
                              [&model, &skel, n]() { return local_limit_error(model, skel, n); }));

  ConvergenceReport rep;
  for (std::size_t i = 0; i < futs.size(); ++i) {
    try {
      rep.rows.push_back(futs[i].get());
    } catch (const std::exception& e) {
      throw SolverError("sweep failed at n=" + std::to_string(config.n_grid[i]) + ": " +
                        e.what());
    }
  }

  auto column = [&](const std::string& name) {
    std::vector<std::pair<double, double>> pts;
    for (const DistanceReport& r : rep.rows) {
      double v = name == "tv"             ? r.tv
                 : name == "sup_point"    ? r.sup_point
                 : name == "translate_tv" ? r.translate_tv
                                          : r.max_adjacent_diff;
      pts.emplace_back(std::log(static_cast<double>(r.n)), v);
    }
    return pts;
  };

  if (rep.rows.size() >= 3) {
    for (std::string name : {"tv", "sup_point", "translate_tv", "max_adjacent_diff"}) {
      try {
        rep.fits[name] = fit_rate(column(name));
      } catch (const NonpositiveValue&) {
        // metric hit exact zero (an exact approximation); no rate to fit
      }
    }
  }

  double tvn = 0, spn = 0, ttn = 0, madn = 0;
  for (const DistanceReport& r : rep.rows) {
    tvn = std::max(tvn, r.tv_norm());
    spn = std::max(spn, r.sup_point_norm());
    ttn = std::max(ttn, r.translate_tv_norm());
    madn = std::max(madn, r.max_adjacent_diff_norm());
  }
  rep.empirical_constants = {{"tv_norm_max", tvn},
                             {"sup_point_norm_max", spn},
                             {"translate_tv_norm_max", ttn},
                             {"max_adjacent_diff_norm_max", madn}};
  return rep;
}

nlohmann::json to_json(const ConvergenceReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const DistanceReport& r : report.rows) {
    rows.push_back({{"n", r.n},
                    {"tv", r.tv},
                    {"sup_point", r.sup_point},
                    {"translate_tv", r.translate_tv},
                    {"max_adjacent_diff", r.max_adjacent_diff},
                    {"alpha", r.alpha},
                    {"tv_norm", r.tv_norm()},
                    {"sup_point_norm", r.sup_point_norm()},
                    {"translate_tv_norm", r.translate_tv_norm()},
                    {"max_adjacent_diff_norm", r.max_adjacent_diff_norm()}});
  }
  nlohmann::json fits = nlohmann::json::object();
  for (const auto& [name, f] : report.fits)
    fits[name] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}};
  return nlohmann::json{
      {"rows", rows}, {"fits", fits}, {"empirical_constants", report.empirical_constants}};
}

void emit_report(const ConvergenceReport& report, const std::string& format,
                 const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open output file: " + path);
  if (format == "csv") {
    write_report_csv_header(os);
    for (const DistanceReport& r : report.rows) write_report_csv_row(r, os);
  } else if (format == "json") {
    os << to_json(report).dump(2) << '\n';
  } else {
    throw ConfigError("unknown report format '" + format + "' (expected csv or json)");
  }
  if (!os.good()) throw ConfigError("failed while writing: " + path);
}

}  // namespace poplim
