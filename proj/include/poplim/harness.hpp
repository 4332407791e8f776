#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "poplim/metrics.hpp"
#include "poplim/model.hpp"

namespace poplim {

struct SweepConfig {
  std::string model = "sis";
  std::map<std::string, double> params;
  std::vector<long long> n_grid = {50, 100, 200, 400, 800, 1600, 3200};
  double tol = 1e-12;
  long reps = 10000;
  std::uint64_t seed = 1;

  void validate() const;  // n_grid strictly increasing and nonempty
};

struct RateFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

struct ConvergenceReport {
  std::vector<DistanceReport> rows;
  std::map<std::string, RateFit> fits;                // one per metric, when >= 3 rows
  std::map<std::string, double> empirical_constants;  // maxima of the normalized columns
};

/// Least squares of log y against x.  Throws TooFewPoints (< 3) and
/// NonpositiveValue (y <= 0).
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

/// Stationary solve + local limit error for every n in the grid (evaluated in
/// parallel, merged in grid order), then log-log rate fits per metric.
ConvergenceReport run_sweep(const SweepConfig& config);

/// format: "csv" writes the 9-column table, "json" the full report.
void emit_report(const ConvergenceReport& report, const std::string& format,
                 const std::string& path);

nlohmann::json to_json(const ConvergenceReport& report);

}  // namespace poplim
