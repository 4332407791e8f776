#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "poplim/lattice.hpp"
#include "poplim/model.hpp"

namespace poplim {

/// One exact jump-chain trajectory: times[0] = 0, states[l] the state after l
/// jumps, marks[l-1] the l-th jump size.
struct PathSample {
  std::vector<double> times;
  std::vector<long long> states;
  std::vector<int> marks;
  std::uint64_t seed = 0;
  bool absorbed = false;  // reached a state with zero total rate

  std::size_t jumps() const { return marks.size(); }
  /// E_l = n Lambda(Z_{l-1}/n) (tau_l - tau_{l-1}), a unit exponential in law.
  double unit_holding(std::size_t l, const ModelSpec& m, long long n) const;
  /// Time average of Z/n over [0, horizon].
  double density_time_average(long long n, double horizon) const;
};

PathSample simulate_path(const ModelSpec& m, long long n, long long init, double horizon,
                         std::uint64_t seed);

struct EmpiricalPmf {
  LatticeDistribution pmf;
  std::vector<double> se;  // per-bin standard error, aligned with pmf.probs
  long reps = 0;
  long absorbed = 0;
};

EmpiricalPmf empirical_transient_pmf(const ModelSpec& m, long long n, long long init,
                                     double horizon, long reps, std::uint64_t seed);

struct EstimateCI {
  double estimate = 0;
  double se = 0;
  double ci_lo = 0, ci_hi = 0;  // 95% normal interval
  long reps = 0;
  long discarded = 0;
  std::uint64_t seed = 0;
};

/// Fraction of paths leaving the band |Z - nc| <= n*eta before the horizon.
/// Requires |init - nc| <= (n eta / 2) exp(-slope_sup * horizon).
EstimateCI exit_probability(const ModelSpec& m, const Skeleton& s, long long n, long long init,
                            double horizon, double eta, long reps, std::uint64_t seed);

/// Outcome of the adjacent-start likelihood ratio experiment.  The capped
/// ratio is stopped at the first of three rules (a rate shock within one
/// holding, the ratio crossing 2, or the path leaving the half band) and its
/// final factor is replaced by e when the stopping jump lowered the total
/// rate, which preserves the unit mean.
struct LikelihoodStats {
  long reps = 0;
  double mean_s = 0;        // mean of the capped ratio at the step budget
  double sd_s = 0;
  double threshold = 0;     // 928 L1 sqrt(m log m)/(n eps)
  double exceed_prob = 0;   // fraction with |S - 1| above threshold
  long stop_rate_shock = 0; // first stop was the holding-time rule
  long stop_ratio_cap = 0;  // first stop was S > 2
  long stop_band_exit = 0;  // first stop was leaving the half band
  long step_budget_exceeded = 0;  // paths still inside the horizon at the budget
  long discarded = 0;       // absorbed or zero-rate paths
  long long step_budget = 0;      // ceil(2 n peak_rate horizon)
  double l1 = 0, epsilon = 0;     // constants used for the threshold and bound
  double max_increment_ratio = 0; // max |dS| / ((2 L1/(n eps))(3 + 2E)); at most 1
};

/// Compares starts i-1 and i via the pathwise likelihood ratio.
/// Requires |i - nc| <= n * start_radius.
LikelihoodStats likelihood_ratio_experiment(const ModelSpec& m, const Skeleton& s, long long n,
                                            long long start, long reps, std::uint64_t seed);

/// Estimates P(Z(U)=k+1 | Z(0)=i) - P(Z(U)=k | Z(0)=i-1) by weighting paths
/// from i-1 with (S - 1) on the event {Z(U) = k}.
EstimateCI coupled_point_difference(const ModelSpec& m, const Skeleton& s, long long n,
                                    long long start, long long k, long reps,
                                    std::uint64_t seed);

nlohmann::json to_json(const EstimateCI& e);
nlohmann::json to_json(const LikelihoodStats& s);

}  // namespace poplim
