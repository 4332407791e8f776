#include "poplim/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "poplim/errors.hpp"
#include "poplim/rng.hpp"

namespace poplim {

namespace {

struct StepSampler {
  const ModelSpec& m;
  long long n;
  std::vector<double> rates;

  explicit StepSampler(const ModelSpec& model, long long scale)
      : m(model), n(scale), rates(model.jumps.size(), 0.0) {}

  /// Fills scaled rates n*lambda_k(state/n); returns the total.
  double total_at(long long state) {
    double z = static_cast<double>(state) / static_cast<double>(n);
    double tot = 0.0;
    for (std::size_t k = 0; k < m.jumps.size(); ++k) {
      rates[k] = static_cast<double>(n) * m.rate(k, z);
      tot += rates[k];
    }
    return tot;
  }

  std::size_t pick(std::mt19937_64& g, double total) const {
    double v = rng::uniform01(g) * total;
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < rates.size(); ++k) {
      if (rates[k] <= 0.0) continue;
      last_positive = k;
      cum += rates[k];
      if (v <= cum) return k;
    }
    return last_positive;
  }
};

}  // namespace

double PathSample::unit_holding(std::size_t l, const ModelSpec& m, long long n) const {
  if (l == 0 || l >= times.size()) throw ConfigError("holding index out of range");
  double z = static_cast<double>(states[l - 1]) / static_cast<double>(n);
  return static_cast<double>(n) * total_rate(m, z) * (times[l] - times[l - 1]);
}

double PathSample::density_time_average(long long n, double horizon) const {
  if (horizon <= 0.0) throw ConfigError("horizon must be positive");
  double acc = 0.0;
  for (std::size_t l = 0; l < states.size(); ++l) {
    double t0 = times[l];
    double t1 = l + 1 < times.size() ? times[l + 1] : horizon;
    t1 = std::min(t1, horizon);
    if (t1 > t0) acc += static_cast<double>(states[l]) * (t1 - t0);
  }
  return acc / (horizon * static_cast<double>(n));
}

PathSample simulate_path(const ModelSpec& m, long long n, long long init, double horizon,
                         std::uint64_t seed) {
  if (n < 1) throw ConfigError("population scale n must be positive");
  if (horizon < 0.0) throw ConfigError("horizon must be nonnegative");
  PathSample path;
  path.seed = seed;
  auto g = rng::make_stream(seed, 0);
  StepSampler step(m, n);

  double t = 0.0;
  long long state = init;
  path.times.push_back(0.0);
  path.states.push_back(state);
  while (true) {
    double total = step.total_at(state);
    if (total <= 0.0) {
      path.absorbed = true;
      break;
    }
    double dt = rng::exponential(g, total);
    if (t + dt > horizon) break;
    std::size_t k = step.pick(g, total);
    t += dt;
    state += m.jumps[k].size;
    path.times.push_back(t);
    path.states.push_back(state);
    path.marks.push_back(m.jumps[k].size);
  }
  return path;
}

EmpiricalPmf empirical_transient_pmf(const ModelSpec& m, long long n, long long init,
                                     double horizon, long reps, std::uint64_t seed) {
  if (reps < 1) throw ConfigError("reps must be >= 1");
  std::map<long long, long> counts;
  long absorbed = 0;
  StepSampler step(m, n);
  for (long rep = 0; rep < reps; ++rep) {
    auto g = rng::make_stream(seed, static_cast<std::uint64_t>(rep));
    double t = 0.0;
    long long state = init;
    while (true) {
      double total = step.total_at(state);
      if (total <= 0.0) {
        ++absorbed;
        break;
      }
      double dt = rng::exponential(g, total);
      if (t + dt > horizon) break;
      t += dt;
      state += m.jumps[step.pick(g, total)].size;
    }
    ++counts[state];
  }

  EmpiricalPmf out;
  out.reps = reps;
  out.absorbed = absorbed;
  out.pmf.offset = counts.begin()->first;
  long long hi = counts.rbegin()->first;
  out.pmf.probs.assign(static_cast<std::size_t>(hi - out.pmf.offset + 1), 0.0);
  for (const auto& [state, cnt] : counts)
    out.pmf.probs[static_cast<std::size_t>(state - out.pmf.offset)] =
        static_cast<double>(cnt) / static_cast<double>(reps);
  out.se.resize(out.pmf.probs.size());
  for (std::size_t k = 0; k < out.se.size(); ++k) {
    double p = out.pmf.probs[k];
    out.se[k] = std::sqrt(p * (1.0 - p) / static_cast<double>(reps));
  }
  return out;
}

EstimateCI exit_probability(const ModelSpec& m, const Skeleton& s, long long n, long long init,
                            double horizon, double eta, long reps, std::uint64_t seed) {
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (eta < 0.0) throw ConfigError("eta must be nonnegative");
  double nc = static_cast<double>(n) * s.c;
  double admissible = (static_cast<double>(n) * eta / 2.0) * std::exp(-s.slope_sup * horizon);
  if (std::abs(static_cast<double>(init) - nc) > admissible + 1e-9)
    throw ConfigError("initial state too far from nc for the exit experiment");

  StepSampler step(m, n);
  long exits = 0;
  for (long rep = 0; rep < reps; ++rep) {
    auto g = rng::make_stream(seed, static_cast<std::uint64_t>(rep));
    double t = 0.0;
    long long state = init;
    bool exited = std::abs(static_cast<double>(state) - nc) > static_cast<double>(n) * eta;
    while (!exited) {
      double total = step.total_at(state);
      if (total <= 0.0) break;
      double dt = rng::exponential(g, total);
      if (t + dt > horizon) break;
      t += dt;
      state += m.jumps[step.pick(g, total)].size;
      exited = std::abs(static_cast<double>(state) - nc) > static_cast<double>(n) * eta;
    }
    if (exited) ++exits;
  }

  EstimateCI out;
  out.reps = reps;
  out.seed = seed;
  out.estimate = static_cast<double>(exits) / static_cast<double>(reps);
  out.se = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(reps));
  out.ci_lo = out.estimate - 1.96 * out.se;
  out.ci_hi = out.estimate + 1.96 * out.se;
  return out;
}

namespace {

struct LrConstants {
  double l1 = 0, eps = 0;
  long long step_budget = 0;
  double bound_scale = 0;  // 2 L1 / (n eps)
};

LrConstants lr_constants(const ModelSpec& m, const Skeleton& s, long long n) {
  AssumptionReport rep = check_assumptions(m, s, 2048);
  if (!(rep.epsilon > 0.0))
    throw SolverError("rate floor epsilon is zero; the ratio experiment is undefined");
  LrConstants c;
  c.l1 = rep.l1;
  c.eps = rep.epsilon;
  c.step_budget = static_cast<long long>(
      std::ceil(2.0 * static_cast<double>(n) * s.peak_rate * s.horizon));
  c.bound_scale = 2.0 * c.l1 / (static_cast<double>(n) * c.eps);
  return c;
}

}  // namespace

LikelihoodStats likelihood_ratio_experiment(const ModelSpec& m, const Skeleton& s, long long n,
                                            long long start, long reps, std::uint64_t seed) {
  if (reps < 1) throw ConfigError("reps must be >= 1");
  double nc = static_cast<double>(n) * s.c;
  if (std::abs(static_cast<double>(start) - nc) >
      static_cast<double>(n) * s.start_radius + 1e-9)
    throw ConfigError("start state outside the admissible coupling band");

  LrConstants cst = lr_constants(m, s, n);
  LikelihoodStats st;
  st.reps = reps;
  st.step_budget = cst.step_budget;
  st.l1 = cst.l1;
  st.epsilon = cst.eps;
  double mn = static_cast<double>(std::max<long long>(cst.step_budget, 2));
  st.threshold = 928.0 * cst.l1 * std::sqrt(mn * std::log(mn)) /
                 (static_cast<double>(n) * cst.eps);

  const double half_band = m.band_radius / 2.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  StepSampler step(m, n);

  double sum = 0.0, sumsq = 0.0;
  long exceed = 0, kept = 0;

  for (long rep = 0; rep < reps; ++rep) {
    auto g = rng::make_stream(seed, static_cast<std::uint64_t>(rep));
    long long state = start - 1;
    double t = 0.0;
    double s_plain = 1.0, s_capped = 1.0;
    bool frozen = false, discarded = false;
    bool horizon_crossed = false;
    int first_stop = 0;  // 1,2,3 per stopping rule

    for (long long l = 0; l < cst.step_budget; ++l) {
      double total = step.total_at(state);
      if (total <= 0.0) {
        // Absorbed: no further jumps, so the horizon is never crossed.  The
        // capped ratio is only defined here if it froze earlier.
        if (!frozen) discarded = true;
        break;
      }
      double dt = rng::exponential(g, total);
      if (!horizon_crossed && t + dt > s.horizon) horizon_crossed = true;
      t += dt;
      std::size_t k = step.pick(g, total);
      double z = static_cast<double>(state) * inv_n;

      if (!frozen) {
        double den = static_cast<double>(n) * m.rate(k, z);
        double num = static_cast<double>(n) * m.rate(k, z + inv_n);
        if (den <= 0.0) {
          discarded = true;
          break;
        }
        double lam0 = static_cast<double>(n) * total_rate(m, z);
        double lam1 = static_cast<double>(n) * total_rate(m, z + inv_n);
        double factor = (num / den) * std::exp(-(lam1 - lam0) * dt);
        double unit_e = lam0 * dt;

        bool shock = std::abs(lam1 - lam0) * dt > 1.0;       // rule 1 at l+1
        double s_next = s_plain * factor;
        bool cap = s_next > 2.0;                             // rule 2 at l+1
        long long state_next = state + m.jumps[k].size;
        bool band = std::abs(static_cast<double>(state_next) * inv_n - s.c) > half_band;

        double capped_next;
        if (shock && lam0 > lam1) {
          // Replace the offending factor by e; this keeps the mean at 1 and
          // restores the bounded-increment property.
          capped_next = s_plain * std::exp(1.0);
        } else {
          capped_next = s_next;
        }
        double incr = std::abs(capped_next - s_capped);
        double allowed = cst.bound_scale * (3.0 + 2.0 * unit_e);
        if (allowed > 0.0)
          st.max_increment_ratio = std::max(st.max_increment_ratio, incr / allowed);

        s_plain = s_next;
        s_capped = capped_next;
        if (shock || cap || band) {
          frozen = true;
          first_stop = shock ? 1 : (cap ? 2 : 3);
        }
      }
      state += m.jumps[k].size;
      if (frozen && horizon_crossed) break;  // both statistics are decided
    }

    if (discarded) {
      ++st.discarded;
      continue;
    }
    if (!horizon_crossed) ++st.step_budget_exceeded;
    if (first_stop == 1) ++st.stop_rate_shock;
    if (first_stop == 2) ++st.stop_ratio_cap;
    if (first_stop == 3) ++st.stop_band_exit;

    ++kept;
    sum += s_capped;
    sumsq += s_capped * s_capped;
    if (std::abs(s_capped - 1.0) > st.threshold) ++exceed;
  }

  if (kept > 0) {
    st.mean_s = sum / static_cast<double>(kept);
    double var = std::max(0.0, sumsq / static_cast<double>(kept) - st.mean_s * st.mean_s);
    st.sd_s = std::sqrt(var);
    st.exceed_prob = static_cast<double>(exceed) / static_cast<double>(kept);
  }
  return st;
}

EstimateCI coupled_point_difference(const ModelSpec& m, const Skeleton& s, long long n,
                                    long long start, long long k, long reps,
                                    std::uint64_t seed) {
  if (reps < 1) throw ConfigError("reps must be >= 1");
  double nc = static_cast<double>(n) * s.c;
  if (std::abs(static_cast<double>(start) - nc) >
      static_cast<double>(n) * s.start_radius + 1e-9)
    throw ConfigError("start state outside the admissible coupling band");

  const double inv_n = 1.0 / static_cast<double>(n);
  StepSampler step(m, n);
  double sum = 0.0, sumsq = 0.0;
  long kept = 0, discarded = 0;

  for (long rep = 0; rep < reps; ++rep) {
    auto g = rng::make_stream(seed, static_cast<std::uint64_t>(rep));
    long long state = start - 1;
    double t = 0.0;
    double ratio = 1.0;
    bool bad = false;
    long long state_at_horizon = state;

    while (true) {
      double total = step.total_at(state);
      if (total <= 0.0) {
        bad = true;  // no further jumps; the stopped ratio is undefined here
        break;
      }
      double dt = rng::exponential(g, total);
      std::size_t jk = step.pick(g, total);
      double z = static_cast<double>(state) * inv_n;
      double den = static_cast<double>(n) * m.rate(jk, z);
      double num = static_cast<double>(n) * m.rate(jk, z + inv_n);
      if (den <= 0.0) {
        bad = true;
        break;
      }
      double lam0 = static_cast<double>(n) * total_rate(m, z);
      double lam1 = static_cast<double>(n) * total_rate(m, z + inv_n);
      ratio *= (num / den) * std::exp(-(lam1 - lam0) * dt);
      if (t + dt > s.horizon) {
        state_at_horizon = state;
        break;
      }
      t += dt;
      state += m.jumps[jk].size;
    }

    if (bad) {
      ++discarded;
      continue;
    }
    double w = (ratio - 1.0) * (state_at_horizon == k ? 1.0 : 0.0);
    sum += w;
    sumsq += w * w;
    ++kept;
  }

  EstimateCI out;
  out.reps = kept;
  out.discarded = discarded;
  out.seed = seed;
  if (kept > 0) {
    out.estimate = sum / static_cast<double>(kept);
    double var = std::max(0.0, sumsq / static_cast<double>(kept) - out.estimate * out.estimate);
    out.se = std::sqrt(var / static_cast<double>(kept));
    out.ci_lo = out.estimate - 1.96 * out.se;
    out.ci_hi = out.estimate + 1.96 * out.se;
  }
  return out;
}

nlohmann::json to_json(const EstimateCI& e) {
  return nlohmann::json{{"estimate", e.estimate},
                        {"stderr", e.se},
                        {"ci95", {e.ci_lo, e.ci_hi}},
                        {"reps", e.reps},
                        {"discarded", e.discarded},
                        {"seed", e.seed}};
}

nlohmann::json to_json(const LikelihoodStats& s) {
  return nlohmann::json{{"reps", s.reps},
                        {"mean_S", s.mean_s},
                        {"sd_S", s.sd_s},
                        {"threshold", s.threshold},
                        {"exceed_prob", s.exceed_prob},
                        {"step_budget", s.step_budget},
                        {"L1", s.l1},
                        {"epsilon", s.epsilon},
                        {"max_increment_ratio", s.max_increment_ratio},
                        {"stop_counts",
                         {{"rate_shock", s.stop_rate_shock},
                          {"ratio_cap", s.stop_ratio_cap},
                          {"band_exit", s.stop_band_exit},
                          {"budget_exceeded", s.step_budget_exceeded}}}};
}

}  // namespace poplim
