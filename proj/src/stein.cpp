#include "poplim/stein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "poplim/errors.hpp"
#include "poplim/generator.hpp"

namespace poplim {

namespace {

constexpr double kLn2 = 0.6931471805599453094172321214581766;

// Computed in extended precision: the value calibrates whole solution tables,
// and a plain lgamma at arguments in the thousands costs ~1e-11 relative.
double log_pmf(double mu, long long j) {
  long double v = static_cast<long double>(j) * std::log(static_cast<long double>(mu)) -
                  static_cast<long double>(mu) -
                  std::lgamma(static_cast<long double>(j) + 1.0L);
  return static_cast<double>(v);
}

// A nonnegative value carried as mant * 2^shift; rescaling by powers of two
// is exact, so recurrences stay consistent to rounding level across the
// whole double range and beyond.
struct Scaled {
  double mant = 0.0;
  int shift = 0;

  double value() const { return std::ldexp(mant, shift); }
  void renormalize(double& companion_at_scale) {
    if (mant > 1e150) {
      mant = std::ldexp(mant, -500);
      companion_at_scale = std::ldexp(companion_at_scale, -500);
      shift += 500;
    } else if (mant < 1e-150 && mant > 0.0) {
      mant = std::ldexp(mant, 500);
      companion_at_scale = std::ldexp(companion_at_scale, 500);
      shift -= 500;
    }
  }
};

Scaled scaled_from_log(double lv) {
  Scaled s;
  if (!std::isfinite(lv)) return s;
  s.shift = static_cast<int>(std::lround(lv / kLn2));
  s.mant = std::exp(lv - static_cast<double>(s.shift) * kLn2);
  return s;
}

// sum_{i >= k} pmf(i)/pmf(k); k must be at or above the mode so the ratios
// decrease.  Bounded by 1/(1 - mu/(k+1)).
double upper_ratio_sum(double mu, long long k) {
  double sum = 1.0, t = 1.0;
  for (long long i = k + 1;; ++i) {
    t *= mu / static_cast<double>(i);
    sum += t;
    if (t < sum * 1e-18) break;
  }
  return sum;
}

}  // namespace

double poisson_upper_tail(double mu, long long k) {
  if (k <= 0) return 1.0;
  long long mode = static_cast<long long>(std::floor(mu));
  if (k <= mode) {
    // 1 - P(X <= k-1), lower sum taken downward from its largest term.
    double t = std::exp(log_pmf(mu, k - 1));
    double sum = t;
    for (long long i = k - 1; i >= 1; --i) {
      t *= static_cast<double>(i) / mu;
      sum += t;
      if (t < sum * 1e-18) break;
    }
    return 1.0 - sum;
  }
  return std::exp(log_pmf(mu, k)) * upper_ratio_sum(mu, k);
}

CentredPoisson::CentredPoisson(double mu) : mu_(mu) {
  if (!(mu > 0.0)) throw ConfigError("centred Poisson needs mu > 0");
  floor_mu_ = snapped_floor(mu);
  frac_mu_ = snapped_frac(mu);

  // pmf table by recurrence from the mode, normalized; this keeps relative
  // accuracy at rounding level across the whole window.
  long long mode = std::max<long long>(0, static_cast<long long>(std::floor(mu)));
  std::vector<double> down, up;
  double t = 1.0;
  for (long long j = mode; j >= 1; --j) {
    t *= static_cast<double>(j) / mu;
    if (t < 1e-30) break;
    down.push_back(t);
  }
  t = 1.0;
  for (long long j = mode + 1;; ++j) {
    t *= mu / static_cast<double>(j);
    if (t < 1e-30) break;
    up.push_back(t);
  }
  tab_lo_ = mode - static_cast<long long>(down.size());
  tab_.assign(down.rbegin(), down.rend());
  tab_.push_back(1.0);
  tab_.insert(tab_.end(), up.begin(), up.end());
  double s = 0.0;
  for (double v : tab_) s += v;
  for (double& v : tab_) v /= s;
}

double CentredPoisson::pmf_abs(long long j) const {
  if (j < tab_lo_ || j > table_hi()) return 0.0;
  return tab_[static_cast<std::size_t>(j - tab_lo_)];
}

LatticeDistribution CentredPoisson::window() const {
  LatticeDistribution d;
  d.offset = tab_lo_ - floor_mu_;
  d.probs = tab_;
  return d;
}

double SteinSolution::g(long long j) const {
  if (j < 0) return 0.0;
  if (j > j_hi)
    throw InvariantViolation("Stein solution queried past its table (j=" + std::to_string(j) +
                             ", j_hi=" + std::to_string(j_hi) + ")");
  return values[static_cast<std::size_t>(j)];
}

SteinSolution stein_solution(double mu, long long s, long long j_max) {
  if (!(mu > 0.0)) throw ConfigError("stein_solution needs mu > 0");
  if (s < 0) throw ConfigError("stein_solution needs s >= 0");
  if (j_max < s + 2) throw ConfigError("stein_solution needs j_max >= s + 2");

  SteinSolution sol;
  sol.mu = mu;
  sol.s = s;
  const double log_mu = std::log(mu);
  const double log_pp = log_pmf(mu, s);
  sol.point_prob = std::exp(log_pp);

  const long long margin =
      static_cast<long long>(std::ceil(40.0 * std::sqrt(mu + 1.0))) + 40;
  const long long J =
      std::max({j_max, s + 2, static_cast<long long>(std::ceil(mu))}) + margin;
  sol.j_hi = J;
  sol.values.assign(static_cast<std::size_t>(J + 1), 0.0);
  auto& g = sol.values;

  const bool deep = log_pp < -650.0;  // beyond comfortable double range

  // Below the point: g(1..s), negative; forward recursion is stable here
  // because the dominant mode of the recursion is the solution itself.
  if (s >= 1) {
    if (!deep) {
      g[1] = -sol.point_prob / mu;
      for (long long j = 1; j <= s - 1; ++j)
        g[j + 1] = (static_cast<double>(j) * g[j] - sol.point_prob) / mu;
    } else {
      Scaled G = scaled_from_log(log_pp - log_mu);  // |g(1)|
      double pp_at = G.mant * mu;                   // point_prob at G's scale
      g[1] = -G.value();
      for (long long j = 1; j <= s - 1; ++j) {
        G.mant = (static_cast<double>(j) * G.mant + pp_at) / mu;
        g[j + 1] = -G.value();
        G.renormalize(pp_at);
      }
    }
  }

  // At the point: g(s+1) = P(X >= s+1)/mu, from the stable tail sum (the
  // forward step would cancel catastrophically when s sits far above mu).
  if (s + 1 <= J) {
    if (s + 1 <= static_cast<long long>(std::floor(mu))) {
      g[s + 1] = poisson_upper_tail(mu, s + 1) / mu;
    } else {
      double lv = log_pmf(mu, s + 1) + std::log(upper_ratio_sum(mu, s + 1)) - log_mu;
      g[s + 1] = scaled_from_log(lv).value();
    }
  }

  // Above the point: anchor far in the tail, then recurse backward; anchor
  // error is damped long before it reaches s+2.
  {
    double log_anchor = log_pp - log_pmf(mu, J - 1) + log_pmf(mu, J) +
                        std::log(upper_ratio_sum(mu, J)) - log_mu;
    if (!deep) {
      g[J] = std::exp(log_anchor);
      for (long long j = J - 1; j >= s + 2; --j)
        g[j] = (mu * g[j + 1] + sol.point_prob) / static_cast<double>(j);
    } else {
      Scaled G = scaled_from_log(log_anchor);
      double pp_at = std::exp(log_pp - static_cast<double>(G.shift) * kLn2);
      g[J] = G.value();
      for (long long j = J - 1; j >= s + 2; --j) {
        G.mant = (mu * G.mant + pp_at) / static_cast<double>(j);
        g[j] = G.value();
        G.renormalize(pp_at);
      }
    }
  }

  sol.sup_g = 0.0;
  sol.sup_dg = 0.0;
  sol.l1_dg = 0.0;
  sol.l1_d2g = 0.0;
  for (long long j = 0; j <= J; ++j) sol.sup_g = std::max(sol.sup_g, std::abs(g[j]));
  for (long long j = 0; j <= J - 1; ++j) {
    double d = g[j + 1] - g[j];
    sol.sup_dg = std::max(sol.sup_dg, std::abs(d));
    sol.l1_dg += std::abs(d);
  }
  for (long long j = 0; j <= J - 2; ++j)
    sol.l1_d2g += std::abs(g[j + 2] - 2.0 * g[j + 1] + g[j]);
  return sol;
}

namespace {

long long checked_point(const CentredPoisson& cp, long long r) {
  if (r < -cp.floor_mu())
    throw ConfigError("shifted Stein solution needs r >= -floor(mu)");
  return r + cp.floor_mu();
}

}  // namespace

ShiftedStein::ShiftedStein(const CentredPoisson& cp, long long r, long long l_max)
    : shift_(cp.floor_mu()),
      sol_(stein_solution(cp.mu(), checked_point(cp, r),
                          std::max(r + cp.floor_mu() + 2, l_max + cp.floor_mu() + 2))) {}

ShiftedStein shifted_stein(const CentredPoisson& cp, long long r, long long l_max) {
  return ShiftedStein(cp, r, l_max);
}

BoundReport norm_bounds_check(const SteinSolution& sol) {
  BoundReport rep;
  const double mu = sol.mu;
  const double inv_mu = 1.0 / mu;

  rep.items.push_back({"sup_g_le_sup_dg", sol.sup_g, sol.sup_dg, false});
  rep.items.push_back({"sup_dg", sol.sup_dg, inv_mu, false});
  rep.items.push_back({"l1_dg", sol.l1_dg, 2.0 * inv_mu, false});
  rep.items.push_back({"l1_d2g", sol.l1_d2g, 4.0 * inv_mu, false});

  // h(j) = mu |dg(j)| + 1{j==s} majorizes |(j - mu) g(j)| up to the point
  // probability; its l1 norm is at most 3.
  auto h = [&](long long j) {
    if (j < 0 || j > sol.j_hi - 1) return 0.0;
    return mu * std::abs(sol.dg(j)) + (j == sol.s ? 1.0 : 0.0);
  };
  rep.h_l1 = mu * sol.l1_dg + 1.0;

  double worst4 = 0.0, worst5 = 0.0;
  for (long long j = 0; j <= sol.j_hi - 2; ++j) {
    double centered = (static_cast<double>(j) - mu) * sol.g(j);
    double slack4 = std::abs(centered) - (h(j) + sol.point_prob);
    worst4 = std::max(worst4, slack4);
    double centered_d = (static_cast<double>(j) - mu) * sol.dg(j);
    double slack5 = std::abs(centered_d) - (h(j + 1) + h(j) + inv_mu);
    worst5 = std::max(worst5, slack5);
  }
  rep.items.push_back({"centered_g_majorant_slack", worst4, 0.0, false});
  rep.items.push_back({"centered_dg_majorant_slack", worst5, 0.0, false});
  rep.items.push_back({"h_l1", rep.h_l1, 3.0, false});

  for (auto& it : rep.items)
    it.ok = it.measured <= it.bound + 1e-9 * std::max(1.0, std::abs(it.bound));
  return rep;
}

namespace {

struct TermAccumulator {
  const ModelSpec& m;
  const Skeleton& sk;
  long long n;
  const LatticeDistribution& pi_hat;
  const CentredPoisson& cp;
  long long floor_nc;
  long long sqrt_lo;  // floor(sqrt(n))
  long long sqrt_hi;  // ceil(sqrt(n))

  double drift_c, var_rate_c;

  ResidualBreakdown run(const ShiftedStein& gt, long long r) const {
    ResidualBreakdown out;
    out.n = n;
    out.r = r;
    const double fp = sk.drift_slope;
    const double frac = cp.frac_mu();
    const double nn = static_cast<double>(n);
    StateFn gfn = [&gt](long long l) { return gt.at(l); };

    double mass_below = 0.0;
    for (std::size_t k = 0; k < pi_hat.probs.size(); ++k) {
      const long long y = pi_hat.offset + static_cast<long long>(k);
      const double p = pi_hat.probs[k];
      if (y < -cp.floor_mu()) mass_below += p;
      if (p == 0.0) continue;
      const double z = static_cast<double>(y + floor_nc) / nn;
      const double gv = gt.at(y);
      const double dgv = gt.bdiff(y);
      const double f = drift(m, z);
      const double s2 = variance_rate(m, z);

      out.r_sigma += p * 0.5 * nn * (s2 - var_rate_c) * dgv;
      out.r_ftaylor +=
          p * nn * (f - drift_c - (static_cast<double>(y) / nn) * fp) * gv;
      out.r_frac += p * fp * frac * gv;
      out.en1 += p * (-0.5) * nn * (f - drift_c) * dgv;
      out.d2_term += p * gt.bdiff2(y + 1);

      for (std::size_t q = 0; q < m.jumps.size(); ++q) {
        const int j = m.jumps[q].size;
        if (j >= 2 && j <= sqrt_lo) {
          const double rate_c = m.rate(q, sk.c);
          const double rate_z = m.rate(q, z);
          out.en2 += p * coeff_up_curv(gfn, j, y) * nn * rate_c;
          out.en3 += p * coeff_up(gfn, j, y) * nn * (rate_z - rate_c);
        }
        if (j >= 2 && j >= sqrt_hi)
          out.en4 += p * coeff_up(gfn, j, y) * nn * m.rate(q, z);
        if (j <= -2 && -j <= sqrt_lo) {
          const double rate_c = m.rate(q, sk.c);
          const double rate_z = m.rate(q, z);
          out.en5 -= p * coeff_down_curv(gfn, -j, y) * nn * rate_c;
          out.en6 -= p * coeff_down(gfn, -j, y) * nn * (rate_z - rate_c);
        }
        if (j <= -2 && -j >= sqrt_hi)
          out.en7 -= p * coeff_down(gfn, -j, y) * nn * m.rate(q, z);
      }
    }

    const double mu = cp.mu();
    out.d2_term *= mu;  // n v_c E[D2 g~(Y+1)]
    out.rn3 = 0.0;
    if (mass_below > 0.0) {
      double sup_pmf = 0.0;
      for (long long k = cp.table_lo(); k <= cp.table_hi(); ++k)
        sup_pmf = std::max(sup_pmf, cp.pmf_abs(k));
      out.rn3 = sup_pmf * mass_below;
    }

    const double pmf_r = cp.pmf(r);
    out.direct_error = std::abs(pi_hat.at(r) - pmf_r);
    const double signed_direct = pi_hat.at(r) - pmf_r;
    const double assembled =
        out.expected_remainder() / fp + out.d2_term - pmf_r * mass_below;
    out.identity_residual = signed_direct - assembled;
    return out;
  }
};

TermAccumulator make_accumulator(const ModelSpec& m, const Skeleton& s, long long n,
                                 const LatticeDistribution& pi_hat, const CentredPoisson& cp) {
  double root_n = std::sqrt(static_cast<double>(n));
  return TermAccumulator{
      m,
      s,
      n,
      pi_hat,
      cp,
      snapped_floor(static_cast<double>(n) * s.c),
      static_cast<long long>(std::floor(root_n)),
      static_cast<long long>(std::ceil(root_n)),
      drift(m, s.c),
      s.var_rate_c,
  };
}

}  // namespace

double stein_rn2(const ModelSpec& m, const Skeleton& s, long long n,
                 const LatticeDistribution& pi_hat) {
  CentredPoisson cp(static_cast<double>(n) * s.var_scale);
  const long long l_max = pi_hat.hi() + m.max_jump() + 2;
  double worst = 0.0;
  const long long r_lo = std::max(-cp.floor_mu(), pi_hat.lo() - 2);
  const long long r_hi = pi_hat.hi() + 2;
  for (long long r = r_lo; r <= r_hi; ++r) {
    ShiftedStein gt(cp, r, l_max);
    double acc = 0.0;
    for (std::size_t k = 0; k < pi_hat.probs.size(); ++k) {
      long long y = pi_hat.offset + static_cast<long long>(k);
      acc += pi_hat.probs[k] * gt.bdiff2(y + 1);
    }
    worst = std::max(worst, std::abs(acc) * cp.mu());
  }
  return worst;
}

ResidualBreakdown stein_residual_terms(const ModelSpec& m, const Skeleton& s, long long n,
                                       long long r, const LatticeDistribution& pi_hat,
                                       double rn2_precomputed) {
  CentredPoisson cp(static_cast<double>(n) * s.var_scale);
  const long long l_max = pi_hat.hi() + m.max_jump() + 2;
  ShiftedStein gt(cp, r, l_max);
  TermAccumulator acc = make_accumulator(m, s, n, pi_hat, cp);
  ResidualBreakdown out = acc.run(gt, r);
  out.rn2 = rn2_precomputed;
  out.reconstructed_bound =
      std::abs(out.expected_remainder()) / (-s.drift_slope) + out.rn2 + out.rn3;
  return out;
}

ResidualBreakdown stein_residual_terms(const ModelSpec& m, const Skeleton& s, long long n,
                                       long long r, const LatticeDistribution& pi_hat) {
  return stein_residual_terms(m, s, n, r, pi_hat, stein_rn2(m, s, n, pi_hat));
}

nlohmann::json to_json(const ResidualBreakdown& rb) {
  return nlohmann::json{
      {"n", rb.n},
      {"r", rb.r},
      {"terms",
       {{"R_sigma", rb.r_sigma},
        {"R_Ftaylor", rb.r_ftaylor},
        {"R_frac", rb.r_frac},
        {"En1", rb.en1},
        {"En2", rb.en2},
        {"En3", rb.en3},
        {"En4", rb.en4},
        {"En5", rb.en5},
        {"En6", rb.en6},
        {"En7", rb.en7},
        {"Rn2", rb.rn2},
        {"Rn3", rb.rn3}}},
      {"reconstructed_bound", rb.reconstructed_bound},
      {"direct_error", rb.direct_error}};
}

}  // namespace poplim
