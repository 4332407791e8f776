#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "poplim/lattice.hpp"
#include "poplim/model.hpp"

namespace poplim {

/// Poisson(mu) translated left by floor(mu), supported on {-floor(mu), ...}.
class CentredPoisson {
 public:
  explicit CentredPoisson(double mu);

  double mu() const { return mu_; }
  long long floor_mu() const { return floor_mu_; }
  double frac_mu() const { return frac_mu_; }

  /// pmf on the centred lattice: Po(mu){k + floor(mu)} for k >= -floor(mu).
  double pmf(long long k) const { return pmf_abs(k + floor_mu_); }
  /// plain Poisson pmf, from the normalized mode-recurrence table.
  double pmf_abs(long long j) const;

  /// The tabulated window as a lattice distribution on the centred states.
  LatticeDistribution window() const;

  long long table_lo() const { return tab_lo_; }
  long long table_hi() const { return tab_lo_ + static_cast<long long>(tab_.size()) - 1; }

 private:
  double mu_;
  long long floor_mu_;
  double frac_mu_;
  long long tab_lo_;
  std::vector<double> tab_;
};

/// P(Po(mu) >= k), numerically stable on both sides of the mode.
double poisson_upper_tail(double mu, long long k);

/// Solution g of the Stein-Chen equation for the one-point set {s}:
///   mu g(j+1) - j g(j) = 1{j==s} - Po(mu){s},   j >= 0,  g(0) = 0.
/// Built forward below s and backward from a far tail anchor above s, in log
/// arithmetic where the values leave double range, so the plug-back residual
/// of the recursion stays at rounding level everywhere.
struct SteinSolution {
  double mu = 0;
  long long s = 0;
  double point_prob = 0;        // Po(mu){s}
  long long j_hi = 0;           // table covers g(0..j_hi)
  std::vector<double> values;   // g(0) ... g(j_hi)

  double sup_g = 0;    // sup_j |g(j)|
  double sup_dg = 0;   // sup_j |g(j+1)-g(j)|
  double l1_dg = 0;    // sum_j |g(j+1)-g(j)|
  double l1_d2g = 0;   // sum_j |g(j+2)-2g(j+1)+g(j)|

  double g(long long j) const;                      // 0 for j < 0; throws past the table
  double dg(long long j) const { return g(j + 1) - g(j); }
  double d2g(long long j) const { return g(j + 2) - 2.0 * g(j + 1) + g(j); }
};

SteinSolution stein_solution(double mu, long long s, long long j_max);

/// The shifted solution on the centred lattice: zero below -floor(mu), else
/// the {r + floor(mu)} point solution evaluated at l + floor(mu).
class ShiftedStein {
 public:
  ShiftedStein(const CentredPoisson& cp, long long r, long long l_max);

  double operator()(long long l) const { return at(l); }
  double at(long long l) const {
    long long j = l + shift_;
    if (j < 0) return 0.0;
    return sol_.g(j);
  }
  double bdiff(long long l) const { return at(l) - at(l - 1); }
  double bdiff2(long long l) const { return at(l) - 2.0 * at(l - 1) + at(l - 2); }

  const SteinSolution& base() const { return sol_; }
  long long shift() const { return shift_; }

 private:
  long long shift_;
  SteinSolution sol_;
};

ShiftedStein shifted_stein(const CentredPoisson& cp, long long r, long long l_max);

struct BoundItem {
  std::string name;
  double measured = 0;
  double bound = 0;
  bool ok = false;
};

/// The five norm estimates for the point solution, including the integrable
/// majorant h(j) = mu |dg(j)| + 1{j==s} with ||h||_1 <= 3.
struct BoundReport {
  std::vector<BoundItem> items;
  double h_l1 = 0;
  bool ok() const {
    for (const auto& it : items)
      if (!it.ok) return false;
    return true;
  }
};

BoundReport norm_bounds_check(const SteinSolution& sol);

/// Expectations, under the centred stationary law pi_hat of Y = Z - floor(nc),
/// of every term in the local error decomposition at lattice point r.
struct ResidualBreakdown {
  long long n = 0;
  long long r = 0;
  double r_sigma = 0;    // (n/2)[sigma^2(.) - sigma^2(c)] Dg~(Y)
  double r_ftaylor = 0;  // n[F(.) - F(c) - (Y/n) F'(c)] g~(Y)
  double r_frac = 0;     // F'(c) <n v_c> g~(Y)
  double en1 = 0, en2 = 0, en3 = 0, en4 = 0, en5 = 0, en6 = 0, en7 = 0;
  double rn2 = 0;  // n v_c sup_r |E D2 g~(Y+1)|
  double rn3 = 0;  // centred pmf at r times P(Y < -floor(n v_c))

  double d2_term = 0;          // n v_c E[D2 g~_r(Y+1)], signed, this r
  double reconstructed_bound = 0;
  double direct_error = 0;     // |pi_hat(r) - centred pmf(r)|
  double identity_residual = 0;  // signed error minus assembled signed terms

  double expected_remainder() const {
    return r_sigma + r_ftaylor + r_frac + en1 + en2 + en3 + en4 + en5 + en6 + en7;
  }
};

/// sup over r in the window of |n v_c E[D2 g~_r(Y+1)]|.
double stein_rn2(const ModelSpec& m, const Skeleton& s, long long n,
                 const LatticeDistribution& pi_hat);

ResidualBreakdown stein_residual_terms(const ModelSpec& m, const Skeleton& s, long long n,
                                       long long r, const LatticeDistribution& pi_hat);
ResidualBreakdown stein_residual_terms(const ModelSpec& m, const Skeleton& s, long long n,
                                       long long r, const LatticeDistribution& pi_hat,
                                       double rn2_precomputed);

nlohmann::json to_json(const ResidualBreakdown& rb);

}  // namespace poplim
