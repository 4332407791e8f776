#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "poplim/lattice.hpp"
#include "poplim/model.hpp"

namespace poplim {

using StateFn = std::function<double(long long)>;

inline constexpr long long kAutoHalfwidth = -1;

/// Conservative truncation of the jump chain on an integer window.  Jumps
/// leaving the window are suppressed together with their diagonal
/// contribution, so every row sums to zero exactly.
struct TruncatedGenerator {
  long long n = 0;
  long long lo = 0, hi = 0;  // inclusive absolute window
  // Off-diagonal rates per state, as (target - lo, rate); jump sets are tiny.
  std::vector<std::vector<std::pair<std::int32_t, double>>> rows;
  std::vector<double> diag;

  std::size_t size() const { return diag.size(); }
  std::size_t index(long long state) const { return static_cast<std::size_t>(state - lo); }

  double rate(long long from, long long to) const;

  /// (Q h)(i) for the truncated operator; h evaluated on absolute states.
  double apply_row(long long i, const StateFn& h) const;
};

long long auto_halfwidth(const Skeleton& s, long long n);

/// Window [floor(nc)-w, floor(nc)+w], trimmed to the contiguous run of states
/// with positive total rate around the centre (states where every rate
/// vanishes would otherwise trap the truncated chain).
/// Throws WindowTooSmall when w is smaller than the largest jump.
TruncatedGenerator build_generator(const ModelSpec& m, const Skeleton& s, long long n,
                                   long long halfwidth = kAutoHalfwidth);

/// Full (untruncated) generator applied to h at state i:
///   sum_j n lambda_j(i/n) [h(i+j) - h(i)].
double apply_generator(const ModelSpec& m, long long n, const StateFn& h, long long i);

/// The same value computed through the drift/variance decomposition
///   (n/2) sigma^2(i/n) Dg(i) + n F(i/n) g(i) + remainder(g, i)
/// with g(i) = h(i+1) - h(i) and D the backward difference.
double apply_generator_decomposed(const ModelSpec& m, long long n, const StateFn& h, long long i);

/// Jump-excess coefficients for sizes j >= 2, in the two algebraically equal
/// forms (weighted first differences, and binomial-weighted second
/// differences).  g is the difference function, D the backward difference.
double coeff_up(const StateFn& g, int j, long long i);        // -C(j,2) Dg(i) + sum_k k Dg(i+j-k)
double coeff_up_curv(const StateFn& g, int j, long long i);   // sum_k C(k,2) D2g(i+j-k+1)
double coeff_down(const StateFn& g, int j, long long i);      // C(j,2) Dg(i) - sum_k k Dg(i-j+k)
double coeff_down_curv(const StateFn& g, int j, long long i); // sum_k C(k,2) D2g(i-j+k)

/// pi Q = 0 with sum(pi) = 1: sparse direct solve with iterative refinement,
/// falling back to power iteration on the uniformized kernel.  The residual
/// ||pi Q||_inf is verified against tol.
/// Throws SingularSystem, NotConverged.
LatticeDistribution stationary_distribution(const TruncatedGenerator& gen, double tol);

/// Law of the truncated chain at time t >= 0 started from `init`, via
/// uniformization; the neglected series mass is below tol.
LatticeDistribution transient_distribution(const TruncatedGenerator& gen, long long init,
                                           double t, double tol);

/// Same, started from an arbitrary initial law on the window.
LatticeDistribution evolve(const TruncatedGenerator& gen, const LatticeDistribution& init,
                           double t, double tol);

/// |sum_i pi(i) (Q h)(i)| for the truncated generator.
double dynkin_residual(const TruncatedGenerator& gen, const LatticeDistribution& pi,
                       const StateFn& h);

/// Builds the generator at AUTO width (growing by 1.5x while stationary mass
/// within one jump of an untrimmed edge exceeds 1e-12) and solves it.
std::pair<TruncatedGenerator, LatticeDistribution> solve_stationary_auto(
    const ModelSpec& m, const Skeleton& s, long long n, double tol);

}  // namespace poplim
