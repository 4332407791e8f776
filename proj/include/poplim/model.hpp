#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace poplim {

using RateFn = std::function<double(double)>;

/// One jump type of a density dependent process: a nonzero integer size,
/// a density-dependent rate z -> lambda_j(z), an optional analytic derivative,
/// and the envelope constant in  lambda_j(z) <= envelope * (1 + |z - c|).
struct Jump {
  int size = 0;
  RateFn rate;
  RateFn rate_deriv;  // may be empty; finite differences are used instead
  double envelope = 0.0;
};

struct ModelSpec {
  std::string name;
  std::vector<Jump> jumps;
  double alpha = 1.0;                       // jump moment exponent, in (0, 1]
  std::pair<double, double> bracket{0, 1};  // sign-change interval for the drift root
  double band_radius = 0.5;                 // radius of the band around c with positive rates

  /// Clamped rate of jumps[k] at density z; never negative.
  double rate(std::size_t k, double z) const;
  /// Clamped rate of the jump with the given size, or 0 if absent.
  double rate_of(int jump_size, double z) const;
  const Jump* find(int jump_size) const;
  int max_jump() const;

  /// sum_j |j|^(2+alpha) * envelope_j
  double s_alpha() const;
  bool has_all_derivs() const;

  /// Structural invariants: jumps distinct and nonzero, +1 present,
  /// alpha in (0,1], band_radius > 0.  Throws ConfigError.
  void validate() const;
};

double drift(const ModelSpec& m, double z);          // sum_j j lambda_j(z)
double variance_rate(const ModelSpec& m, double z);  // sum_j j^2 lambda_j(z)
double total_rate(const ModelSpec& m, double z);     // sum_j lambda_j(z)

/// Deterministic skeleton of the process near its attracting equilibrium.
struct Skeleton {
  double c = 0;             // root of the drift
  double drift_slope = 0;   // dF/dz at c, negative for an attracting root
  double var_rate_c = 0;    // variance rate at c
  double var_scale = 0;     // var_rate_c / (2 |drift_slope|): the matched Poisson has mean n*var_scale
  double peak_rate = 0;     // sup of the total rate over |z - c| <= band/2
  double horizon = 0;       // max(1, 1/(2 peak_rate)); fixed comparison horizon
  double slope_sup = 0;     // sup of |dF/dz| over |z - c| <= band
  double start_radius = 0;  // band * exp(-horizon * slope_sup) / 4; admissible start offset density
};

/// Locates c by bisection over the bracket (width 1e-12) plus one Newton
/// polish, then fills the derived constants.  The drift derivative uses the
/// analytic jump derivatives when all are present, otherwise a central
/// difference with step 1e-6.
/// Throws NoRoot, NonAttracting, DegenerateVariance.
Skeleton build_skeleton(const ModelSpec& m);

struct EnvelopeCheck {
  int jump_size = 0;
  double envelope = 0.0;
  double worst_ratio = 0.0;  // max over the grid of rate / (envelope*(1+|z-c|))
  double worst_z = 0.0;
  bool ok = false;
};

/// Grid diagnostics for the standing assumptions.  Violations are reported,
/// never thrown.
struct AssumptionReport {
  double c = 0;
  double drift_slope = 0;
  bool attracting_ok = false;

  // min |drift| over band/2 <= |z-c| <= 1.5*band (compact window by design)
  double min_outer_drift = 0;
  bool outer_drift_ok = false;

  std::vector<EnvelopeCheck> envelope;
  bool envelope_ok = false;

  // min over active jumps of inf_{|z-c|<=band} rate_j(z) / rate_j(c)
  double epsilon = 0;
  bool rate_floor_ok = false;

  // sup_j ||rate_j'||_band / rate_j(c)  and  sup_j ||rate_j''||_band / (|j| rate_j(c))
  double l1 = 0;
  double l2 = 0;
  bool smooth_ok = false;

  bool ok() const {
    return attracting_ok && outer_drift_ok && envelope_ok && rate_floor_ok && smooth_ok;
  }
};

AssumptionReport check_assumptions(const ModelSpec& m, const Skeleton& s, int grid_size);

/// Registered models selected by name plus parameters.  Generic keys
/// (alpha, delta, bracket_lo, bracket_hi) override the per-model defaults.
ModelSpec make_model(const std::string& name, const std::map<std::string, double>& params = {});
std::vector<std::string> builtin_models();

/// floor with a 1e-9 snap to the nearest integer, so that equilibria that are
/// exactly integral (nc = 100 up to root-finding noise) centre consistently.
long long snapped_floor(double x);
/// x - snapped_floor(x), clamped into [0, 1).
double snapped_frac(double x);

}  // namespace poplim
