#include "poplim/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "poplim/errors.hpp"

namespace poplim {

namespace {

constexpr double kRootTol = 1e-12;
constexpr double kDerivStep = 1e-6;

double deriv_or_fd(const RateFn& f, const RateFn& df, double z) {
  if (df) return df(z);
  return (f(z + kDerivStep) - f(z - kDerivStep)) / (2.0 * kDerivStep);
}

}  // namespace

double ModelSpec::rate(std::size_t k, double z) const {
  return std::max(0.0, jumps[k].rate(z));
}

double ModelSpec::rate_of(int jump_size, double z) const {
  const Jump* j = find(jump_size);
  return j ? std::max(0.0, j->rate(z)) : 0.0;
}

const Jump* ModelSpec::find(int jump_size) const {
  for (const Jump& j : jumps)
    if (j.size == jump_size) return &j;
  return nullptr;
}

int ModelSpec::max_jump() const {
  int m = 0;
  for (const Jump& j : jumps) m = std::max(m, std::abs(j.size));
  return m;
}

double ModelSpec::s_alpha() const {
  double s = 0.0;
  for (const Jump& j : jumps)
    s += std::pow(std::abs(j.size), 2.0 + alpha) * j.envelope;
  return s;
}

bool ModelSpec::has_all_derivs() const {
  for (const Jump& j : jumps)
    if (!j.rate_deriv) return false;
  return true;
}

void ModelSpec::validate() const {
  std::set<int> seen;
  for (const Jump& j : jumps) {
    if (j.size == 0) throw ConfigError("model '" + name + "': jump of size 0");
    if (!j.rate) throw ConfigError("model '" + name + "': jump without a rate function");
    if (j.envelope < 0) throw ConfigError("model '" + name + "': negative envelope constant");
    if (!seen.insert(j.size).second)
      throw ConfigError("model '" + name + "': duplicate jump size " + std::to_string(j.size));
  }
  if (!seen.count(1)) throw ConfigError("model '" + name + "': jump +1 must be present");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("model '" + name + "': alpha must lie in (0,1]");
  if (!(band_radius > 0.0)) throw ConfigError("model '" + name + "': band radius must be positive");
  if (!(bracket.first < bracket.second))
    throw ConfigError("model '" + name + "': empty root bracket");
  if (!std::isfinite(s_alpha()))
    throw ConfigError("model '" + name + "': jump moment sum not finite");
}

double drift(const ModelSpec& m, double z) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.jumps.size(); ++k)
    s += m.jumps[k].size * m.rate(k, z);
  return s;
}

double variance_rate(const ModelSpec& m, double z) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.jumps.size(); ++k)
    s += static_cast<double>(m.jumps[k].size) * m.jumps[k].size * m.rate(k, z);
  return s;
}

double total_rate(const ModelSpec& m, double z) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.jumps.size(); ++k) s += m.rate(k, z);
  return s;
}

Skeleton build_skeleton(const ModelSpec& m) {
  m.validate();
  double lo = m.bracket.first, hi = m.bracket.second;
  double flo = drift(m, lo), fhi = drift(m, hi);
  if (!(flo * fhi < 0.0))
    throw NoRoot("drift does not change sign over the bracket of model '" + m.name + "'");

  // Bisection to width 1e-12 ...
  for (int it = 0; it < 200 && hi - lo > kRootTol; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = drift(m, mid);
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    if (flo * fm < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  double c = 0.5 * (lo + hi);

  // ... plus one Newton polish.
  auto drift_deriv = [&](double z) {
    if (m.has_all_derivs()) {
      // Derivative of the clamped rate: rate_deriv where the raw rate is
      // positive, zero on the clamped region.
      double s = 0.0;
      for (const Jump& j : m.jumps)
        if (j.rate(z) > 0.0) s += j.size * j.rate_deriv(z);
      return s;
    }
    return (drift(m, z + kDerivStep) - drift(m, z - kDerivStep)) / (2.0 * kDerivStep);
  };
  double fp = drift_deriv(c);
  if (fp != 0.0) {
    double step = drift(m, c) / fp;
    if (std::abs(step) < 1e-6) c -= step;
  }

  Skeleton s;
  s.c = c;
  s.drift_slope = drift_deriv(c);
  if (!(s.drift_slope < 0.0))
    throw NonAttracting("drift slope at the root is not negative for model '" + m.name + "'");
  s.var_rate_c = variance_rate(m, c);
  if (!(s.var_rate_c > 0.0))
    throw DegenerateVariance("variance rate vanishes at the root of model '" + m.name + "'");
  s.var_scale = s.var_rate_c / (-2.0 * s.drift_slope);

  const int grid = 4001;
  double half = m.band_radius / 2.0;
  double peak = 0.0;
  for (int i = 0; i < grid; ++i) {
    double z = c - half + (2.0 * half * i) / (grid - 1);
    peak = std::max(peak, total_rate(m, z));
  }
  s.peak_rate = peak;
  s.horizon = std::max(1.0, 1.0 / (2.0 * peak));

  double sup_slope = 0.0;
  for (int i = 0; i < grid; ++i) {
    double z = c - m.band_radius + (2.0 * m.band_radius * i) / (grid - 1);
    sup_slope = std::max(sup_slope, std::abs(drift_deriv(z)));
  }
  s.slope_sup = sup_slope;
  s.start_radius = m.band_radius * std::exp(-s.horizon * sup_slope) / 4.0;
  return s;
}

AssumptionReport check_assumptions(const ModelSpec& m, const Skeleton& s, int grid_size) {
  AssumptionReport r;
  r.c = s.c;
  r.drift_slope = s.drift_slope;
  r.attracting_ok = s.drift_slope < 0.0 && std::abs(drift(m, s.c)) <= 1e-8;

  const int g = std::max(grid_size, 16);
  const double band = m.band_radius;

  // Smallest |drift| away from c, on a compact window around the band.
  double eta = band / 2.0;
  double outer = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= g; ++i) {
    double z = s.c - 1.5 * band + (3.0 * band * i) / g;
    if (std::abs(z - s.c) >= eta) outer = std::min(outer, std::abs(drift(m, z)));
  }
  r.min_outer_drift = outer;
  r.outer_drift_ok = outer > 0.0;

  // Linear envelope, checked near the band and on a coarse far field.
  r.envelope_ok = true;
  for (std::size_t k = 0; k < m.jumps.size(); ++k) {
    EnvelopeCheck e;
    e.jump_size = m.jumps[k].size;
    e.envelope = m.jumps[k].envelope;
    e.worst_ratio = 0.0;
    auto probe = [&](double z) {
      double bound = e.envelope * (1.0 + std::abs(z - s.c));
      double ratio = bound > 0.0 ? m.rate(k, z) / bound
                                 : (m.rate(k, z) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      if (ratio > e.worst_ratio) {
        e.worst_ratio = ratio;
        e.worst_z = z;
      }
    };
    for (int i = 0; i <= g; ++i) probe(s.c - 6.0 * band + (12.0 * band * i) / g);
    for (int i = 0; i <= g; ++i) probe(s.c - 25.0 + (50.0 * i) / g);
    e.ok = e.worst_ratio <= 1.0 + 1e-9;
    r.envelope_ok = r.envelope_ok && e.ok;
    r.envelope.push_back(e);
  }

  // Rate floor on the band, relative to the rate at c, over active jumps.
  double eps = std::numeric_limits<double>::infinity();
  bool floor_ok = true;
  for (std::size_t k = 0; k < m.jumps.size(); ++k) {
    double at_c = m.rate(k, s.c);
    double inf_band = std::numeric_limits<double>::infinity();
    double sup_band = 0.0;
    for (int i = 0; i <= g; ++i) {
      double z = s.c - band + (2.0 * band * i) / g;
      double v = m.rate(k, z);
      inf_band = std::min(inf_band, v);
      sup_band = std::max(sup_band, v);
    }
    if (at_c > 0.0) {
      eps = std::min(eps, inf_band / at_c);
    } else if (sup_band > 0.0) {
      floor_ok = false;  // inactive at c but alive on the band
    }
  }
  r.epsilon = std::isfinite(eps) ? eps : 0.0;
  r.rate_floor_ok = floor_ok && r.epsilon > 0.0;

  // Smoothness constants by finite differences on the band.
  double h1 = 1e-5 * std::max(1.0, std::abs(s.c));
  double l1 = 0.0, l2 = 0.0;
  bool smooth = true;
  for (std::size_t k = 0; k < m.jumps.size(); ++k) {
    double at_c = m.rate(k, s.c);
    if (at_c <= 0.0) continue;
    double sup_d1 = 0.0, sup_d2 = 0.0;
    for (int i = 0; i <= g; ++i) {
      double z = s.c - band + (2.0 * band * i) / g;
      double d1 = deriv_or_fd(m.jumps[k].rate, m.jumps[k].rate_deriv, z);
      double d2 = (m.jumps[k].rate(z + h1) - 2.0 * m.jumps[k].rate(z) + m.jumps[k].rate(z - h1)) /
                  (h1 * h1);
      sup_d1 = std::max(sup_d1, std::abs(d1));
      sup_d2 = std::max(sup_d2, std::abs(d2));
    }
    l1 = std::max(l1, sup_d1 / at_c);
    l2 = std::max(l2, sup_d2 / (std::abs(m.jumps[k].size) * at_c));
    smooth = smooth && std::isfinite(l1) && std::isfinite(l2);
  }
  r.l1 = l1;
  r.l2 = l2;
  r.smooth_ok = smooth;
  return r;
}

long long snapped_floor(double x) {
  double nearest = std::nearbyint(x);
  if (std::abs(x - nearest) < 1e-9) return static_cast<long long>(nearest);
  return static_cast<long long>(std::floor(x));
}

double snapped_frac(double x) {
  double f = x - static_cast<double>(snapped_floor(x));
  if (f < 0.0) f = 0.0;
  if (f >= 1.0) f = std::nextafter(1.0, 0.0);
  return f;
}

namespace {

double param(const std::map<std::string, double>& p, const std::string& key, double dflt) {
  auto it = p.find(key);
  return it == p.end() ? dflt : it->second;
}

void apply_generic_overrides(ModelSpec& m, const std::map<std::string, double>& p) {
  m.alpha = param(p, "alpha", m.alpha);
  m.band_radius = param(p, "delta", m.band_radius);
  m.bracket.first = param(p, "bracket_lo", m.bracket.first);
  m.bracket.second = param(p, "bracket_hi", m.bracket.second);
}

void require_known_keys(const std::string& model, const std::map<std::string, double>& p,
                        const std::set<std::string>& known) {
  static const std::set<std::string> generic{"alpha", "delta", "bracket_lo", "bracket_hi"};
  for (const auto& [k, v] : p) {
    (void)v;
    if (!known.count(k) && !generic.count(k))
      throw ConfigError("model '" + model + "': unknown parameter '" + k + "'");
  }
}

ModelSpec make_immigration_death(const std::map<std::string, double>& p) {
  require_known_keys("immigration_death", p, {"a", "b"});
  double a = param(p, "a", 1.0), b = param(p, "b", 1.0);
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("immigration_death requires a > 0 and b > 0");
  double c = a / b;
  ModelSpec m;
  m.name = "immigration_death";
  m.jumps.push_back({1, [a](double) { return a; }, [](double) { return 0.0; }, a});
  m.jumps.push_back({-1, [b](double z) { return b * z; }, [b](double) { return b; },
                     b * std::max(1.0, c)});
  m.bracket = {0.0, 2.0 * c + 1.0};
  m.band_radius = std::min(1.0, c / 2.0);
  apply_generic_overrides(m, p);
  return m;
}

ModelSpec make_sis(const std::map<std::string, double>& p) {
  require_known_keys("sis", p, {"beta", "gamma"});
  double beta = param(p, "beta", 2.0), gamma = param(p, "gamma", 1.0);
  if (!(beta > gamma && gamma > 0.0)) throw ConfigError("sis requires beta > gamma > 0");
  double c = (beta - gamma) / beta;
  ModelSpec m;
  m.name = "sis";
  m.jumps.push_back({1, [beta](double z) { return beta * z * (1.0 - z); },
                     [beta](double z) { return beta * (1.0 - 2.0 * z); }, beta / 4.0});
  m.jumps.push_back({-1, [gamma](double z) { return gamma * z; },
                     [gamma](double) { return gamma; }, gamma * std::max(1.0, c)});
  m.bracket = {c / 4.0, (1.0 + c) / 2.0};
  m.band_radius = std::min(c, 1.0 - c) / 2.0;
  apply_generic_overrides(m, p);
  return m;
}

ModelSpec make_three_jump(const std::map<std::string, double>& p) {
  require_known_keys("three_jump", p, {"a", "b", "kappa"});
  double a = param(p, "a", 1.0), b = param(p, "b", 1.0), kappa = param(p, "kappa", 0.5);
  if (!(a > 0.0 && b > 0.0 && kappa > 0.0))
    throw ConfigError("three_jump requires a, b, kappa > 0");
  double c = (a + 2.0 * kappa) / b;
  ModelSpec m;
  m.name = "three_jump";
  m.jumps.push_back({1, [a](double) { return a; }, [](double) { return 0.0; }, a});
  m.jumps.push_back({2, [kappa](double) { return kappa; }, [](double) { return 0.0; }, kappa});
  m.jumps.push_back({-1, [b](double z) { return b * z; }, [b](double) { return b; },
                     b * std::max(1.0, c)});
  m.bracket = {0.0, 2.0 * c + 1.0};
  m.band_radius = std::min(1.0, c / 2.0);
  apply_generic_overrides(m, p);
  return m;
}

// Both rates decline with density, so the total jump rate is strictly
// decreasing near c; used to exercise couplings whose behaviour differs when
// a jump raises the total rate of the shifted process.
ModelSpec make_declining(const std::map<std::string, double>& p) {
  require_known_keys("declining", p, {"a", "b"});
  double a = param(p, "a", 2.0), b = param(p, "b", 1.0);
  if (!(a > b && b > 0.0)) throw ConfigError("declining requires a > b > 0");
  double c = (3.0 * a - 4.0 * b) / (a - b);
  if (!(c > 0.0 && c < 3.0)) throw ConfigError("declining: equilibrium outside (0,3)");
  ModelSpec m;
  m.name = "declining";
  m.jumps.push_back({1, [a](double z) { return a * std::max(0.0, 3.0 - z); },
                     [a](double z) { return z < 3.0 ? -a : 0.0; },
                     std::max(a * (3.0 - c), a)});
  m.jumps.push_back({-1, [b](double z) { return b * std::max(0.0, 4.0 - z); },
                     [b](double z) { return z < 4.0 ? -b : 0.0; },
                     std::max(b * (4.0 - c), b)});
  m.bracket = {std::max(0.05, c - 1.0), std::min(2.9, c + 0.8)};
  m.band_radius = std::min({1.0, (3.0 - c) / 2.0, c / 2.0});
  apply_generic_overrides(m, p);
  return m;
}

}  // namespace

ModelSpec make_model(const std::string& name, const std::map<std::string, double>& params) {
  ModelSpec m;
  if (name == "immigration_death") {
    m = make_immigration_death(params);
  } else if (name == "sis") {
    m = make_sis(params);
  } else if (name == "three_jump") {
    m = make_three_jump(params);
  } else if (name == "declining") {
    m = make_declining(params);
  } else {
    throw ConfigError("unknown model '" + name + "'");
  }
  m.validate();
  return m;
}

std::vector<std::string> builtin_models() {
  return {"immigration_death", "sis", "three_jump", "declining"};
}

}  // namespace poplim
