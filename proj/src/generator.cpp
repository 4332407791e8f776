#include "poplim/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "poplim/errors.hpp"

namespace poplim {

namespace {

double binom2(long long k) { return 0.5 * static_cast<double>(k) * (k - 1); }

}  // namespace

double TruncatedGenerator::rate(long long from, long long to) const {
  if (from < lo || from > hi) return 0.0;
  for (const auto& [tgt, r] : rows[index(from)])
    if (lo + tgt == to) return r;
  return 0.0;
}

double TruncatedGenerator::apply_row(long long i, const StateFn& h) const {
  const double hi_ = h(i);
  double acc = 0.0;
  for (const auto& [tgt, r] : rows[index(i)]) acc += r * (h(lo + tgt) - hi_);
  return acc;
}

long long auto_halfwidth(const Skeleton& s, long long n) {
  double ln = std::log(static_cast<double>(std::max<long long>(n, 3)));
  return static_cast<long long>(
      std::ceil(12.0 * std::sqrt(static_cast<double>(n) * s.var_scale * ln)));
}

TruncatedGenerator build_generator(const ModelSpec& m, const Skeleton& s, long long n,
                                   long long halfwidth) {
  if (n < 1) throw ConfigError("population scale n must be positive");
  long long w = halfwidth == kAutoHalfwidth ? auto_halfwidth(s, n) : halfwidth;
  int maxj = m.max_jump();
  if (w < maxj)
    throw WindowTooSmall("window halfwidth " + std::to_string(w) +
                         " is smaller than the largest jump " + std::to_string(maxj));

  long long center = snapped_floor(static_cast<double>(n) * s.c);
  long long lo = center - w, hi = center + w;

  // Keep only the contiguous run of states with positive total rate around
  // the centre; a state where every rate vanishes would absorb the chain.
  auto active = [&](long long i) {
    return total_rate(m, static_cast<double>(i) / static_cast<double>(n)) > 0.0;
  };
  if (!active(center))
    throw SolverError("no activity at the centre state " + std::to_string(center));
  while (lo < center && !active(lo)) ++lo;
  while (hi > center && !active(hi)) --hi;
  for (long long i = center; i >= lo; --i)
    if (!active(i)) {
      lo = i + 1;
      break;
    }
  for (long long i = center; i <= hi; ++i)
    if (!active(i)) {
      hi = i - 1;
      break;
    }

  TruncatedGenerator g;
  g.n = n;
  g.lo = lo;
  g.hi = hi;
  g.rows.resize(static_cast<std::size_t>(hi - lo + 1));
  g.diag.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (long long i = lo; i <= hi; ++i) {
    double z = static_cast<double>(i) / static_cast<double>(n);
    double out = 0.0;
    auto& row = g.rows[g.index(i)];
    for (std::size_t k = 0; k < m.jumps.size(); ++k) {
      long long tgt = i + m.jumps[k].size;
      if (tgt < lo || tgt > hi) continue;  // suppressed, diagonal untouched
      double r = static_cast<double>(n) * m.rate(k, z);
      if (r <= 0.0) continue;
      row.emplace_back(static_cast<std::int32_t>(tgt - lo), r);
      out += r;
    }
    g.diag[g.index(i)] = -out;
  }
  return g;
}

double apply_generator(const ModelSpec& m, long long n, const StateFn& h, long long i) {
  double z = static_cast<double>(i) / static_cast<double>(n);
  double acc = 0.0;
  const double hi_ = h(i);
  for (std::size_t k = 0; k < m.jumps.size(); ++k)
    acc += static_cast<double>(n) * m.rate(k, z) * (h(i + m.jumps[k].size) - hi_);
  return acc;
}

double coeff_up(const StateFn& g, int j, long long i) {
  auto dg = [&](long long t) { return g(t) - g(t - 1); };
  double acc = -binom2(j) * dg(i);
  for (int k = 1; k <= j - 1; ++k) acc += k * dg(i + j - k);
  return acc;
}

double coeff_up_curv(const StateFn& g, int j, long long i) {
  auto d2g = [&](long long t) { return g(t) - 2.0 * g(t - 1) + g(t - 2); };
  double acc = 0.0;
  for (int k = 2; k <= j; ++k) acc += binom2(k) * d2g(i + j - k + 1);
  return acc;
}

double coeff_down(const StateFn& g, int j, long long i) {
  auto dg = [&](long long t) { return g(t) - g(t - 1); };
  double acc = binom2(j) * dg(i);
  for (int k = 1; k <= j - 1; ++k) acc -= k * dg(i - j + k);
  return acc;
}

double coeff_down_curv(const StateFn& g, int j, long long i) {
  auto d2g = [&](long long t) { return g(t) - 2.0 * g(t - 1) + g(t - 2); };
  double acc = 0.0;
  for (int k = 2; k <= j; ++k) acc += binom2(k) * d2g(i - j + k);
  return acc;
}

double apply_generator_decomposed(const ModelSpec& m, long long n, const StateFn& h,
                                  long long i) {
  StateFn g = [&h](long long t) { return h(t + 1) - h(t); };
  double z = static_cast<double>(i) / static_cast<double>(n);
  double f = drift(m, z);
  double s2 = variance_rate(m, z);
  double dg = g(i) - g(i - 1);

  double value = 0.5 * n * s2 * dg + n * f * g(i);

  // Remainder: drift correction plus jump-excess terms for |j| >= 2.
  double rem = -0.5 * n * f * dg;
  for (std::size_t k = 0; k < m.jumps.size(); ++k) {
    int j = m.jumps[k].size;
    double r = static_cast<double>(n) * m.rate(k, z);
    if (j >= 2)
      rem += coeff_up(g, j, i) * r;
    else if (j <= -2)
      rem -= coeff_down(g, -j, i) * r;
  }
  return value + rem;
}

namespace {

// (pi Q)(target) for every target, by scattering the rows.
std::vector<double> pi_q(const TruncatedGenerator& gen, const std::vector<double>& pi) {
  std::vector<double> acc(gen.size(), 0.0);
  for (std::size_t i = 0; i < gen.size(); ++i) {
    acc[i] += pi[i] * gen.diag[i];
    for (const auto& [tgt, r] : gen.rows[i]) acc[static_cast<std::size_t>(tgt)] += pi[i] * r;
  }
  return acc;
}

double residual_inf(const TruncatedGenerator& gen, const std::vector<double>& pi) {
  double worst = 0.0;
  for (double v : pi_q(gen, pi)) worst = std::max(worst, std::abs(v));
  return worst;
}

bool power_iteration(const TruncatedGenerator& gen, std::vector<double>& pi, double tol,
                     long max_iters) {
  double qmax = 0.0;
  for (double d : gen.diag) qmax = std::max(qmax, -d);
  if (qmax <= 0.0) return false;
  std::vector<double> next(gen.size());
  for (long it = 0; it < max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < gen.size(); ++i) {
      next[i] += pi[i] * (1.0 + gen.diag[i] / qmax);
      for (const auto& [tgt, r] : gen.rows[i])
        next[static_cast<std::size_t>(tgt)] += pi[i] * r / qmax;
    }
    double s = 0.0;
    for (double v : next) s += v;
    for (double& v : next) v /= s;
    pi.swap(next);
    if (it % 64 == 63 && residual_inf(gen, pi) <= tol) return true;
  }
  return residual_inf(gen, pi) <= tol;
}

}  // namespace

LatticeDistribution stationary_distribution(const TruncatedGenerator& gen, double tol) {
  const std::size_t w = gen.size();
  if (w == 0) throw SolverError("empty generator window");
  if (w == 1) {
    LatticeDistribution d;
    d.offset = gen.lo;
    d.probs = {1.0};
    return d;
  }

  // Q^T x = 0 with one balance equation replaced by normalization.
  const std::size_t norm_row = gen.size() / 2;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * w);
  for (std::size_t i = 0; i < w; ++i) {
    if (norm_row != i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), gen.diag[i]);
    for (const auto& [tgt, r] : gen.rows[i]) {
      if (static_cast<std::size_t>(tgt) == norm_row) continue;
      trip.emplace_back(tgt, static_cast<int>(i), r);
    }
  }
  for (std::size_t i = 0; i < w; ++i)
    trip.emplace_back(static_cast<int>(norm_row), static_cast<int>(i), 1.0);

  Eigen::SparseMatrix<double> a(static_cast<int>(w), static_cast<int>(w));
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();

  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<int>(w));
  b[static_cast<int>(norm_row)] = 1.0;

  std::vector<double> pi(w, 1.0 / static_cast<double>(w));
  bool direct_ok = false;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() == Eigen::Success) {
    Eigen::VectorXd x = lu.solve(b);
    // Two rounds of iterative refinement to push the balance residual down
    // to rounding level.
    for (int round = 0; round < 2; ++round) {
      Eigen::VectorXd r = b - a * x;
      x += lu.solve(r);
    }
    double worst_neg = 0.0;
    for (int i = 0; i < x.size(); ++i) worst_neg = std::min(worst_neg, x[i]);
    if (worst_neg > -1e-9) {
      for (std::size_t i = 0; i < w; ++i) pi[i] = std::max(0.0, x[static_cast<int>(i)]);
      double s = 0.0;
      for (double v : pi) s += v;
      if (s > 0.0) {
        for (double& v : pi) v /= s;
        direct_ok = residual_inf(gen, pi) <= tol;
      }
    }
  }

  if (!direct_ok) {
    if (!power_iteration(gen, pi, tol, 200000)) {
      if (lu.info() != Eigen::Success)
        throw SingularSystem("stationary solve: factorization failed and iteration stalled");
      throw NotConverged("stationary solve: residual above tolerance");
    }
  }

  LatticeDistribution d;
  d.offset = gen.lo;
  d.probs = std::move(pi);
  return d;
}

LatticeDistribution evolve(const TruncatedGenerator& gen, const LatticeDistribution& init,
                           double t, double tol) {
  if (t < 0.0) throw ConfigError("transient time must be nonnegative");
  if (init.lo() < gen.lo || init.hi() > gen.hi)
    throw ConfigError("initial law lies outside the generator window");

  std::vector<double> p(gen.size(), 0.0);
  for (std::size_t k = 0; k < init.probs.size(); ++k)
    p[gen.index(init.offset + static_cast<long long>(k))] = init.probs[k];

  double qmax = 0.0;
  for (double d : gen.diag) qmax = std::max(qmax, -d);
  double qt = qmax * t;

  LatticeDistribution out;
  out.offset = gen.lo;
  if (qt == 0.0) {
    out.probs = std::move(p);
    return out;
  }

  // Poisson(qt) weights on [mlo, mhi] by recurrence from the mode, then
  // normalized; the neglected tail mass is far below tol.
  long long mode = static_cast<long long>(std::floor(qt));
  double cut = std::min(tol, 1e-12) * 1e-4;
  std::vector<double> wts;
  long long mlo = mode, mhi = mode;
  {
    double wmode = 1.0;
    std::vector<double> down, up;
    double v = wmode;
    for (long long m = mode; m > 0; --m) {
      v *= static_cast<double>(m) / qt;
      if (v < cut) break;
      down.push_back(v);
    }
    v = wmode;
    for (long long m = mode + 1;; ++m) {
      v *= qt / static_cast<double>(m);
      if (v < cut) break;
      up.push_back(v);
    }
    mlo = mode - static_cast<long long>(down.size());
    mhi = mode + static_cast<long long>(up.size());
    wts.assign(down.rbegin(), down.rend());
    wts.push_back(wmode);
    wts.insert(wts.end(), up.begin(), up.end());
    double s = 0.0;
    for (double x : wts) s += x;
    for (double& x : wts) x /= s;
  }

  std::vector<double> acc(gen.size(), 0.0), next(gen.size());
  for (long long m = 0; m <= mhi; ++m) {
    if (m >= mlo) {
      double wm = wts[static_cast<std::size_t>(m - mlo)];
      for (std::size_t i = 0; i < gen.size(); ++i) acc[i] += wm * p[i];
    }
    if (m == mhi) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < gen.size(); ++i) {
      next[i] += p[i] * (1.0 + gen.diag[i] / qmax);
      for (const auto& [tgt, r] : gen.rows[i])
        next[static_cast<std::size_t>(tgt)] += p[i] * r / qmax;
    }
    p.swap(next);
  }
  out.probs = std::move(acc);
  return out;
}

LatticeDistribution transient_distribution(const TruncatedGenerator& gen, long long init,
                                           double t, double tol) {
  if (init < gen.lo || init > gen.hi)
    throw ConfigError("initial state outside the generator window");
  LatticeDistribution point;
  point.offset = init;
  point.probs = {1.0};
  return evolve(gen, point, t, tol);
}

double dynkin_residual(const TruncatedGenerator& gen, const LatticeDistribution& pi,
                       const StateFn& h) {
  double acc = 0.0;
  for (std::size_t k = 0; k < pi.probs.size(); ++k) {
    long long i = pi.offset + static_cast<long long>(k);
    if (pi.probs[k] == 0.0) continue;
    acc += pi.probs[k] * gen.apply_row(i, h);
  }
  return std::abs(acc);
}

std::pair<TruncatedGenerator, LatticeDistribution> solve_stationary_auto(
    const ModelSpec& m, const Skeleton& s, long long n, double tol) {
  long long w = auto_halfwidth(s, n);
  const int maxj = m.max_jump();
  for (int round = 0; round < 8; ++round) {
    TruncatedGenerator gen = build_generator(m, s, n, w);
    LatticeDistribution pi = stationary_distribution(gen, tol);

    long long center = snapped_floor(static_cast<double>(n) * s.c);
    bool lo_trimmed = gen.lo > center - w;
    bool hi_trimmed = gen.hi < center + w;
    double edge = 0.0;
    if (!lo_trimmed)
      for (long long i = gen.lo; i < gen.lo + maxj; ++i) edge = std::max(edge, pi.at(i));
    if (!hi_trimmed)
      for (long long i = gen.hi - maxj + 1; i <= gen.hi; ++i) edge = std::max(edge, pi.at(i));
    if (edge < 1e-12) return {std::move(gen), std::move(pi)};
    w = static_cast<long long>(std::ceil(1.5 * static_cast<double>(w)));
  }
  throw NotConverged("stationary window kept significant boundary mass after expansion");
}

}  // namespace poplim
