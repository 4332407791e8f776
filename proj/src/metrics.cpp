#include "poplim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "poplim/errors.hpp"
#include "poplim/generator.hpp"
#include "poplim/stein.hpp"

namespace poplim {

namespace {

double log_n(long long n) { return std::log(static_cast<double>(std::max<long long>(n, 2))); }

}  // namespace

double DistanceReport::tv_norm() const {
  return tv * std::sqrt(static_cast<double>(n)) * std::pow(static_cast<double>(n), alpha / 2.0);
}

double DistanceReport::sup_point_norm() const {
  return sup_point * std::pow(static_cast<double>(n), (alpha + 1.0) / 2.0) / std::sqrt(log_n(n));
}

double DistanceReport::translate_tv_norm() const {
  return translate_tv * std::sqrt(static_cast<double>(n));
}

double DistanceReport::max_adjacent_diff_norm() const {
  return max_adjacent_diff * static_cast<double>(n) / std::sqrt(log_n(n));
}

void DistanceReport::validate() const {
  if (sup_point > 2.0 * tv + 1e-15)
    throw InvariantViolation("sup-point distance exceeds twice the total variation");
  if (max_adjacent_diff > 2.0 * translate_tv + 1e-15)
    throw InvariantViolation("adjacent difference exceeds twice the translate distance");
}

double total_variation(const LatticeDistribution& p, const LatticeDistribution& q) {
  long long lo = std::min(p.lo(), q.lo());
  long long hi = std::max(p.hi(), q.hi());
  double acc = 0.0;
  for (long long k = lo; k <= hi; ++k) acc += std::abs(p.at(k) - q.at(k));
  return 0.5 * acc;
}

double sup_point_distance(const LatticeDistribution& p, const LatticeDistribution& q) {
  long long lo = std::min(p.lo(), q.lo());
  long long hi = std::max(p.hi(), q.hi());
  double worst = 0.0;
  for (long long k = lo; k <= hi; ++k) worst = std::max(worst, std::abs(p.at(k) - q.at(k)));
  return worst;
}

double translate_tv(const LatticeDistribution& p) {
  double acc = 0.0;
  for (long long k = p.lo(); k <= p.hi() + 1; ++k) acc += std::abs(p.at(k) - p.at(k - 1));
  return 0.5 * acc;
}

double max_adjacent_diff(const LatticeDistribution& p) {
  double worst = 0.0;
  for (long long k = p.lo() - 1; k <= p.hi(); ++k)
    worst = std::max(worst, std::abs(p.at(k) - p.at(k + 1)));
  return worst;
}

DistanceReport local_limit_error(const ModelSpec& m, const Skeleton& s, long long n) {
  auto [gen, pi] = solve_stationary_auto(m, s, n, 1e-12);
  (void)gen;
  LatticeDistribution centred = pi.shifted(-snapped_floor(static_cast<double>(n) * s.c));
  CentredPoisson cp(static_cast<double>(n) * s.var_scale);
  LatticeDistribution po = cp.window();

  DistanceReport r;
  r.n = n;
  r.alpha = m.alpha;
  r.tv = total_variation(centred, po);
  r.sup_point = sup_point_distance(centred, po);
  r.translate_tv = translate_tv(centred);
  r.max_adjacent_diff = max_adjacent_diff(centred);
  return r;
}

std::pair<double, double> tail_moments(const LatticeDistribution& pi, double c, double delta,
                                       long long n) {
  double m_out = 0.0, m2_in = 0.0;
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < pi.probs.size(); ++k) {
    long long i = pi.offset + static_cast<long long>(k);
    double dev = static_cast<double>(i) / nn - c;
    if (std::abs(dev) > delta)
      m_out += pi.probs[k] * std::abs(dev);
    else
      m2_in += pi.probs[k] * dev * dev;
  }
  return {m_out, m2_in};
}

void write_report_csv_header(std::ostream& os) {
  os << "n,tv,sup_point,translate_tv,max_adjacent_diff,"
        "tv_norm,sup_point_norm,translate_tv_norm,max_adjacent_diff_norm\n";
}

void write_report_csv_row(const DistanceReport& r, std::ostream& os) {
  os << r.n << ',' << format_double(r.tv) << ',' << format_double(r.sup_point) << ','
     << format_double(r.translate_tv) << ',' << format_double(r.max_adjacent_diff) << ','
     << format_double(r.tv_norm()) << ',' << format_double(r.sup_point_norm()) << ','
     << format_double(r.translate_tv_norm()) << ',' << format_double(r.max_adjacent_diff_norm())
     << '\n';
}

}  // namespace poplim
