#pragma once

#include <iosfwd>
#include <utility>

#include "poplim/lattice.hpp"
#include "poplim/model.hpp"

namespace poplim {

/// Distances between a centred stationary law and its matched translated
/// Poisson at one population scale n, plus smoothness functionals of the law
/// itself.  Normalized columns divide out the proven decay rates.
struct DistanceReport {
  long long n = 0;
  double tv = 0;
  double sup_point = 0;
  double translate_tv = 0;
  double max_adjacent_diff = 0;
  double alpha = 1.0;

  double tv_norm() const;
  double sup_point_norm() const;
  double translate_tv_norm() const;
  double max_adjacent_diff_norm() const;

  void validate() const;  // sup_point <= 2 tv, max_adjacent_diff <= 2 translate_tv
};

double total_variation(const LatticeDistribution& p, const LatticeDistribution& q);
double sup_point_distance(const LatticeDistribution& p, const LatticeDistribution& q);

/// d_TV between p and its unit translate: half the l1 norm of adjacent
/// differences, boundaries included.
double translate_tv(const LatticeDistribution& p);
double max_adjacent_diff(const LatticeDistribution& p);

/// Solves the stationary law at scale n (AUTO window), centres it by
/// floor(nc) and compares against the centred Poisson with mean n*var_scale.
DistanceReport local_limit_error(const ModelSpec& m, const Skeleton& s, long long n);

/// (E[|Z/n - c| ; |Z/n - c| > delta],  E[(Z/n - c)^2 ; |Z/n - c| <= delta])
/// as exact sums over the window of pi (absolute states).
std::pair<double, double> tail_moments(const LatticeDistribution& pi, double c, double delta,
                                       long long n);

void write_report_csv_header(std::ostream& os);
void write_report_csv_row(const DistanceReport& r, std::ostream& os);

}  // namespace poplim
