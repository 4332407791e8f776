#include "poplim/lattice.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "poplim/errors.hpp"

namespace poplim {

double LatticeDistribution::mass() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

double LatticeDistribution::mean() const {
  double s = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k)
    s += probs[k] * static_cast<double>(offset + static_cast<long long>(k));
  return s;
}

void LatticeDistribution::normalize() {
  double s = mass();
  if (s <= 0.0) throw InvariantViolation("cannot normalize a zero-mass lattice distribution");
  for (double& p : probs) p /= s;
}

void LatticeDistribution::validate(double tol) const {
  for (double p : probs)
    if (!(p >= 0.0)) throw InvariantViolation("negative or NaN probability entry");
  if (std::abs(mass() - 1.0) > tol)
    throw InvariantViolation("lattice distribution mass differs from 1 beyond tolerance");
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_csv(const LatticeDistribution& d, std::ostream& os) {
  os << "state,prob\n";
  for (std::size_t k = 0; k < d.probs.size(); ++k)
    os << (d.offset + static_cast<long long>(k)) << ',' << format_double(d.probs[k]) << '\n';
}

nlohmann::json to_json(const LatticeDistribution& d, long long n,
                       const std::string& model_name) {
  return nlohmann::json{
      {"offset", d.offset}, {"probs", d.probs}, {"n", n}, {"model", model_name}};
}

LatticeDistribution lattice_from_json(const nlohmann::json& j) {
  LatticeDistribution d;
  d.offset = j.at("offset").get<long long>();
  d.probs = j.at("probs").get<std::vector<double>>();
  return d;
}

}  // namespace poplim
