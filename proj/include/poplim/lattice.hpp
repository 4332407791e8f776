#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace poplim {

/// A probability vector on a contiguous integer window.  `offset` is the
/// absolute lattice state of probs[0]; states outside the window carry
/// implicit zeros.
struct LatticeDistribution {
  long long offset = 0;
  std::vector<double> probs;

  long long lo() const { return offset; }
  long long hi() const { return offset + static_cast<long long>(probs.size()) - 1; }
  bool contains(long long state) const { return state >= lo() && state <= hi(); }

  double at(long long state) const {
    if (!contains(state)) return 0.0;
    return probs[static_cast<std::size_t>(state - offset)];
  }

  double mass() const;
  double mean() const;
  void normalize();

  /// Convolution with the point mass at d, i.e. the whole window shifted by d.
  LatticeDistribution shifted(long long d) const {
    LatticeDistribution out = *this;
    out.offset += d;
    return out;
  }

  /// Checks nonnegativity and total mass 1 within tol; throws InvariantViolation.
  void validate(double tol = 1e-12) const;
};

void write_csv(const LatticeDistribution& d, std::ostream& os);

nlohmann::json to_json(const LatticeDistribution& d, long long n,
                       const std::string& model_name);
LatticeDistribution lattice_from_json(const nlohmann::json& j);

/// Deterministic shortest round-trip formatting for doubles; used by every
/// serializer so that identical inputs give byte-identical files.
std::string format_double(double x);

}  // namespace poplim
