#pragma once

#include <cstdint>
#include <vector>

#include "maglab/grid.hpp"

namespace maglab {

struct FourierOptions {
  int K = 32;              ///< modes with 0 < |k| <= K, k in Z^2
  double epsilon = 0.1;    ///< weights (1 + |k|)^-(1 + epsilon)
  double amplitude = 1.0;  ///< overall factor on the oscillating part
  double offset = 0.0;
};

/// Seeded random real trigonometric polynomial
///   B(x) = offset + amplitude * sum_k w_k (a_k cos(k.x) + b_k sin(k.x)),  a_k, b_k ~ N(0, 1).
/// Finite H^1 norm, 2 pi periodic.
class FourierField {
 public:
  FourierField(std::uint64_t seed, FourierOptions opt = {});

  std::uint64_t seed() const { return seed_; }
  const FourierOptions& options() const { return opt_; }
  double offset() const { return opt_.offset; }

  double operator()(Point p) const;
  Vec2 gradient(Point p) const;
  /// Values at every grid node (separable evaluation).
  ScalarField sample(const GridPtr& grid) const;
  /// Shift the offset so that the minimum over the nodes of `probe` equals c.
  void shift_to_floor(double c, const GridPtr& probe);

 private:
  std::uint64_t seed_;
  FourierOptions opt_;
  int n_;                         // 2K + 1
  std::vector<Complex> coef_;     // coef_[(k2 + K) * n + (k1 + K)]; B = offset + Re sum c_k e^{i k.x}
};

}  // namespace maglab
