#pragma once

// Hot loops with an OpenMP implementation and a serial reference. Both produce
// bit-identical results: work is split so each output is computed by one
// thread in a fixed order.

#include "tubescore/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace tubescore {

enum class Execution { Serial, Parallel };

/// Observations with multiplicities; discrete data collapse to their distinct values.
struct WeightedData {
  int dim = 1;
  std::vector<double> values;  // row-major
  std::vector<double> counts;

  std::size_t size() const { return counts.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  double total() const;
};

WeightedData compress(const Dataset& data, bool merge_ties);

/// S(theta_g) = sum_i c_i (psi(x_i; theta_g) inv_f_i - 1) at every grid point.
Vec raw_score(const DensityFamily& family, std::span<const Vec> grid, const WeightedData& data, const Vec& inv_f,
              Execution exec);

/// Block size of the field simulation. Replicate r always sits in column
/// r % kFieldBlock of its block, whatever the execution mode.
inline constexpr std::size_t kFieldBlock = 256;

/// Suprema over the grid of R draws of L z, z standard normal from the stream
/// derive_seed(seed, r).
std::vector<double> simulate_field_sup(const Mat& chol, std::size_t replicates, std::uint64_t seed, Execution exec);

/// Replicate-at-a-time version with an explicit triangular product; agrees
/// with simulate_field_sup up to rounding.
std::vector<double> simulate_field_sup_naive(const Mat& chol, std::size_t replicates, std::uint64_t seed);

/// Runs body(i) for i in [0, n). The first exception thrown by any body is
/// rethrown after the loop.
void for_each_index(std::size_t n, Execution exec, const std::function<void(std::size_t)>& body);

}  // namespace tubescore
