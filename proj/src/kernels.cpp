#include "tubescore/kernels.hpp"

#include "tubescore/errors.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <random>

namespace tubescore {

double WeightedData::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

WeightedData compress(const Dataset& data, bool merge_ties) {
  WeightedData out;
  out.dim = data.dim();
  if (!merge_ties) {
    out.values = data.values();
    out.counts.assign(data.size(), 1.0);
    return out;
  }
  std::map<std::vector<double>, double> tally;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = data.row(i);
    tally[std::vector<double>(r.begin(), r.end())] += 1.0;
  }
  for (const auto& [key, count] : tally) {
    out.values.insert(out.values.end(), key.begin(), key.end());
    out.counts.push_back(count);
  }
  return out;
}

namespace {

double score_at(const DensityFamily& family, const Vec& theta, const WeightedData& data, const Vec& inv_f) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    s += data.counts[i] * (family.density(theta, data.row(i)) * inv_f[static_cast<Eigen::Index>(i)] - 1.0);
  return s;
}

}  // namespace

Vec raw_score(const DensityFamily& family, std::span<const Vec> grid, const WeightedData& data, const Vec& inv_f,
              Execution exec) {
  const auto g = static_cast<std::ptrdiff_t>(grid.size());
  Vec out(g);
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t j = 0; j < g; ++j) out[j] = score_at(family, grid[j], data, inv_f);
    return out;
  }
  std::exception_ptr error;
  std::mutex guard;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < g; ++j) {
    try {
      out[j] = score_at(family, grid[j], data, inv_f);
    } catch (...) {
      std::lock_guard lock(guard);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

namespace {

void fill_normals(Mat& z, std::size_t col, std::uint64_t stream_seed) {
  std::mt19937_64 rng(stream_seed);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, static_cast<Eigen::Index>(col)) = normal(rng);
}

void simulate_block(const Mat& chol, std::size_t block, std::size_t replicates, std::uint64_t seed,
                    std::vector<double>& sups) {
  const auto g = chol.rows();
  Mat z = Mat::Zero(g, static_cast<Eigen::Index>(kFieldBlock));
  const std::size_t first = block * kFieldBlock;
  const std::size_t count = std::min(kFieldBlock, replicates - first);
  for (std::size_t c = 0; c < count; ++c) fill_normals(z, c, derive_seed(seed, first + c));
  const Mat y = chol.triangularView<Eigen::Lower>() * z;
  for (std::size_t c = 0; c < count; ++c) sups[first + c] = y.col(static_cast<Eigen::Index>(c)).maxCoeff();
}

}  // namespace

std::vector<double> simulate_field_sup(const Mat& chol, std::size_t replicates, std::uint64_t seed, Execution exec) {
  std::vector<double> sups(replicates);
  const auto blocks = static_cast<std::ptrdiff_t>((replicates + kFieldBlock - 1) / kFieldBlock);
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t b = 0; b < blocks; ++b) simulate_block(chol, static_cast<std::size_t>(b), replicates, seed, sups);
    return sups;
  }
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) simulate_block(chol, static_cast<std::size_t>(b), replicates, seed, sups);
  return sups;
}

std::vector<double> simulate_field_sup_naive(const Mat& chol, std::size_t replicates, std::uint64_t seed) {
  const auto g = chol.rows();
  std::vector<double> sups(replicates);
  Mat z(g, 1);
  for (std::size_t r = 0; r < replicates; ++r) {
    fill_normals(z, 0, derive_seed(seed, r));
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < g; ++i) {
      double y = 0.0;
      for (Eigen::Index k = 0; k <= i; ++k) y += chol(i, k) * z(k, 0);
      best = std::max(best, y);
    }
    sups[r] = best;
  }
  return sups;
}

void for_each_index(std::size_t n, Execution exec, const std::function<void(std::size_t)>& body) {
  if (exec == Execution::Serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex guard;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace tubescore
