#include "tubescore/errors.hpp"
#include "tubescore/kernels.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <random>

using namespace tubescore;

namespace {

Mat random_factor(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = z(rng);
  const Mat s = a * a.transpose() / n + Mat::Identity(n, n);
  return s.llt().matrixL();
}

}  // namespace

TEST(Compress, MergesTies) {
  const auto w = compress(Dataset::scalar({2, 0, 2, 1, 2, 0}), true);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w.values, (std::vector<double>{0, 1, 2}));
  EXPECT_EQ(w.counts, (std::vector<double>{2, 1, 3}));
  EXPECT_DOUBLE_EQ(w.total(), 6.0);
  EXPECT_EQ(compress(Dataset::scalar({2, 0, 2}), false).size(), 3u);
}

TEST(RawScore, SerialMatchesParallel) {
  const auto n = DensityFamily::normal();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  std::vector<double> x(5000);
  for (auto& v : x) v = z(rng);
  const auto w = compress(Dataset::scalar(x), false);
  Vec inv_f(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) inv_f[i] = 1.0 / n.density(Vec::Zero(1), w.row(i));
  std::vector<Vec> grid;
  for (int g = 0; g < 777; ++g) grid.push_back(Vec::Constant(1, -3 + 6.0 * g / 776));
  EXPECT_EQ(raw_score(n, grid, w, inv_f, Execution::Serial), raw_score(n, grid, w, inv_f, Execution::Parallel));
}

TEST(FieldSup, SerialMatchesParallelBitwise) {
  const Mat l = random_factor(60, 2);
  // Not a multiple of the block size, so the last block is ragged.
  const std::size_t reps = 3 * kFieldBlock + 17;
  EXPECT_EQ(simulate_field_sup(l, reps, 9, Execution::Serial), simulate_field_sup(l, reps, 9, Execution::Parallel));
}

TEST(FieldSup, BlockedMatchesNaive) {
  const Mat l = random_factor(40, 3);
  const auto blocked = simulate_field_sup(l, 600, 11, Execution::Parallel);
  const auto naive = simulate_field_sup_naive(l, 600, 11);
  ASSERT_EQ(blocked.size(), naive.size());
  for (std::size_t r = 0; r < naive.size(); ++r) EXPECT_NEAR(blocked[r], naive[r], 1e-10);
}

TEST(FieldSup, PrefixStable) {
  // Replicate r depends only on (seed, r), not on how many are drawn.
  const Mat l = random_factor(10, 4);
  const auto a = simulate_field_sup(l, 100, 5, Execution::Serial);
  const auto b = simulate_field_sup(l, 700, 5, Execution::Parallel);
  for (std::size_t r = 0; r < a.size(); ++r) EXPECT_EQ(a[r], b[r]);
}

TEST(ForEachIndex, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  for_each_index(hits.size(), Execution::Parallel, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ForEachIndex, RethrowsFirstError) {
  for (auto exec : {Execution::Serial, Execution::Parallel})
    EXPECT_THROW(for_each_index(50, exec,
                                [](std::size_t i) {
                                  if (i == 7) throw DegenerateFit("boom");
                                }),
                 DegenerateFit);
}
