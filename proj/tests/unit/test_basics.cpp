#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "langsup/error.hpp"
#include "langsup/io.hpp"
#include "langsup/numeric.hpp"
#include "langsup/rng.hpp"
#include "test_util.hpp"

namespace langsup {
namespace {

using testing::error_kind;

TEST(Error, ExitCodes) {
  EXPECT_EQ(exit_code(ErrorKind::kInternal), 1);
  EXPECT_EQ(exit_code(ErrorKind::kTransport), 2);
  EXPECT_EQ(exit_code(ErrorKind::kValidation), 3);
  EXPECT_EQ(exit_code(ErrorKind::kMismatch), 4);
}

TEST(Matrix, FromRowsRejectsRaggedInput) {
  EXPECT_EQ(error_kind([] { Matrix::from_rows({{1, 2}, {3}}); }), ErrorKind::kValidation);
  const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.transposed()(2, 1), 6.0);
}

TEST(Numeric, PairwiseSumMatchesNaiveSum) {
  Rng rng(7);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 100u, 1023u}) {
    Vector v(n);
    double naive = 0.0;
    for (auto& x : v) naive += (x = rng.uniform(-1, 1));
    EXPECT_NEAR(pairwise_sum(v), naive, 1e-12) << n;
  }
}

TEST(Numeric, PairwiseColumnSum) {
  const Matrix m = Matrix::from_rows({{1, 10}, {2, 20}, {3, 30}});
  EXPECT_EQ(pairwise_column_sum(m), (Vector{6, 60}));
}

TEST(Numeric, NormalizeRejectsZeroAndNonFinite) {
  Vector v{3, 4};
  ASSERT_TRUE(normalize_in_place(v));
  EXPECT_DOUBLE_EQ(v[0], 0.6);
  EXPECT_DOUBLE_EQ(v[1], 0.8);
  Vector z{0, 0};
  EXPECT_FALSE(normalize_in_place(z));
  Vector bad{NAN, 1};
  EXPECT_FALSE(normalize_in_place(bad));
  EXPECT_FALSE(all_finite(bad));
}

TEST(Rng, KnownSplitmixAndFnvValues) {
  // Reference values of the published algorithms.
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(fnv1a64(""), 0xCBF29CE484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xAF63DC4C8601EC8CULL);
}

TEST(Rng, DerivedSeedsDifferPerStage) {
  std::set<std::uint64_t> seeds;
  for (const char* stage : {"selection.random", "train.init", "train.shuffle", "data.synthetic"})
    seeds.insert(derive_seed(0, stage));
  EXPECT_EQ(seeds.size(), 4u);
  EXPECT_EQ(derive_seed(5, "train.init"), derive_seed(5, "train.init"));
  EXPECT_NE(derive_seed(5, "train.init"), derive_seed(6, "train.init"));
}

TEST(Rng, StreamsAreReproducibleAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform01();
    EXPECT_EQ(u, b.uniform01());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const auto k = a.uniform_index(7);
    EXPECT_EQ(k, b.uniform_index(7));
    EXPECT_LT(k, 7u);
  }
}

TEST(Rng, NormalMomentsAreRoughlyStandard) {
  Rng rng(1);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Io, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, AtomicWriteCreatesParentsAndReadsBack) {
  const auto dir = testing::scratch_dir("io");
  const auto path = dir / "a" / "b" / "file.txt";
  write_text_file_atomic(path, "hello\n");
  EXPECT_EQ(read_text_file(path), "hello\n");
  write_text_file_atomic(path, "again\n");
  EXPECT_EQ(read_text_file(path), "again\n");
  EXPECT_EQ(error_kind([&] { read_text_file(dir / "missing.txt"); }), ErrorKind::kValidation);
}

TEST(Io, FormatG9) {
  EXPECT_EQ(format_g9(0.1), "0.1");
  EXPECT_EQ(format_g9(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_g9(123456789012.0), "1.23456789e+11");
}

}  // namespace
}  // namespace langsup
