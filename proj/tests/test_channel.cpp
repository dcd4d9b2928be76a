#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "leakmeter/channel.hpp"
#include "leakmeter/error.hpp"
#include "leakmeter/oracle.hpp"
#include "test_oracles.hpp"

namespace leakmeter {
namespace {

using testing::Matrix;

std::vector<std::string> labels(const char* prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

Channel make_channel(const Matrix& w) {
  return Channel::from_rows(labels("s", w.size()), labels("o", w.front().size()), w);
}

Channel identity(std::size_t n) {
  Matrix w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) w[i][i] = 1.0;
  return make_channel(w);
}

const Matrix kZ = {{1.0, 0.0}, {0.5, 0.5}};

TEST(Channel, ValidatesRows) {
  EXPECT_THROW(make_channel({{0.5, 0.6}}), InvalidArgument);
  EXPECT_THROW(make_channel({{1.5, -0.5}}), InvalidArgument);
  EXPECT_THROW(Channel({}, {"o"}, {}), InvalidArgument);
  EXPECT_THROW(Channel({"a", "a"}, {"o"}, {1.0, 1.0}), InvalidArgument);
  EXPECT_NO_THROW(make_channel({{0.5 + 5e-10, 0.5}}));
}

TEST(JointFrom, Examples) {
  const auto id = identity(4);
  const auto j = joint_from(id, DiscreteDistribution::uniform(id.secrets()));
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(j.at(r, c), r == c ? 0.25 : 0.0);
  }

  const auto z = make_channel(kZ);
  const auto point = joint_from(z, DiscreteDistribution::point_mass(z.secrets(), 1));
  EXPECT_EQ(point.at(1, 0), 0.5);
  EXPECT_EQ(point.at(1, 1), 0.5);
  EXPECT_EQ(point.at(0, 0), 0.0);

  const auto b = make_channel(testing::bsc(0.1));
  const auto jb = joint_from(b, DiscreteDistribution::uniform(b.secrets()));
  EXPECT_NEAR(jb.at(0, 0), 0.45, 1e-15);
  EXPECT_NEAR(jb.at(0, 1), 0.05, 1e-15);
  EXPECT_NEAR(jb.at(1, 0), 0.05, 1e-15);
  EXPECT_NEAR(jb.at(1, 1), 0.45, 1e-15);

  EXPECT_THROW(joint_from(b, DiscreteDistribution::uniform({"x", "y"})), InvalidArgument);
}

TEST(IsRowSymmetric, Examples) {
  EXPECT_TRUE(is_row_symmetric(make_channel(testing::bsc(0.2))));
  EXPECT_FALSE(is_row_symmetric(make_channel(kZ)));
  for (std::size_t k : {3u, 4u, 5u}) {
    for (int b = 0; b <= 10; ++b) {
      const double bias = b / 10.0;
      EXPECT_TRUE(is_row_symmetric(oracle_dc_channel(k, bias))) << k << " " << bias;
      EXPECT_TRUE(is_row_symmetric(make_channel(testing::dc_channel_by_rules(k, bias)))) << k << " " << bias;
    }
  }
}

TEST(SymmetricCapacity, Examples) {
  for (std::size_t n : {2u, 3u, 7u, 16u}) {
    const auto r = symmetric_capacity(identity(n));
    EXPECT_NEAR(r.capacity_bits, std::log2(static_cast<double>(n)), 1e-12);
    EXPECT_EQ(r.method, CapacityMethod::symmetric);
    EXPECT_TRUE(r.converged);
    for (double p : r.input_distribution.probs()) EXPECT_NEAR(p, 1.0 / static_cast<double>(n), 1e-15);
  }
  EXPECT_NEAR(symmetric_capacity(make_channel(testing::bsc(0.5))).capacity_bits, 0.0, 1e-12);
  // 1 - H_b(0.1), frozen from the closed form.
  EXPECT_NEAR(symmetric_capacity(make_channel(testing::bsc(0.1))).capacity_bits, 0.5310044064107188, 1e-12);
  EXPECT_NEAR(symmetric_capacity(make_channel(testing::bsc(0.1))).capacity_bits, 1.0 - testing::binary_entropy(0.1),
              1e-12);
}

TEST(SymmetricCapacity, RejectsAsymmetricChannels) {
  EXPECT_THROW(symmetric_capacity(make_channel(kZ)), NotRowSymmetric);
  // Rows are permutations of each other, but the optimum is p = (1/4, 1/4, 1/2).
  const auto skew = make_channel({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
  EXPECT_TRUE(is_row_symmetric(skew));
  EXPECT_FALSE(uniform_input_is_optimal(skew));
  EXPECT_THROW(symmetric_capacity(skew), NotRowSymmetric);
  const auto r = capacity(skew);
  EXPECT_EQ(r.method, CapacityMethod::arimoto_blahut);
  EXPECT_NEAR(r.capacity_bits, 1.0, 1e-8);
}

TEST(ArimotoBlahut, Examples) {
  const auto noiseless = arimoto_blahut(make_channel(testing::bsc(0.0)));
  EXPECT_NEAR(noiseless.capacity_bits, 1.0, 1e-12);
  EXPECT_NEAR(noiseless.input_distribution[0], 0.5, 1e-12);
  EXPECT_TRUE(noiseless.converged);
  EXPECT_EQ(noiseless.method, CapacityMethod::arimoto_blahut);

  EXPECT_NEAR(arimoto_blahut(make_channel(testing::bsc(0.5))).capacity_bits, 0.0, 1e-12);

  const auto z = arimoto_blahut(make_channel(kZ));
  EXPECT_TRUE(z.converged);
  EXPECT_NEAR(z.capacity_bits, testing::grid_capacity(kZ), 1e-4);
  // Grid maximum (attained at p(s0) = 0.6), frozen.
  EXPECT_NEAR(z.capacity_bits, 0.32192809488736235, 1e-4);
  EXPECT_NEAR(z.input_distribution[0], 0.6, 1e-3);
}

TEST(ArimotoBlahut, RejectsBadParametersAndReportsNonConvergence) {
  const auto z = make_channel(kZ);
  EXPECT_THROW(arimoto_blahut(z, 0.0, 10), InvalidArgument);
  EXPECT_THROW(arimoto_blahut(z, 1e-9, 0), InvalidArgument);
  const auto r = arimoto_blahut(z, 1e-15, 1);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_GT(r.capacity_bits, 0.3);
  ArimotoBlahutOptions bad_start;
  bad_start.initial = {1.0, 0.0};
  EXPECT_THROW(arimoto_blahut(z, bad_start), InvalidArgument);
}

TEST(ArimotoBlahut, DropsNeverEmittedObservables) {
  const auto with_zero = make_channel({{0.7, 0.0, 0.3}, {0.1, 0.0, 0.9}});
  const auto without = make_channel({{0.7, 0.3}, {0.1, 0.9}});
  EXPECT_NEAR(arimoto_blahut(with_zero).capacity_bits, arimoto_blahut(without).capacity_bits, 1e-15);
  EXPECT_EQ(with_zero.without_empty_columns().cols(), 2u);
}

TEST(Capacity, Dispatch) {
  const auto b = make_channel(testing::bsc(0.1));
  const auto sym = capacity(b);
  EXPECT_EQ(sym.method, CapacityMethod::symmetric);
  EXPECT_NEAR(sym.capacity_bits, capacity(b, CapacityMethod::arimoto_blahut).capacity_bits, 1e-9);

  EXPECT_EQ(capacity(make_channel(kZ)).method, CapacityMethod::arimoto_blahut);
  EXPECT_THROW(capacity(make_channel(kZ), CapacityMethod::symmetric), NotRowSymmetric);

  const auto dc = capacity(oracle_dc_channel(3, 1.0));
  EXPECT_EQ(dc.method, CapacityMethod::symmetric);
  EXPECT_NEAR(dc.capacity_bits, std::log2(3.0), 1e-12);

  // A single secret is trivially symmetric.
  EXPECT_EQ(capacity(make_channel({{0.2, 0.8}})).method, CapacityMethod::symmetric);
}

TEST(CapacityProperty, MutualInformationNeverExceedsCapacity) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = testing::random_channel(rng, size(rng), size(rng));
    const auto ch = make_channel(w);
    const double c = capacity(ch).capacity_bits;
    for (int i = 0; i < 5; ++i) {
      const DiscreteDistribution input(ch.secrets(), testing::random_distribution(rng, ch.rows()));
      EXPECT_LE(mutual_information(joint_from(ch, input)), c + kDefaultAbTolerance);
    }
  }
}

TEST(CapacityProperty, ArimotoBlahutIsMonotone) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> size(2, 7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ch = make_channel(testing::random_channel(rng, size(rng), size(rng)));
    double previous = -1.0;
    ArimotoBlahutOptions options;
    options.observer = [&](std::size_t, double c) {
      EXPECT_GE(c, previous - 1e-12);
      previous = c;
    };
    arimoto_blahut(ch, options);
  }
}

TEST(CapacityProperty, LatinSymmetricChannelsAgreeAcrossSolvers) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> size(2, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ch = make_channel(testing::random_latin_symmetric_channel(rng, size(rng)));
    ASSERT_TRUE(is_row_symmetric(ch));
    EXPECT_NEAR(symmetric_capacity(ch).capacity_bits, arimoto_blahut(ch).capacity_bits, 1e-6);
  }
}

TEST(CapacityProperty, RowPermutationChannelsStillSolvedExactlyByAuto) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<std::size_t> size(2, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto w = testing::random_row_permutation_channel(rng, size(rng), size(rng));
    const auto ch = make_channel(w);
    EXPECT_NEAR(capacity(ch).capacity_bits, arimoto_blahut(ch).capacity_bits, 1e-6);
  }
}

TEST(CapacityProperty, IdenticalRowsCarryNothing) {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto row = testing::random_channel(rng, 1, size(rng)).front();
    const Matrix w(size(rng), row);
    EXPECT_NEAR(capacity(make_channel(w)).capacity_bits, 0.0, 1e-9);
    EXPECT_NEAR(arimoto_blahut(make_channel(w)).capacity_bits, 0.0, 1e-9);
  }
}

TEST(CapacityProperty, PermutationInvariant) {
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<std::size_t> size(2, 6);
  for (int trial = 0; trial < 100; ++trial) {
    auto w = testing::random_channel(rng, size(rng), size(rng));
    const double c = arimoto_blahut(make_channel(w), 1e-13, 200000).capacity_bits;
    std::shuffle(w.begin(), w.end(), rng);
    std::vector<std::size_t> cols(w.front().size());
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(cols.begin(), cols.end(), rng);
    Matrix permuted = w;
    for (std::size_t s = 0; s < w.size(); ++s) {
      for (std::size_t o = 0; o < cols.size(); ++o) permuted[s][o] = w[s][cols[o]];
    }
    EXPECT_NEAR(arimoto_blahut(make_channel(permuted), 1e-13, 200000).capacity_bits, c, 1e-9);
  }
}

TEST(CapacityProperty, RandomStartsReachTheSameCapacity) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> size(2, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ch = make_channel(testing::random_channel(rng, size(rng), size(rng)));
    const double reference = arimoto_blahut(ch).capacity_bits;
    for (int start = 0; start < 5; ++start) {
      ArimotoBlahutOptions options;
      options.initial = testing::random_distribution(rng, ch.rows(), true);
      EXPECT_NEAR(arimoto_blahut(ch, options).capacity_bits, reference, 10 * kDefaultAbTolerance);
    }
  }
}

TEST(CapacityProperty, UpperBoundBracketsCapacity) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ch = make_channel(testing::random_channel(rng, 4, 5));
    const auto r = arimoto_blahut(ch);
    EXPECT_GE(r.upper_bound_bits, r.capacity_bits - 1e-12);
    EXPECT_LE(r.upper_bound_bits - r.capacity_bits, 1e-3);
  }
}

TEST(CapacityResult, WithinAlphabetBounds) {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<std::size_t> size(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ch = make_channel(testing::random_channel(rng, size(rng), size(rng)));
    const auto r = capacity(ch);
    const double bound = std::min(std::log2(static_cast<double>(ch.rows())), std::log2(static_cast<double>(ch.cols())));
    EXPECT_GE(r.capacity_bits, 0.0);
    EXPECT_LE(r.capacity_bits, bound + 1e-9);
    EXPECT_EQ(r.input_distribution.alphabet(), ch.secrets());
  }
}

TEST(ChannelJson, RoundTripAndErrors) {
  const auto dc = oracle_dc_channel(3, 0.3);
  const auto back = Channel::from_json(dc.to_json());
  EXPECT_EQ(back.secrets(), dc.secrets());
  EXPECT_EQ(back.observables(), dc.observables());
  EXPECT_EQ(back.matrix(), dc.matrix());
  EXPECT_THROW(Channel::from_json("{\"secrets\": [\"a\"]}"), IoError);
  EXPECT_THROW(Channel::from_json("not json"), IoError);
  EXPECT_THROW(Channel::from_json(R"({"secrets":["a"],"observables":["x","y"],"matrix":[[0.5,0.6]]})"),
               InvalidArgument);
}

TEST(MaxAbsDifference, AlignsByLabel) {
  const auto a = Channel::from_rows({"0", "1"}, {"x", "y"}, {{0.5, 0.5}, {1.0, 0.0}});
  const auto b = Channel::from_rows({"1", "0"}, {"y", "z"}, {{0.1, 0.9}, {0.4, 0.6}});
  // Row 0: x 0.5 vs 0, y 0.5 vs 0.4, z 0 vs 0.6. Row 1: x 1.0 vs 0, y 0 vs 0.1, z 0 vs 0.9.
  EXPECT_NEAR(max_abs_difference(a, b), 1.0, 1e-15);
  EXPECT_EQ(max_abs_difference(a, a), 0.0);
  EXPECT_THROW(max_abs_difference(a, Channel::from_rows({"q"}, {"x"}, {{1.0}})), InvalidArgument);
}

}  // namespace
}  // namespace leakmeter
