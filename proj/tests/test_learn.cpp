#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "leakmeter/error.hpp"
#include "leakmeter/infotheory.hpp"
#include "leakmeter/learn.hpp"
#include "leakmeter/oracle.hpp"
#include "leakmeter/simulate.hpp"

namespace leakmeter {
namespace {

using Bits = std::vector<int>;
using Generator = std::function<TraceSet::Record(std::mt19937_64&)>;

TraceSet make_traces(std::vector<std::string> secrets, std::vector<std::string> observables, std::size_t n,
                std::uint64_t seed, const Generator& gen) {
  std::mt19937_64 rng(seed);
  std::vector<TraceSet::Record> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) records.push_back(gen(rng));
  return TraceSet(std::move(secrets), std::move(observables), records);
}

std::string bit(bool b) { return b ? "1" : "0"; }

bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

// Two uniform secret bits; each observable is a boolean function given by its
// truth table over (s1, s2) indexed as 2*s1 + s2.
TraceSet boolean_traces(const std::vector<int>& tables, std::size_t n, std::uint64_t seed) {
  std::vector<std::string> obs;
  for (std::size_t i = 0; i < tables.size(); ++i) obs.push_back("O" + std::to_string(i + 1));
  return make_traces({"S1", "S2"}, obs, n, seed, [&](std::mt19937_64& rng) {
    const bool s1 = coin(rng);
    const bool s2 = coin(rng);
    TraceSet::Record r{bit(s1), bit(s2)};
    for (int t : tables) r.push_back(bit((t >> (2 * s1 + s2)) & 1));
    return r;
  });
}

std::vector<std::string> expected_parents(int table) {
  const auto f = [table](int s1, int s2) { return (table >> (2 * s1 + s2)) & 1; };
  const bool on_s1 = f(0, 0) != f(1, 0) || f(0, 1) != f(1, 1);
  const bool on_s2 = f(0, 0) != f(0, 1) || f(1, 0) != f(1, 1);
  if (on_s1 && on_s2) return {"S1", "S2"};
  if (on_s2) return {"S2"};
  return {"S1"};
}

TEST(LearnStructure, CopyChannel) {
  const auto t = make_traces({"S1"}, {"O1"}, 1000, 1, [](std::mt19937_64& rng) {
    const auto s = bit(coin(rng));
    return TraceSet::Record{s, s};
  });
  EXPECT_EQ(learn_structure(t), (ParentMap{{"O1", {"S1"}}}));
}

TEST(LearnStructure, XorNeedsBothSecrets) {
  // All four equally likely rows, enumerated exactly.
  const TraceSet t({"S1", "S2"}, {"O"}, {{"0", "0", "0"}, {"0", "1", "1"}, {"1", "0", "1"}, {"1", "1", "0"}});
  const auto o = tuple_column(t, {t.index_of("O")});
  const auto s1 = tuple_column(t, {t.index_of("S1")});
  const auto both = tuple_column(t, {t.index_of("S1"), t.index_of("S2")});
  EXPECT_NEAR(empirical_mutual_information(s1.codes, s1.cardinality(), o.codes, o.cardinality()), 0.0, 1e-12);
  EXPECT_NEAR(empirical_mutual_information(both.codes, both.cardinality(), o.codes, o.cardinality()), 1.0, 1e-12);

  EXPECT_EQ(learn_structure(t), (ParentMap{{"O", {"S1", "S2"}}}));
  try {
    learn_structure(t, 1);
    FAIL() << "expected StructureLearningError";
  } catch (const StructureLearningError& e) {
    EXPECT_EQ(e.unresolved(), std::vector<std::string>{"O"});
  }
}

TEST(LearnStructure, DiningCryptographersAnnouncementsDependOnPayer) {
  const auto t = simulate_dc({.k = 3, .bias = 0.3, .samples = 100000, .seed = 7});
  const auto edges = learn_structure(t);
  ASSERT_EQ(edges.size(), 3u);
  for (const auto& [o, parents] : edges) EXPECT_EQ(parents, std::vector<std::string>{"payer"}) << o;
}

TEST(LearnStructure, NoisyObservablesNeedTheInformationTarget) {
  const auto t = simulate_dc({.k = 3, .bias = 0.3, .samples = 20000, .seed = 7});
  EXPECT_THROW(learn_structure(t, 0, kDefaultStructureTolerance, StructureTarget::observable_entropy),
               StructureLearningError);
}

TEST(LearnStructure, Deterministic) {
  const auto t = boolean_traces({6, 8, 12}, 5000, 3);
  EXPECT_EQ(learn_structure(t), learn_structure(t));
  EXPECT_EQ(learn_structure(t), learn_structure(boolean_traces({6, 8, 12}, 5000, 3)));
}

TEST(LearnStructure, AllBooleanFunctionPairs) {
  for (int f = 0; f < 16; ++f) {
    for (int g = 0; g < 16; ++g) {
      const auto t = boolean_traces({f, g}, 2000, static_cast<std::uint64_t>(16 * f + g));
      const ParentMap expected{{"O1", expected_parents(f)}, {"O2", expected_parents(g)}};
      EXPECT_EQ(learn_structure(t), expected) << f << " " << g;
    }
  }
}

TEST(LearnStructure, RejectsBadInput) {
  EXPECT_THROW(learn_structure(TraceSet({"S"}, {"O"}, {})), InvalidArgument);
  EXPECT_THROW(learn_structure(boolean_traces({6}, 10, 1), 0, -1.0), InvalidArgument);
}

TEST(FitCpts, PointMassesForDeterministicObservables) {
  const auto t = boolean_traces({6}, 1000, 5);
  const auto model = fit_cpts(t, learn_structure(t));
  model.validate();
  const auto& f = model.factor_for("O1");
  ASSERT_EQ(f.parent_keys, (std::vector<std::string>{"0,0", "0,1", "1,0", "1,1"}));
  ASSERT_EQ(f.values, (std::vector<std::string>{"0", "1"}));
  for (std::size_t r = 0; r < 4; ++r) {
    const int x = (6 >> r) & 1;
    EXPECT_EQ(f.prob(r, static_cast<std::size_t>(x)), 1.0);
    EXPECT_EQ(f.prob(r, static_cast<std::size_t>(1 - x)), 0.0);
  }
}

TEST(FitCpts, NoisyCopyRecoversFlipRate) {
  const auto t = make_traces({"S"}, {"O"}, 100000, 6, [](std::mt19937_64& rng) {
    const bool s = coin(rng);
    return TraceSet::Record{bit(s), bit(s != coin(rng, 0.1))};
  });
  const auto model = fit_cpts(t, {{"O", {"S"}}});
  const auto& f = model.factor_for("O");
  EXPECT_NEAR(f.prob(0, 1), 0.1, 0.02);
  EXPECT_NEAR(f.prob(1, 0), 0.1, 0.02);
}

TEST(FitCpts, CountRatiosAndSmoothing) {
  const TraceSet t({"S"}, {"O"}, {{"0", "a"}, {"0", "a"}, {"0", "b"}, {"1", "c"}});
  const auto plain = fit_cpts(t, {{"O", {"S"}}});
  const auto& f = plain.factor_for("O");
  EXPECT_DOUBLE_EQ(f.prob(0, 0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(f.prob(0, 1), 1.0 / 3.0);
  EXPECT_EQ(f.prob(0, 2), 0.0);
  EXPECT_EQ(f.prob(1, 2), 1.0);

  const auto smoothed = fit_cpts(t, {{"O", {"S"}}}, {.alpha = 1.0});
  EXPECT_DOUBLE_EQ(smoothed.factor_for("O").prob(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(smoothed.factor_for("O").prob(1, 0), 0.25);

  EXPECT_THROW(fit_cpts(t, {{"O", {"S"}}}, {.alpha = -1.0}), InvalidArgument);
  EXPECT_THROW(fit_cpts(t, {{"O", {"X"}}}), InvalidArgument);
  EXPECT_THROW(fit_cpts(t, {}), InvalidArgument);
}

TEST(FitCpts, UnseenParentAssignmentsAreUniform) {
  const TraceSet t({"S1", "S2"}, {"O"}, {{"0", "0", "x"}, {"0", "1", "y"}, {"1", "0", "z"}});
  const auto model = fit_cpts(t, {{"O", {"S1", "S2"}}});
  const auto& f = model.factor_for("O");
  const auto row = static_cast<std::size_t>(
      std::find(f.parent_keys.begin(), f.parent_keys.end(), "1,1") - f.parent_keys.begin());
  ASSERT_LT(row, f.parent_keys.size());
  for (std::size_t v = 0; v < f.values.size(); ++v) EXPECT_DOUBLE_EQ(f.prob(row, v), 1.0 / 3.0);
}

TEST(FitCpts, DependentObservablesShareAFactor) {
  const auto t = simulate_dc({.k = 3, .bias = 0.5, .samples = 100000, .seed = 8});
  const auto edges = learn_structure(t);
  const auto merged = fit_cpts(t, edges);
  ASSERT_EQ(merged.factors.size(), 1u);
  EXPECT_EQ(merged.factors[0].name(), "a0+a1+a2");
  EXPECT_LT(max_abs_difference(model_to_channel(merged, t), oracle_dc_channel(3, 0.5)), 0.02);

  const auto split = fit_cpts(t, edges, {.merge_dependent_observables = false});
  EXPECT_EQ(split.factors.size(), 3u);
  // Each announcement alone is a fair coin whatever the payer.
  for (const auto& f : split.factors) {
    for (std::size_t r = 0; r < f.parent_keys.size(); ++r) EXPECT_NEAR(f.prob(r, 0), 0.5, 0.02);
  }
}

TEST(ModelToChannel, IndependentNoisyCopiesMultiply) {
  const auto t = make_traces({"S"}, {"O1", "O2"}, 100000, 9, [](std::mt19937_64& rng) {
    const bool s = coin(rng);
    return TraceSet::Record{bit(s), bit(s != coin(rng, 0.1)), bit(s != coin(rng, 0.1))};
  });
  const auto model = fit_cpts(t, learn_structure(t));
  EXPECT_EQ(model.factors.size(), 2u);
  const auto ch = model_to_channel(model, t);
  EXPECT_EQ(ch.observables(), (std::vector<std::string>{"0,0", "0,1", "1,0", "1,1"}));
  EXPECT_NEAR(ch.at(0, 0), 0.81, 0.02);
  EXPECT_NEAR(ch.at(0, 1), 0.09, 0.02);
  EXPECT_NEAR(ch.at(1, 0), 0.01, 0.02);
  const auto full = model_to_channel(model);
  EXPECT_LT(max_abs_difference(ch, full), 1e-12);
}

TEST(ModelToChannel, CopyIsIdentity) {
  const auto t = make_traces({"S"}, {"O"}, 1000, 10, [](std::mt19937_64& rng) {
    const auto s = std::to_string(std::uniform_int_distribution<int>(0, 3)(rng));
    return TraceSet::Record{s, s};
  });
  const auto ch = model_to_channel(fit_cpts(t, learn_structure(t)), t);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(ch.at(r, c), r == c ? 1.0 : 0.0);
  }
}

TEST(ModelToChannel, RejectsMismatchedTraces) {
  const auto t = boolean_traces({6}, 100, 1);
  const auto model = fit_cpts(t, learn_structure(t));
  EXPECT_THROW(model_to_channel(model, boolean_traces({6, 8}, 100, 1)), InvalidArgument);
}

TEST(EstimateCapacity, Examples) {
  const auto constant = make_traces({"S"}, {"O"}, 10000, 11, [](std::mt19937_64& rng) {
    return TraceSet::Record{std::to_string(std::uniform_int_distribution<int>(0, 3)(rng)), "k"};
  });
  EXPECT_NEAR(estimate_capacity(constant).capacity.capacity_bits, 0.0, 0.02);

  const auto copy = make_traces({"S"}, {"O"}, 10000, 12, [](std::mt19937_64& rng) {
    const auto s = std::to_string(std::uniform_int_distribution<int>(0, 3)(rng));
    return TraceSet::Record{s, s};
  });
  EXPECT_NEAR(estimate_capacity(copy).capacity.capacity_bits, 2.0, 0.05);

  const auto dc = simulate_dc({.k = 3, .bias = 0.0, .samples = 100000, .seed = 13});
  EXPECT_NEAR(estimate_capacity(dc).capacity.capacity_bits, std::log2(3.0), 0.05);

  CrowdsConfig crowds;
  crowds.samples = 100000;
  crowds.seed = 11;
  const double exact = oracle_capacity(oracle_crowds_channel(10, 2, 0.8)).capacity_bits;
  EXPECT_NEAR(estimate_capacity(simulate_crowds(crowds)).capacity.capacity_bits, exact, 0.1);
}

TEST(EstimateCapacity, MedianErrorShrinksWithSamples) {
  const double exact = oracle_capacity(oracle_dc_channel(3, 0.3)).capacity_bits;
  double previous = INFINITY;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    std::vector<double> errors;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto t = simulate_dc({.k = 3, .bias = 0.3, .samples = n, .seed = seed});
      errors.push_back(std::abs(estimate_capacity(t).capacity.capacity_bits - exact));
    }
    std::nth_element(errors.begin(), errors.begin() + 10, errors.end());
    EXPECT_LE(errors[10], previous) << n;
    previous = errors[10];
  }
}

TEST(DependencyModel, JsonRoundTrip) {
  const auto t = simulate_dc({.k = 3, .bias = 0.3, .samples = 5000, .seed = 14});
  const auto model = fit_cpts(t, learn_structure(t));
  const auto back = DependencyModel::from_json(model.to_json());
  back.validate();
  EXPECT_EQ(back.secret_vars, model.secret_vars);
  EXPECT_EQ(back.observable_vars, model.observable_vars);
  EXPECT_EQ(back.edges, model.edges);
  EXPECT_EQ(back.alphabets, model.alphabets);
  ASSERT_EQ(back.factors.size(), model.factors.size());
  for (std::size_t i = 0; i < model.factors.size(); ++i) {
    EXPECT_EQ(back.factors[i].name(), model.factors[i].name());
    EXPECT_EQ(back.factors[i].parent_keys, model.factors[i].parent_keys);
    EXPECT_EQ(back.factors[i].values, model.factors[i].values);
    EXPECT_EQ(back.factors[i].table, model.factors[i].table);
  }
  EXPECT_EQ(model_to_channel(back, t).matrix(), model_to_channel(model, t).matrix());
}

TEST(DependencyModel, ValidationAndParseErrors) {
  EXPECT_THROW(DependencyModel::from_json("{"), IoError);
  EXPECT_THROW(DependencyModel::from_json("[]"), IoError);
  const auto t = boolean_traces({6}, 100, 1);
  auto model = fit_cpts(t, learn_structure(t));
  model.factors[0].table[0] = 0.5;
  EXPECT_THROW(model.validate(), InvalidArgument);
  EXPECT_THROW(DependencyModel::load_json("/nonexistent/model.json"), IoError);
}

}  // namespace
}  // namespace leakmeter
