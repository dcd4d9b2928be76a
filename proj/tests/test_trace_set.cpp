#include <gtest/gtest.h>

#include <sstream>

#include "leakmeter/error.hpp"
#include "leakmeter/trace_set.hpp"

namespace leakmeter {
namespace {

TEST(NaturalLess, NumbersBeforeWordsAndByMagnitude) {
  EXPECT_TRUE(natural_less("2", "10"));
  EXPECT_FALSE(natural_less("10", "2"));
  EXPECT_TRUE(natural_less("9", "a"));
  EXPECT_TRUE(natural_less("abc", "abd"));
  EXPECT_TRUE(natural_less("007", "8"));
  EXPECT_FALSE(natural_less("5", "5"));
}

TEST(TraceSet, AlphabetsAreSortedNaturally) {
  const TraceSet t({"s"}, {"o"}, {{"10", "b"}, {"2", "a"}, {"10", "a"}});
  EXPECT_EQ(t.alphabet(0), (std::vector<std::string>{"2", "10"}));
  EXPECT_EQ(t.alphabet(1), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.value(0, 0), "10");
  EXPECT_EQ(t.record(1), (TraceSet::Record{"2", "a"}));
  EXPECT_EQ(t.index_of("o"), 1u);
  EXPECT_THROW(t.index_of("x"), InvalidArgument);
}

TEST(TraceSet, RejectsBadDeclarations) {
  EXPECT_THROW(TraceSet({}, {"o"}, {}), InvalidArgument);
  EXPECT_THROW(TraceSet({"s"}, {}, {}), InvalidArgument);
  EXPECT_THROW(TraceSet({"v"}, {"v"}, {}), InvalidArgument);
  EXPECT_THROW(TraceSet({"s"}, {"o"}, {{"1"}}), InvalidArgument);
}

TEST(TraceSet, CsvRoundTripReordersSecretsFirst) {
  std::istringstream in("o:x,s:a,o:y\r\n1,p,q\n\n2,p,r\n");
  const auto t = TraceSet::read_csv(in);
  EXPECT_EQ(t.secret_vars(), (std::vector<std::string>{"a"}));
  EXPECT_EQ(t.observable_vars(), (std::vector<std::string>{"x", "y"}));
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.record(1), (TraceSet::Record{"p", "2", "r"}));

  std::ostringstream out;
  t.write_csv(out);
  EXPECT_EQ(out.str(), "s:a,o:x,o:y\np,1,q\np,2,r\n");
  std::istringstream again(out.str());
  std::ostringstream out2;
  TraceSet::read_csv(again).write_csv(out2);
  EXPECT_EQ(out2.str(), out.str());
}

TEST(TraceSet, CsvErrors) {
  std::istringstream no_prefix("payer,o:a\n1,0\n");
  EXPECT_THROW(TraceSet::read_csv(no_prefix), IoError);
  std::istringstream ragged("s:p,o:a\n1,0,3\n");
  EXPECT_THROW(TraceSet::read_csv(ragged), IoError);
  std::istringstream empty("");
  EXPECT_THROW(TraceSet::read_csv(empty), IoError);
  std::istringstream no_observable("s:p\n1\n");
  EXPECT_THROW(TraceSet::read_csv(no_observable), IoError);
  EXPECT_THROW(TraceSet::load_csv("/nonexistent/dir/t.csv"), IoError);
}

TEST(TraceSet, FromColumnsDropsUnusedLabels) {
  const auto t = TraceSet::from_columns({"s"}, {"o"}, {{"0", "1", "2"}, {"b", "a"}}, {{2, 0, 2}, {0, 0, 1}});
  EXPECT_EQ(t.alphabet(0), (std::vector<std::string>{"0", "2"}));
  EXPECT_EQ(t.alphabet(1), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.record(0), (TraceSet::Record{"2", "b"}));
  EXPECT_EQ(t.record(2), (TraceSet::Record{"2", "a"}));
}

TEST(TupleColumn, CodesFollowTupleOrder) {
  const TraceSet t({"s1", "s2"}, {"o"}, {{"1", "b", "x"}, {"0", "b", "x"}, {"1", "a", "y"}, {"0", "b", "y"}});
  const auto col = tuple_column(t, {0, 1});
  ASSERT_EQ(col.cardinality(), 3u);
  EXPECT_EQ(col.labels[0], (std::vector<std::string>{"0", "b"}));
  EXPECT_EQ(col.labels[1], (std::vector<std::string>{"1", "a"}));
  EXPECT_EQ(col.labels[2], (std::vector<std::string>{"1", "b"}));
  EXPECT_EQ(col.codes, (std::vector<std::uint32_t>{2, 0, 1, 0}));
  EXPECT_EQ(tuple_key(col.labels[2]), "1,b");
}

}  // namespace
}  // namespace leakmeter
