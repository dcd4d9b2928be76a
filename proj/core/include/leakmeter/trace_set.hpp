#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace leakmeter {

// Orders category tokens the way a person would: tokens that are both
// non-negative integers compare numerically ("2" < "10"), everything else
// lexicographically, with integers first.
bool natural_less(std::string_view a, std::string_view b);

// Joins tuple components into one label ("1,0,0"). Single components are
// returned unchanged.
std::string tuple_key(const std::vector<std::string>& parts);

// Tabular record of protocol executions over named secret and observable
// variables. Values are opaque category tokens; internally each column is
// stored as codes into that variable's sorted alphabet.
class TraceSet {
 public:
  using Record = std::vector<std::string>;

  // Records list values in the order secret_vars followed by observable_vars.
  TraceSet(std::vector<std::string> secret_vars, std::vector<std::string> observable_vars,
           const std::vector<Record>& records);

  // Column-wise constructor for generators. labels[v] is the alphabet for
  // variable v (secrets first) and columns[v][r] indexes into it. Labels that
  // never occur are dropped.
  static TraceSet from_columns(std::vector<std::string> secret_vars,
                               std::vector<std::string> observable_vars,
                               const std::vector<std::vector<std::string>>& labels,
                               const std::vector<std::vector<std::uint32_t>>& columns);

  const std::vector<std::string>& secret_vars() const noexcept { return secret_vars_; }
  const std::vector<std::string>& observable_vars() const noexcept { return observable_vars_; }
  std::vector<std::string> variables() const;

  std::size_t size() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_ == 0; }
  std::size_t variable_count() const noexcept { return alphabets_.size(); }

  // Throws InvalidArgument for unknown names.
  std::size_t index_of(std::string_view variable) const;
  bool has_variable(std::string_view variable) const;

  const std::vector<std::string>& alphabet(std::size_t variable) const { return alphabets_.at(variable); }
  const std::vector<std::uint32_t>& column(std::size_t variable) const { return columns_.at(variable); }
  const std::string& value(std::size_t row, std::size_t variable) const;

  // Values of a row in declared variable order.
  Record record(std::size_t row) const;

  // CSV with header "s:<secret>,...,o:<observable>,...".
  void write_csv(std::ostream& out) const;
  static TraceSet read_csv(std::istream& in);
  void save_csv(const std::string& path) const;
  static TraceSet load_csv(const std::string& path);

 private:
  TraceSet() = default;
  void validate_names() const;

  std::vector<std::string> secret_vars_;
  std::vector<std::string> observable_vars_;
  std::vector<std::vector<std::string>> alphabets_;
  std::vector<std::vector<std::uint32_t>> columns_;
  std::size_t rows_ = 0;
};

// Joint category codes of several trace columns: codes[r] identifies the
// tuple in row r, and labels[c] lists the tuple's components for code c.
// Codes are assigned in natural tuple order.
struct TupleColumn {
  std::vector<std::uint32_t> codes;
  std::vector<std::vector<std::string>> labels;

  std::size_t cardinality() const noexcept { return labels.size(); }
};

TupleColumn tuple_column(const TraceSet& traces, const std::vector<std::size_t>& variables);

}  // namespace leakmeter
