#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "leakmeter/trace_set.hpp"

/// Shannon quantities over finite categorical distributions. All results are
/// in bits; zero-probability terms are skipped (0 log 0 = 0).
namespace leakmeter {

/// Absolute tolerance on sum-to-one for distributions and joints.
inline constexpr double kProbabilityTolerance = 1e-9;

/// Probability vector over a labelled finite alphabet.
///
/// Construction validates that labels are unique, entries are non-negative
/// and the total is within kProbabilityTolerance of one; accepted inputs are
/// renormalized to sum exactly to one. Immutable afterwards.
class DiscreteDistribution {
 public:
  DiscreteDistribution(std::vector<std::string> alphabet, std::vector<double> probs);

  static DiscreteDistribution uniform(std::vector<std::string> alphabet);
  static DiscreteDistribution point_mass(std::vector<std::string> alphabet, std::size_t index);

  const std::vector<std::string>& alphabet() const noexcept { return alphabet_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

  /// Probability of a label; 0 for labels outside the alphabet.
  double prob(const std::string& label) const;

 private:
  std::vector<std::string> alphabet_;
  std::vector<double> probs_;
};

/// Joint distribution p(x, y) with X on rows and Y on columns (row-major).
class JointDistribution {
 public:
  JointDistribution(std::vector<std::string> row_alphabet, std::vector<std::string> col_alphabet,
                    std::vector<double> probs);

  const std::vector<std::string>& row_alphabet() const noexcept { return row_alphabet_; }
  const std::vector<std::string>& col_alphabet() const noexcept { return col_alphabet_; }
  std::size_t rows() const noexcept { return row_alphabet_.size(); }
  std::size_t cols() const noexcept { return col_alphabet_.size(); }
  double at(std::size_t r, std::size_t c) const { return probs_[r * cols() + c]; }
  const std::vector<double>& probs() const noexcept { return probs_; }

  DiscreteDistribution row_marginal() const;
  DiscreteDistribution col_marginal() const;
  JointDistribution transposed() const;

  /// All cells as one distribution over "row|col" labels.
  DiscreteDistribution flattened() const;

 private:
  std::vector<std::string> row_alphabet_;
  std::vector<std::string> col_alphabet_;
  std::vector<double> probs_;
};

/// Entropy of a raw probability vector; the vector is trusted.
double entropy_bits(std::span<const double> probs);

double entropy(const DiscreteDistribution& d);

/// D(p || q). Returns +infinity when p has mass where q has none.
/// Throws InvalidArgument when the alphabets differ.
double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q);

/// H(X | Y) with X on rows.
double conditional_entropy(const JointDistribution& j);

/// I(X; Y) = H(X) - H(X | Y).
double mutual_information(const JointDistribution& j);

/// Frequency distribution of the joint values of `vars` in the traces.
/// Labels are tuple keys (see tuple_key) in natural order.
DiscreteDistribution empirical_distribution(const TraceSet& traces, const std::vector<std::string>& vars);

/// Plug-in estimates straight from count tables. `codes` are per-record
/// category codes with the given cardinality.
double empirical_entropy(std::span<const std::uint32_t> codes, std::size_t cardinality);
double empirical_mutual_information(std::span<const std::uint32_t> x, std::size_t x_card,
                                    std::span<const std::uint32_t> y, std::size_t y_card);

}  // namespace leakmeter
