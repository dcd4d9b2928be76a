#include "leakmeter/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "leakmeter/error.hpp"

namespace leakmeter {

namespace {

void check_labels(const std::vector<std::string>& labels, const char* what) {
  std::set<std::string_view> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) throw InvalidArgument(std::string(what) + " has duplicate label '" + l + "'");
  }
}

// Validates non-negativity and sum-to-one, then rescales in place.
void normalize_probabilities(std::vector<double>& probs, const char* what) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument(std::string(what) + " has a negative or non-finite entry");
    total += p;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw InvalidArgument(std::string(what) + " sums to " + std::to_string(total) + ", not 1");
  }
  if (total != 1.0) {
    for (double& p : probs) p /= total;
  }
}

double count_entropy(const std::vector<std::uint64_t>& counts, double total) {
  double acc = 0.0;
  for (auto c : counts) {
    if (c > 0) acc += static_cast<double>(c) * std::log2(static_cast<double>(c));
  }
  return std::log2(total) - acc / total;
}

}  // namespace

DiscreteDistribution::DiscreteDistribution(std::vector<std::string> alphabet, std::vector<double> probs)
    : alphabet_(std::move(alphabet)), probs_(std::move(probs)) {
  if (alphabet_.empty()) throw InvalidArgument("distribution alphabet is empty");
  if (alphabet_.size() != probs_.size()) throw InvalidArgument("distribution alphabet and probabilities differ in length");
  check_labels(alphabet_, "distribution alphabet");
  normalize_probabilities(probs_, "distribution");
}

DiscreteDistribution DiscreteDistribution::uniform(std::vector<std::string> alphabet) {
  const auto n = alphabet.size();
  if (n == 0) throw InvalidArgument("distribution alphabet is empty");
  return {std::move(alphabet), std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

DiscreteDistribution DiscreteDistribution::point_mass(std::vector<std::string> alphabet, std::size_t index) {
  if (index >= alphabet.size()) throw InvalidArgument("point mass index outside alphabet");
  std::vector<double> probs(alphabet.size(), 0.0);
  probs[index] = 1.0;
  return {std::move(alphabet), std::move(probs)};
}

double DiscreteDistribution::prob(const std::string& label) const {
  const auto it = std::find(alphabet_.begin(), alphabet_.end(), label);
  return it == alphabet_.end() ? 0.0 : probs_[static_cast<std::size_t>(it - alphabet_.begin())];
}

JointDistribution::JointDistribution(std::vector<std::string> row_alphabet, std::vector<std::string> col_alphabet,
                                     std::vector<double> probs)
    : row_alphabet_(std::move(row_alphabet)), col_alphabet_(std::move(col_alphabet)), probs_(std::move(probs)) {
  if (row_alphabet_.empty() || col_alphabet_.empty()) throw InvalidArgument("joint distribution has an empty alphabet");
  if (probs_.size() != row_alphabet_.size() * col_alphabet_.size()) {
    throw InvalidArgument("joint distribution matrix does not match its alphabets");
  }
  check_labels(row_alphabet_, "joint row alphabet");
  check_labels(col_alphabet_, "joint column alphabet");
  normalize_probabilities(probs_, "joint distribution");
}

DiscreteDistribution JointDistribution::row_marginal() const {
  std::vector<double> m(rows(), 0.0);
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < cols(); ++c) m[r] += at(r, c);
  }
  return {row_alphabet_, std::move(m)};
}

DiscreteDistribution JointDistribution::col_marginal() const {
  std::vector<double> m(cols(), 0.0);
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < cols(); ++c) m[c] += at(r, c);
  }
  return {col_alphabet_, std::move(m)};
}

JointDistribution JointDistribution::transposed() const {
  std::vector<double> t(probs_.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < cols(); ++c) t[c * rows() + r] = at(r, c);
  }
  return {col_alphabet_, row_alphabet_, std::move(t)};
}

DiscreteDistribution JointDistribution::flattened() const {
  std::vector<std::string> labels;
  labels.reserve(probs_.size());
  for (const auto& r : row_alphabet_) {
    for (const auto& c : col_alphabet_) labels.push_back(r + "|" + c);
  }
  return {std::move(labels), probs_};
}

double entropy_bits(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

double entropy(const DiscreteDistribution& d) { return entropy_bits(d.probs()); }

double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.alphabet() != q.alphabet()) throw InvalidArgument("KL divergence needs identical alphabets");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log2(p[i] / q[i]);
  }
  return std::max(d, 0.0);
}

double conditional_entropy(const JointDistribution& j) {
  const auto py = j.col_marginal();
  double h = 0.0;
  for (std::size_t c = 0; c < j.cols(); ++c) {
    if (py[c] <= 0.0) continue;
    for (std::size_t r = 0; r < j.rows(); ++r) {
      const double pxy = j.at(r, c);
      if (pxy > 0.0) h -= pxy * std::log2(pxy / py[c]);
    }
  }
  return std::clamp(h, 0.0, entropy(j.row_marginal()));
}

double mutual_information(const JointDistribution& j) {
  return std::max(entropy(j.row_marginal()) - conditional_entropy(j), 0.0);
}

DiscreteDistribution empirical_distribution(const TraceSet& traces, const std::vector<std::string>& vars) {
  if (traces.empty()) throw InvalidArgument("empirical distribution of an empty trace set");
  if (vars.empty()) throw InvalidArgument("empirical distribution needs at least one variable");
  std::vector<std::size_t> idx;
  idx.reserve(vars.size());
  for (const auto& v : vars) idx.push_back(traces.index_of(v));
  const auto tuples = tuple_column(traces, idx);
  std::vector<std::uint64_t> counts(tuples.cardinality(), 0);
  for (auto c : tuples.codes) ++counts[c];
  std::vector<std::string> labels;
  std::vector<double> probs;
  const double total = static_cast<double>(traces.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    labels.push_back(tuple_key(tuples.labels[i]));
    probs.push_back(static_cast<double>(counts[i]) / total);
  }
  return {std::move(labels), std::move(probs)};
}

double empirical_entropy(std::span<const std::uint32_t> codes, std::size_t cardinality) {
  if (codes.empty()) throw InvalidArgument("entropy of an empty sample");
  std::vector<std::uint64_t> counts(cardinality, 0);
  for (auto c : codes) ++counts.at(c);
  return std::max(count_entropy(counts, static_cast<double>(codes.size())), 0.0);
}

double empirical_mutual_information(std::span<const std::uint32_t> x, std::size_t x_card,
                                    std::span<const std::uint32_t> y, std::size_t y_card) {
  if (x.size() != y.size()) throw InvalidArgument("mutual information samples differ in length");
  if (x.empty()) throw InvalidArgument("mutual information of an empty sample");
  const double total = static_cast<double>(x.size());

  std::vector<std::uint64_t> joint_counts;
  const std::uint64_t cells = static_cast<std::uint64_t>(x_card) * y_card;
  if (cells <= (1u << 22)) {
    joint_counts.assign(cells, 0);
    for (std::size_t i = 0; i < x.size(); ++i) ++joint_counts[static_cast<std::uint64_t>(x[i]) * y_card + y[i]];
  } else {
    std::vector<std::uint64_t> keys(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) keys[i] = static_cast<std::uint64_t>(x[i]) * y_card + y[i];
    std::sort(keys.begin(), keys.end());
    for (std::size_t i = 0; i < keys.size();) {
      std::size_t j = i;
      while (j < keys.size() && keys[j] == keys[i]) ++j;
      joint_counts.push_back(j - i);
      i = j;
    }
  }
  const double hx = empirical_entropy(x, x_card);
  const double hy = empirical_entropy(y, y_card);
  const double hxy = count_entropy(joint_counts, total);
  return std::max(hx + hy - hxy, 0.0);
}

}  // namespace leakmeter
