#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "leakmeter/infotheory.hpp"

namespace leakmeter {

/// Discrete memoryless channel p(o | s): rows are secrets, columns are
/// observables, and every row is a probability vector.
class Channel {
 public:
  Channel(std::vector<std::string> secrets, std::vector<std::string> observables, std::vector<double> matrix);

  /// Row-major construction from nested rows.
  static Channel from_rows(std::vector<std::string> secrets, std::vector<std::string> observables,
                           const std::vector<std::vector<double>>& rows);

  const std::vector<std::string>& secrets() const noexcept { return secrets_; }
  const std::vector<std::string>& observables() const noexcept { return observables_; }
  std::size_t rows() const noexcept { return secrets_.size(); }
  std::size_t cols() const noexcept { return observables_.size(); }
  double at(std::size_t s, std::size_t o) const { return matrix_[s * cols() + o]; }
  std::span<const double> row(std::size_t s) const { return {matrix_.data() + s * cols(), cols()}; }
  const std::vector<double>& matrix() const noexcept { return matrix_; }

  /// p(o) = sum_s input(s) p(o|s).
  std::vector<double> output_distribution(std::span<const double> input) const;

  /// Copy without columns that have zero probability in every row.
  Channel without_empty_columns() const;

  std::string to_json() const;
  static Channel from_json(std::string_view text);
  void save_json(const std::string& path) const;
  static Channel load_json(const std::string& path);

 private:
  std::vector<std::string> secrets_;
  std::vector<std::string> observables_;
  std::vector<double> matrix_;
};

enum class CapacityMethod { automatic, symmetric, arimoto_blahut };

std::string_view to_string(CapacityMethod method);
std::optional<CapacityMethod> parse_capacity_method(std::string_view text);

struct CapacityResult {
  double capacity_bits = 0.0;
  DiscreteDistribution input_distribution;
  std::size_t iterations = 0;
  bool converged = false;
  CapacityMethod method = CapacityMethod::symmetric;
  // max_s D(p(.|s) || p(o)) at the returned input; an upper bound on capacity.
  double upper_bound_bits = 0.0;
};

inline constexpr double kSymmetryTolerance = 1e-6;
inline constexpr double kDefaultAbTolerance = 1e-9;
inline constexpr std::size_t kDefaultMaxIterations = 10000;

/// p(s, o) = input(s) p(o|s). The input must be over the channel's secrets.
JointDistribution joint_from(const Channel& channel, const DiscreteDistribution& input);

/// True when every row, sorted descending, equals every other sorted row
/// entrywise within tol.
bool is_row_symmetric(const Channel& channel, double tol = kSymmetryTolerance);

/// True when D(p(.|s) || p(o)) under the uniform input is the same for every
/// secret within tol; this is the optimality condition for the uniform input.
bool uniform_input_is_optimal(const Channel& channel, double tol = kSymmetryTolerance);

/// Capacity of a row-symmetric channel: H(O) under the uniform input minus
/// the entropy of any one row. Rows being permutations of each other is not
/// enough on its own for the uniform input to be optimal (rows {1,0}, {1,0},
/// {0,1} is a counterexample), so uniform_input_is_optimal must hold too.
/// Throws NotRowSymmetric when either check fails.
CapacityResult symmetric_capacity(const Channel& channel, double tol = kSymmetryTolerance);

struct ArimotoBlahutOptions {
  double tol = kDefaultAbTolerance;
  std::size_t max_iter = kDefaultMaxIterations;
  // Starting input p0(s); uniform when empty. Must be strictly positive.
  std::vector<double> initial;
  // Called with the capacity value after each iteration.
  std::function<void(std::size_t iteration, double capacity_bits)> observer;
};

/// Arimoto-Blahut iteration. Alternates the posterior update
/// p(s|o) = p(s) p(o|s) / sum_s' p(s') p(o|s') with the input update
/// p(s) proportional to exp(sum_o p(o|s) log p(s|o)), computed in the log
/// domain. Stops once successive capacity values differ by less than tol;
/// hitting max_iter first returns the current iterate with converged=false.
CapacityResult arimoto_blahut(const Channel& channel, const ArimotoBlahutOptions& options);
CapacityResult arimoto_blahut(const Channel& channel, double tol = kDefaultAbTolerance,
                              std::size_t max_iter = kDefaultMaxIterations);

/// Dispatches to symmetric_capacity or arimoto_blahut. `automatic` picks the
/// symmetric shortcut when it applies at kSymmetryTolerance.
CapacityResult capacity(const Channel& channel, CapacityMethod method = CapacityMethod::automatic,
                        double tol = kDefaultAbTolerance, std::size_t max_iter = kDefaultMaxIterations);

/// Largest |a(s,o) - b(s,o)| after aligning rows and columns by label; an
/// observable missing from one channel counts as probability 0 there.
/// Throws InvalidArgument when the secret alphabets differ as sets.
double max_abs_difference(const Channel& a, const Channel& b);

}  // namespace leakmeter
