#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "leakmeter/channel.hpp"
#include "leakmeter/trace_set.hpp"

namespace leakmeter {

/// Observable name -> parent secrets, in secret declaration order.
using ParentMap = std::map<std::string, std::vector<std::string>>;

/// What a candidate secret subset must match for the edge test
/// |M(S_c, O) - target| <= tol * max(target, 1).
enum class StructureTarget {
  /// M(S_all, O): the information the whole secret tuple carries about O.
  /// Equals H(O) whenever O is a deterministic function of the secrets, and
  /// still resolves observables that carry protocol noise.
  full_secret_information,
  /// H(O): only deterministic dependencies resolve.
  observable_entropy,
};

inline constexpr double kDefaultStructureTolerance = 0.01;
inline constexpr double kDefaultIndependenceTolerance = 1e-3;

/// Bipartite secret -> observable structure search by increasing parent-set
/// size. For k = 1..max_degree every still-unexplained observable takes the
/// first k-subset of secrets (lexicographic over secret indices) passing the
/// edge test; M is computed treating the subset as one compound variable.
/// max_degree = 0 means "number of secret variables".
///
/// Throws StructureLearningError listing the observables left unexplained.
ParentMap learn_structure(const TraceSet& traces, std::size_t max_degree = 0,
                          double tol = kDefaultStructureTolerance,
                          StructureTarget target = StructureTarget::full_secret_information);

/// Conditional probability table for one or more observables given parents.
/// Rows follow parent_keys (every combination of parent values), columns
/// follow values (observed tuples of the factor's observables).
struct Factor {
  std::vector<std::string> observables;
  std::vector<std::string> parents;
  std::vector<std::string> parent_keys;
  std::vector<std::string> values;
  std::vector<double> table;

  std::string name() const;
  double prob(std::size_t parent_row, std::size_t value) const { return table[parent_row * values.size() + value]; }
};

/// Learned Bayesian network: edges, per-variable alphabets and CPT factors.
struct DependencyModel {
  std::vector<std::string> secret_vars;
  std::vector<std::string> observable_vars;
  ParentMap edges;
  std::map<std::string, std::vector<std::string>> alphabets;
  std::vector<Factor> factors;

  /// The factor that contains `observable`.
  const Factor& factor_for(std::string_view observable) const;

  /// Checks parents exist, every observable has a parent and sits in
  /// exactly one factor, and CPT rows sum to one.
  void validate() const;

  std::string to_json() const;
  static DependencyModel from_json(std::string_view text);
  void save_json(const std::string& path) const;
  static DependencyModel load_json(const std::string& path);
};

struct FitOptions {
  // Add-alpha smoothing; 0 gives plain frequency ratios.
  double alpha = 0.0;
  // Observables whose empirical conditional mutual information given their
  // joint parents exceeds independence_tol bits share one joint table
  // instead of being factorized, pairwise first and then group against the
  // remaining groups.
  bool merge_dependent_observables = true;
  double independence_tol = kDefaultIndependenceTolerance;
};

/// Maximum-likelihood CPTs by frequency counts. Parent assignments absent
/// from the traces get the uniform row.
DependencyModel fit_cpts(const TraceSet& traces, const ParentMap& edges, const FitOptions& options = {});

/// Channel over the secret tuples and observable tuples that occur in the
/// traces, with p(o|s) the product of the model's factors. Rows are
/// renormalized over the retained observable tuples.
Channel model_to_channel(const DependencyModel& model, const TraceSet& traces);

/// Same without traces: rows and columns are full cartesian products of the
/// model's alphabets.
Channel model_to_channel(const DependencyModel& model);

struct EstimateOptions {
  std::size_t max_degree = 0;
  double struct_tol = kDefaultStructureTolerance;
  StructureTarget target = StructureTarget::full_secret_information;
  FitOptions fit;
  double ab_tol = kDefaultAbTolerance;
  std::size_t max_iter = kDefaultMaxIterations;
  CapacityMethod method = CapacityMethod::automatic;
};

struct Estimate {
  CapacityResult capacity;
  DependencyModel model;
  Channel channel;
};

/// learn_structure -> fit_cpts -> model_to_channel -> capacity.
Estimate estimate_capacity(const TraceSet& traces, const EstimateOptions& options = {});

}  // namespace leakmeter
