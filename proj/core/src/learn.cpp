#include "leakmeter/learn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "leakmeter/error.hpp"
#include "leakmeter/infotheory.hpp"

namespace leakmeter {

namespace {

// Calls fn with every k-subset of {0..n-1} in lexicographic order until fn
// returns true.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t k, Fn&& fn) {
  if (k == 0 || k > n) return;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    if (fn(std::as_const(idx))) return;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// Cartesian product of label lists, first list varying slowest.
std::vector<std::vector<std::string>> cartesian(const std::vector<const std::vector<std::string>*>& lists) {
  std::vector<std::vector<std::string>> out{{}};
  for (const auto* list : lists) {
    std::vector<std::vector<std::string>> next;
    next.reserve(out.size() * list->size());
    for (const auto& prefix : out) {
      for (const auto& v : *list) {
        auto t = prefix;
        t.push_back(v);
        next.push_back(std::move(t));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::map<std::string, std::size_t> index_by_label(const std::vector<std::string>& labels) {
  std::map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < labels.size(); ++i) m.emplace(labels[i], i);
  return m;
}

double conditional_mutual_information(const TraceSet& traces, const std::vector<std::size_t>& a,
                                      const std::vector<std::size_t>& b, const std::vector<std::size_t>& given) {
  auto with = [&](std::initializer_list<const std::vector<std::size_t>*> extra) {
    auto vars = given;
    for (const auto* e : extra) vars.insert(vars.end(), e->begin(), e->end());
    const auto col = tuple_column(traces, vars);
    return empirical_entropy(col.codes, col.cardinality());
  };
  const double h_az = with({&a});
  const double h_bz = with({&b});
  const double h_abz = with({&a, &b});
  const double h_z = given.empty() ? 0.0 : with({});
  return std::max(h_az + h_bz - h_abz - h_z, 0.0);
}

std::vector<std::size_t> sorted_union(std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ParentMap learn_structure(const TraceSet& traces, std::size_t max_degree, double tol, StructureTarget target) {
  if (traces.empty()) throw InvalidArgument("structure learning needs a non-empty trace set");
  if (!(tol >= 0.0)) throw InvalidArgument("structure tolerance must be non-negative");
  const std::size_t n_secrets = traces.secret_vars().size();
  if (max_degree == 0) max_degree = n_secrets;
  const std::size_t n_obs = traces.observable_vars().size();

  std::vector<std::size_t> all_secrets(n_secrets);
  std::iota(all_secrets.begin(), all_secrets.end(), 0);
  const auto full = tuple_column(traces, all_secrets);

  std::vector<double> goal(n_obs);
  for (std::size_t j = 0; j < n_obs; ++j) {
    const std::size_t v = n_secrets + j;
    const auto& col = traces.column(v);
    const std::size_t card = traces.alphabet(v).size();
    goal[j] = target == StructureTarget::observable_entropy
                  ? empirical_entropy(col, card)
                  : empirical_mutual_information(full.codes, full.cardinality(), col, card);
  }

  ParentMap edges;
  std::vector<bool> resolved(n_obs, false);
  std::vector<double> best_ratio(n_obs, 0.0);
  std::map<std::vector<std::size_t>, TupleColumn> subset_cache;

  for (std::size_t k = 1; k <= std::min(max_degree, n_secrets); ++k) {
    for (std::size_t j = 0; j < n_obs; ++j) {
      if (resolved[j]) continue;
      const std::size_t v = n_secrets + j;
      const auto& col = traces.column(v);
      const std::size_t card = traces.alphabet(v).size();
      for_each_subset(n_secrets, k, [&](const std::vector<std::size_t>& subset) {
        auto it = subset_cache.find(subset);
        if (it == subset_cache.end()) it = subset_cache.emplace(subset, tuple_column(traces, subset)).first;
        const double m = empirical_mutual_information(it->second.codes, it->second.cardinality(), col, card);
        best_ratio[j] = std::max(best_ratio[j], goal[j] > 0.0 ? m / goal[j] : 1.0);
        if (std::abs(m - goal[j]) <= tol * std::max(goal[j], 1.0)) {
          resolved[j] = true;
          auto& parents = edges[traces.observable_vars()[j]];
          for (auto s : subset) parents.push_back(traces.secret_vars()[s]);
          return true;
        }
        return false;
      });
    }
  }

  std::vector<std::string> unresolved;
  std::string detail;
  for (std::size_t j = 0; j < n_obs; ++j) {
    if (resolved[j]) continue;
    unresolved.push_back(traces.observable_vars()[j]);
    detail += fmt::format("{}{} (best M/target {:.4f})", detail.empty() ? "" : ", ", traces.observable_vars()[j],
                          best_ratio[j]);
  }
  if (!unresolved.empty()) {
    throw StructureLearningError(
        fmt::format("no parent set of size <= {} explains: {}; raise --max-degree or --struct-tol", max_degree, detail),
        std::move(unresolved));
  }
  return edges;
}

std::string Factor::name() const {
  std::string n;
  for (std::size_t i = 0; i < observables.size(); ++i) {
    if (i > 0) n += '+';
    n += observables[i];
  }
  return n;
}

const Factor& DependencyModel::factor_for(std::string_view observable) const {
  for (const auto& f : factors) {
    if (std::find(f.observables.begin(), f.observables.end(), observable) != f.observables.end()) return f;
  }
  throw InvalidArgument("no factor covers observable '" + std::string(observable) + "'");
}

void DependencyModel::validate() const {
  const std::set<std::string> secrets(secret_vars.begin(), secret_vars.end());
  std::map<std::string, int> coverage;
  for (const auto& o : observable_vars) {
    const auto it = edges.find(o);
    if (it == edges.end() || it->second.empty()) throw InvalidArgument("observable '" + o + "' has no parent");
    for (const auto& p : it->second) {
      if (!secrets.contains(p)) throw InvalidArgument("edge to '" + o + "' from unknown secret '" + p + "'");
    }
    if (!alphabets.contains(o)) throw InvalidArgument("no alphabet for '" + o + "'");
    coverage[o] = 0;
  }
  for (const auto& s : secret_vars) {
    if (!alphabets.contains(s)) throw InvalidArgument("no alphabet for '" + s + "'");
  }
  for (const auto& f : factors) {
    for (const auto& o : f.observables) {
      if (!coverage.contains(o)) throw InvalidArgument("factor covers unknown observable '" + o + "'");
      ++coverage[o];
    }
    for (const auto& p : f.parents) {
      if (!secrets.contains(p)) throw InvalidArgument("factor parent '" + p + "' is not a secret");
    }
    if (f.values.empty() || f.table.size() != f.parent_keys.size() * f.values.size()) {
      throw InvalidArgument("factor '" + f.name() + "' table has the wrong shape");
    }
    for (std::size_t r = 0; r < f.parent_keys.size(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < f.values.size(); ++c) {
        const double p = f.prob(r, c);
        if (!(p >= 0.0)) throw InvalidArgument("factor '" + f.name() + "' has a negative entry");
        total += p;
      }
      if (std::abs(total - 1.0) > kProbabilityTolerance) {
        throw InvalidArgument("factor '" + f.name() + "' row '" + f.parent_keys[r] + "' does not sum to 1");
      }
    }
  }
  for (const auto& [o, n] : coverage) {
    if (n != 1) throw InvalidArgument("observable '" + o + "' must belong to exactly one factor");
  }
}

std::string DependencyModel::to_json() const {
  nlohmann::ordered_json j;
  j["secrets"] = secret_vars;
  j["observables"] = observable_vars;
  auto edges_json = nlohmann::ordered_json::object();
  for (const auto& o : observable_vars) edges_json[o] = edges.at(o);
  j["edges"] = std::move(edges_json);
  auto alphabets_json = nlohmann::ordered_json::object();
  for (const auto& v : secret_vars) alphabets_json[v] = alphabets.at(v);
  for (const auto& v : observable_vars) alphabets_json[v] = alphabets.at(v);
  j["alphabets"] = std::move(alphabets_json);
  auto factors_json = nlohmann::ordered_json::object();
  auto cpts_json = nlohmann::ordered_json::object();
  for (const auto& f : factors) {
    factors_json[f.name()] = {{"observables", f.observables}, {"parents", f.parents}, {"values", f.values}};
    auto rows = nlohmann::ordered_json::object();
    for (std::size_t r = 0; r < f.parent_keys.size(); ++r) {
      rows[f.parent_keys[r]] =
          std::vector<double>(f.table.begin() + static_cast<std::ptrdiff_t>(r * f.values.size()),
                              f.table.begin() + static_cast<std::ptrdiff_t>((r + 1) * f.values.size()));
    }
    cpts_json[f.name()] = std::move(rows);
  }
  j["factors"] = std::move(factors_json);
  j["cpts"] = std::move(cpts_json);
  return j.dump(2) + "\n";
}

DependencyModel DependencyModel::from_json(std::string_view text) {
  DependencyModel m;
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    m.secret_vars = j.at("secrets").get<std::vector<std::string>>();
    m.observable_vars = j.at("observables").get<std::vector<std::string>>();
    for (const auto& [o, parents] : j.at("edges").items()) m.edges[o] = parents.get<std::vector<std::string>>();
    for (const auto& [v, values] : j.at("alphabets").items()) m.alphabets[v] = values.get<std::vector<std::string>>();
    const auto& cpts = j.at("cpts");
    for (const auto& [name, desc] : j.at("factors").items()) {
      Factor f;
      f.observables = desc.at("observables").get<std::vector<std::string>>();
      f.parents = desc.at("parents").get<std::vector<std::string>>();
      f.values = desc.at("values").get<std::vector<std::string>>();
      for (const auto& [key, row] : cpts.at(name).items()) {
        const auto probs = row.get<std::vector<double>>();
        if (probs.size() != f.values.size()) throw IoError("CPT row '" + key + "' of '" + name + "' has the wrong length");
        f.parent_keys.push_back(key);
        f.table.insert(f.table.end(), probs.begin(), probs.end());
      }
      m.factors.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed model JSON: ") + e.what());
  }
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid model JSON: ") + e.what());
  }
  return m;
}

void DependencyModel::save_json(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_json();
  if (!out) throw IoError("failed writing '" + path + "'");
}

DependencyModel DependencyModel::load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

DependencyModel fit_cpts(const TraceSet& traces, const ParentMap& edges, const FitOptions& options) {
  if (traces.empty()) throw InvalidArgument("cannot fit CPTs on an empty trace set");
  if (!(options.alpha >= 0.0)) throw InvalidArgument("smoothing alpha must be non-negative");

  DependencyModel model;
  model.secret_vars = traces.secret_vars();
  model.observable_vars = traces.observable_vars();
  for (const auto& [o, parents] : edges) {
    if (std::find(model.observable_vars.begin(), model.observable_vars.end(), o) == model.observable_vars.end()) {
      throw InvalidArgument("edge map names unknown observable '" + o + "'");
    }
    for (const auto& p : parents) {
      if (std::find(model.secret_vars.begin(), model.secret_vars.end(), p) == model.secret_vars.end()) {
        throw InvalidArgument("edge map names unknown secret '" + p + "'");
      }
    }
  }
  const std::size_t n_secrets = model.secret_vars.size();
  const std::size_t n_obs = model.observable_vars.size();

  // Parent indices per observable, in secret declaration order.
  std::vector<std::vector<std::size_t>> parents(n_obs);
  for (std::size_t j = 0; j < n_obs; ++j) {
    const auto it = edges.find(model.observable_vars[j]);
    if (it == edges.end() || it->second.empty()) {
      throw InvalidArgument("edge map gives no parents for '" + model.observable_vars[j] + "'");
    }
    for (const auto& p : it->second) parents[j].push_back(traces.index_of(p));
    std::sort(parents[j].begin(), parents[j].end());
    parents[j].erase(std::unique(parents[j].begin(), parents[j].end()), parents[j].end());
    model.edges[model.observable_vars[j]] = {};
    for (auto p : parents[j]) model.edges[model.observable_vars[j]].push_back(model.secret_vars[p]);
  }
  for (std::size_t v = 0; v < traces.variable_count(); ++v) model.alphabets[traces.variables()[v]] = traces.alphabet(v);

  UnionFind groups(n_obs);
  if (options.merge_dependent_observables) {
    for (std::size_t a = 0; a < n_obs; ++a) {
      for (std::size_t b = a + 1; b < n_obs; ++b) {
        const auto given = sorted_union(parents[a], parents[b]);
        if (conditional_mutual_information(traces, {n_secrets + a}, {n_secrets + b}, given) >
            options.independence_tol) {
          groups.unite(a, b);
        }
      }
    }
    // Pairwise independence can hide joint dependence (three announcements
    // tied by a parity). Factorizing is exact only if each group is
    // independent of all later groups given their parents; a group that is
    // not absorbs the later ones.
    std::vector<std::size_t> roots;
    for (std::size_t j = 0; j < n_obs; ++j) {
      if (groups.find(j) == j) roots.push_back(j);
    }
    for (std::size_t i = 0; i + 1 < roots.size(); ++i) {
      std::vector<std::size_t> head, tail, given;
      for (std::size_t j = 0; j < n_obs; ++j) {
        const auto r = groups.find(j);
        if (r == roots[i]) {
          head.push_back(n_secrets + j);
        } else if (r > roots[i]) {
          tail.push_back(n_secrets + j);
        } else {
          continue;
        }
        given = sorted_union(std::move(given), parents[j]);
      }
      if (conditional_mutual_information(traces, head, tail, given) > options.independence_tol) {
        for (std::size_t k = i + 1; k < roots.size(); ++k) groups.unite(roots[i], roots[k]);
        break;
      }
    }
  }

  for (std::size_t root = 0; root < n_obs; ++root) {
    if (groups.find(root) != root) continue;
    std::vector<std::size_t> members;
    std::vector<std::size_t> parent_idx;
    for (std::size_t j = 0; j < n_obs; ++j) {
      if (groups.find(j) != root) continue;
      members.push_back(j);
      parent_idx.insert(parent_idx.end(), parents[j].begin(), parents[j].end());
    }
    std::sort(parent_idx.begin(), parent_idx.end());
    parent_idx.erase(std::unique(parent_idx.begin(), parent_idx.end()), parent_idx.end());

    Factor f;
    std::vector<std::size_t> member_vars;
    for (auto j : members) {
      f.observables.push_back(model.observable_vars[j]);
      member_vars.push_back(n_secrets + j);
    }
    std::vector<const std::vector<std::string>*> parent_alphabets;
    for (auto p : parent_idx) {
      f.parents.push_back(model.secret_vars[p]);
      parent_alphabets.push_back(&traces.alphabet(p));
    }
    for (const auto& t : cartesian(parent_alphabets)) f.parent_keys.push_back(tuple_key(t));

    const auto child = tuple_column(traces, member_vars);
    for (const auto& t : child.labels) f.values.push_back(tuple_key(t));

    // Mixed-radix index of each record's parent assignment into parent_keys.
    std::vector<std::size_t> parent_row(traces.size(), 0);
    for (auto p : parent_idx) {
      const std::size_t card = traces.alphabet(p).size();
      const auto& col = traces.column(p);
      for (std::size_t r = 0; r < traces.size(); ++r) parent_row[r] = parent_row[r] * card + col[r];
    }

    const std::size_t width = f.values.size();
    std::vector<double> counts(f.parent_keys.size() * width, 0.0);
    for (std::size_t r = 0; r < traces.size(); ++r) counts[parent_row[r] * width + child.codes[r]] += 1.0;
    f.table.resize(counts.size());
    for (std::size_t pr = 0; pr < f.parent_keys.size(); ++pr) {
      double total = 0.0;
      for (std::size_t c = 0; c < width; ++c) total += counts[pr * width + c];
      const double denom = total + options.alpha * static_cast<double>(width);
      for (std::size_t c = 0; c < width; ++c) {
        f.table[pr * width + c] = denom > 0.0 ? (counts[pr * width + c] + options.alpha) / denom
                                              : 1.0 / static_cast<double>(width);
      }
    }
    model.factors.push_back(std::move(f));
  }
  model.validate();
  return model;
}

namespace {

// Per-factor lookup tables: which CPT row a secret tuple selects and which
// CPT column an observable tuple selects.
struct FactorIndex {
  std::vector<std::size_t> row_of_secret;
  std::vector<std::size_t> col_of_observable;
};

Channel assemble_channel(const DependencyModel& model, const std::vector<std::vector<std::string>>& secret_tuples,
                         const std::vector<std::vector<std::string>>& observable_tuples) {
  std::map<std::string, std::size_t> secret_pos;
  std::map<std::string, std::size_t> observable_pos;
  for (std::size_t i = 0; i < model.secret_vars.size(); ++i) secret_pos.emplace(model.secret_vars[i], i);
  for (std::size_t i = 0; i < model.observable_vars.size(); ++i) observable_pos.emplace(model.observable_vars[i], i);

  std::vector<FactorIndex> indices;
  for (const auto& f : model.factors) {
    FactorIndex fi;
    const auto rows = index_by_label(f.parent_keys);
    const auto cols = index_by_label(f.values);
    for (const auto& s : secret_tuples) {
      std::vector<std::string> parts;
      for (const auto& p : f.parents) parts.push_back(s[secret_pos.at(p)]);
      const auto it = rows.find(tuple_key(parts));
      if (it == rows.end()) throw InvalidArgument("model has no CPT row for parents '" + tuple_key(parts) + "'");
      fi.row_of_secret.push_back(it->second);
    }
    for (const auto& o : observable_tuples) {
      std::vector<std::string> parts;
      for (const auto& v : f.observables) parts.push_back(o[observable_pos.at(v)]);
      const auto it = cols.find(tuple_key(parts));
      fi.col_of_observable.push_back(it == cols.end() ? SIZE_MAX : it->second);
    }
    indices.push_back(std::move(fi));
  }

  const std::size_t n = secret_tuples.size();
  const std::size_t m = observable_tuples.size();
  std::vector<double> matrix(n * m, 1.0);
  for (std::size_t s = 0; s < n; ++s) {
    double total = 0.0;
    for (std::size_t o = 0; o < m; ++o) {
      double p = 1.0;
      for (std::size_t k = 0; k < model.factors.size(); ++k) {
        const auto col = indices[k].col_of_observable[o];
        p *= col == SIZE_MAX ? 0.0 : model.factors[k].prob(indices[k].row_of_secret[s], col);
      }
      matrix[s * m + o] = p;
      total += p;
    }
    if (!(total > 0.0)) {
      throw InvalidArgument("model assigns no probability to any retained observable for secret '" +
                            tuple_key(secret_tuples[s]) + "'");
    }
    for (std::size_t o = 0; o < m; ++o) matrix[s * m + o] /= total;
  }

  std::vector<std::string> secret_labels;
  std::vector<std::string> observable_labels;
  for (const auto& s : secret_tuples) secret_labels.push_back(tuple_key(s));
  for (const auto& o : observable_tuples) observable_labels.push_back(tuple_key(o));
  return {std::move(secret_labels), std::move(observable_labels), std::move(matrix)};
}

}  // namespace

Channel model_to_channel(const DependencyModel& model, const TraceSet& traces) {
  if (model.secret_vars != traces.secret_vars() || model.observable_vars != traces.observable_vars()) {
    throw InvalidArgument("model and trace set declare different variables");
  }
  if (traces.empty()) throw InvalidArgument("cannot build a channel from an empty trace set");
  const std::size_t n_secrets = traces.secret_vars().size();
  std::vector<std::size_t> secret_idx(n_secrets);
  std::iota(secret_idx.begin(), secret_idx.end(), 0);
  std::vector<std::size_t> observable_idx(traces.observable_vars().size());
  std::iota(observable_idx.begin(), observable_idx.end(), n_secrets);
  return assemble_channel(model, tuple_column(traces, secret_idx).labels, tuple_column(traces, observable_idx).labels);
}

Channel model_to_channel(const DependencyModel& model) {
  model.validate();
  std::vector<const std::vector<std::string>*> secret_alphabets;
  for (const auto& s : model.secret_vars) secret_alphabets.push_back(&model.alphabets.at(s));

  // Observable tuples: product over factors of each factor's value tuples.
  std::map<std::string, std::size_t> observable_pos;
  for (std::size_t i = 0; i < model.observable_vars.size(); ++i) observable_pos.emplace(model.observable_vars[i], i);
  std::vector<std::vector<std::string>> tuples{std::vector<std::string>(model.observable_vars.size())};
  for (const auto& f : model.factors) {
    std::vector<std::vector<std::string>> next;
    for (const auto& prefix : tuples) {
      for (const auto& value : f.values) {
        auto t = prefix;
        std::vector<std::string> parts;
        std::stringstream ss(value);
        std::string part;
        while (std::getline(ss, part, ',')) parts.push_back(part);
        if (value.empty()) parts.push_back("");
        if (parts.size() != f.observables.size()) throw InvalidArgument("factor value '" + value + "' has the wrong arity");
        for (std::size_t i = 0; i < parts.size(); ++i) t[observable_pos.at(f.observables[i])] = parts[i];
        next.push_back(std::move(t));
      }
    }
    tuples = std::move(next);
  }
  std::sort(tuples.begin(), tuples.end(), [](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [](const std::string& x, const std::string& y) { return natural_less(x, y); });
  });
  return assemble_channel(model, cartesian(secret_alphabets), tuples);
}

Estimate estimate_capacity(const TraceSet& traces, const EstimateOptions& options) {
  auto edges = learn_structure(traces, options.max_degree, options.struct_tol, options.target);
  auto model = fit_cpts(traces, edges, options.fit);
  auto channel = model_to_channel(model, traces);
  auto result = capacity(channel, options.method, options.ab_tol, options.max_iter);
  return Estimate{std::move(result), std::move(model), std::move(channel)};
}

}  // namespace leakmeter
