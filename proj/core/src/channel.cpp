#include "leakmeter/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "leakmeter/error.hpp"

namespace leakmeter {

namespace {

constexpr double kUnderflowClamp = 1e-300;

void require_unique(const std::vector<std::string>& labels, const char* what) {
  std::set<std::string_view> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) throw InvalidArgument(std::string(what) + " has duplicate label '" + l + "'");
  }
}

// I(p) together with the per-secret divergences D(W_s || q).
struct Divergences {
  std::vector<double> per_secret;
  double information = 0.0;
};

Divergences divergences(const Channel& w, std::span<const double> input) {
  const auto q = w.output_distribution(input);
  Divergences out;
  out.per_secret.assign(w.rows(), 0.0);
  for (std::size_t s = 0; s < w.rows(); ++s) {
    double d = 0.0;
    for (std::size_t o = 0; o < w.cols(); ++o) {
      const double wso = w.at(s, o);
      if (wso <= 0.0) continue;
      if (q[o] <= 0.0) {
        d = std::numeric_limits<double>::infinity();
        break;
      }
      d += wso * std::log2(wso / q[o]);
    }
    out.per_secret[s] = d;
    if (input[s] > 0.0) out.information += input[s] * d;
  }
  out.information = std::max(out.information, 0.0);
  return out;
}

double finite_max(const std::vector<double>& values, std::span<const double> input) {
  double best = 0.0;
  for (std::size_t s = 0; s < values.size(); ++s) {
    if (input[s] > 0.0 && std::isfinite(values[s])) best = std::max(best, values[s]);
  }
  return best;
}

}  // namespace

Channel::Channel(std::vector<std::string> secrets, std::vector<std::string> observables, std::vector<double> matrix)
    : secrets_(std::move(secrets)), observables_(std::move(observables)), matrix_(std::move(matrix)) {
  if (secrets_.empty() || observables_.empty()) throw InvalidArgument("channel needs at least one secret and one observable");
  if (matrix_.size() != secrets_.size() * observables_.size()) {
    throw InvalidArgument("channel matrix size does not match its alphabets");
  }
  require_unique(secrets_, "channel secret alphabet");
  require_unique(observables_, "channel observable alphabet");
  for (std::size_t s = 0; s < rows(); ++s) {
    double total = 0.0;
    for (std::size_t o = 0; o < cols(); ++o) {
      const double p = matrix_[s * cols() + o];
      if (!(p >= 0.0 && p <= 1.0 + kProbabilityTolerance)) {
        throw InvalidArgument("channel entry for secret '" + secrets_[s] + "' is outside [0, 1]");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      throw InvalidArgument("channel row for secret '" + secrets_[s] + "' sums to " + std::to_string(total));
    }
    for (std::size_t o = 0; o < cols(); ++o) matrix_[s * cols() + o] /= total;
  }
}

Channel Channel::from_rows(std::vector<std::string> secrets, std::vector<std::string> observables,
                           const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != observables.size()) throw InvalidArgument("channel row length does not match observables");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  if (rows.size() != secrets.size()) throw InvalidArgument("channel row count does not match secrets");
  return {std::move(secrets), std::move(observables), std::move(flat)};
}

std::vector<double> Channel::output_distribution(std::span<const double> input) const {
  if (input.size() != rows()) throw InvalidArgument("input length does not match channel secrets");
  std::vector<double> q(cols(), 0.0);
  for (std::size_t s = 0; s < rows(); ++s) {
    if (input[s] == 0.0) continue;
    for (std::size_t o = 0; o < cols(); ++o) q[o] += input[s] * at(s, o);
  }
  return q;
}

Channel Channel::without_empty_columns() const {
  std::vector<std::size_t> keep;
  for (std::size_t o = 0; o < cols(); ++o) {
    for (std::size_t s = 0; s < rows(); ++s) {
      if (at(s, o) > 0.0) {
        keep.push_back(o);
        break;
      }
    }
  }
  if (keep.size() == cols()) return *this;
  std::vector<std::string> labels;
  for (auto o : keep) labels.push_back(observables_[o]);
  std::vector<double> m;
  m.reserve(rows() * keep.size());
  for (std::size_t s = 0; s < rows(); ++s) {
    for (auto o : keep) m.push_back(at(s, o));
  }
  return {secrets_, std::move(labels), std::move(m)};
}

std::string Channel::to_json() const {
  nlohmann::ordered_json j;
  j["secrets"] = secrets_;
  j["observables"] = observables_;
  auto matrix = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < rows(); ++s) {
    auto r = row(s);
    matrix.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["matrix"] = std::move(matrix);
  return j.dump(2) + "\n";
}

Channel Channel::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return from_rows(j.at("secrets").get<std::vector<std::string>>(),
                     j.at("observables").get<std::vector<std::string>>(),
                     j.at("matrix").get<std::vector<std::vector<double>>>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed channel JSON: ") + e.what());
  }
}

void Channel::save_json(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_json();
  if (!out) throw IoError("failed writing '" + path + "'");
}

Channel Channel::load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

std::string_view to_string(CapacityMethod method) {
  switch (method) {
    case CapacityMethod::automatic: return "auto";
    case CapacityMethod::symmetric: return "symmetric";
    case CapacityMethod::arimoto_blahut: return "arimoto_blahut";
  }
  return "unknown";
}

std::optional<CapacityMethod> parse_capacity_method(std::string_view text) {
  if (text == "auto") return CapacityMethod::automatic;
  if (text == "symmetric") return CapacityMethod::symmetric;
  if (text == "arimoto_blahut" || text == "ab") return CapacityMethod::arimoto_blahut;
  return std::nullopt;
}

JointDistribution joint_from(const Channel& channel, const DiscreteDistribution& input) {
  if (input.alphabet() != channel.secrets()) throw InvalidArgument("input distribution is not over the channel's secrets");
  std::vector<double> p(channel.rows() * channel.cols());
  for (std::size_t s = 0; s < channel.rows(); ++s) {
    for (std::size_t o = 0; o < channel.cols(); ++o) p[s * channel.cols() + o] = input[s] * channel.at(s, o);
  }
  return {channel.secrets(), channel.observables(), std::move(p)};
}

bool is_row_symmetric(const Channel& channel, double tol) {
  auto sorted_row = [&](std::size_t s) {
    auto r = channel.row(s);
    std::vector<double> v(r.begin(), r.end());
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
  };
  const auto reference = sorted_row(0);
  for (std::size_t s = 1; s < channel.rows(); ++s) {
    const auto other = sorted_row(s);
    for (std::size_t o = 0; o < other.size(); ++o) {
      if (std::abs(other[o] - reference[o]) > tol) return false;
    }
  }
  return true;
}

bool uniform_input_is_optimal(const Channel& channel, double tol) {
  const std::vector<double> uniform(channel.rows(), 1.0 / static_cast<double>(channel.rows()));
  const auto div = divergences(channel, uniform);
  const auto [lo, hi] = std::minmax_element(div.per_secret.begin(), div.per_secret.end());
  return std::isfinite(*hi) && *hi - *lo <= tol;
}

CapacityResult symmetric_capacity(const Channel& channel, double tol) {
  if (!is_row_symmetric(channel, tol)) throw NotRowSymmetric("channel is not row-symmetric");
  if (!uniform_input_is_optimal(channel, tol)) {
    throw NotRowSymmetric("channel rows are permutations of each other but the uniform input is not capacity-achieving");
  }
  auto input = DiscreteDistribution::uniform(channel.secrets());
  const auto q = channel.output_distribution(input.probs());
  const double row_entropy = entropy_bits(channel.row(0));
  const double c = std::max(entropy_bits(q) - row_entropy, 0.0);
  const auto div = divergences(channel, input.probs());
  return CapacityResult{
      .capacity_bits = c,
      .input_distribution = std::move(input),
      .iterations = 0,
      .converged = true,
      .method = CapacityMethod::symmetric,
      .upper_bound_bits = finite_max(div.per_secret, std::vector<double>(channel.rows(), 1.0)),
  };
}

CapacityResult arimoto_blahut(const Channel& channel, const ArimotoBlahutOptions& options) {
  if (!(options.tol > 0.0)) throw InvalidArgument("Arimoto-Blahut tolerance must be positive");
  if (options.max_iter < 1) throw InvalidArgument("Arimoto-Blahut needs max_iter >= 1");

  const Channel w = channel.without_empty_columns();
  const std::size_t n = w.rows();
  const std::size_t m = w.cols();

  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  if (!options.initial.empty()) {
    if (options.initial.size() != n) throw InvalidArgument("initial input length does not match channel secrets");
    double total = 0.0;
    for (double v : options.initial) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("initial input must be strictly positive");
      total += v;
    }
    for (std::size_t s = 0; s < n; ++s) p[s] = options.initial[s] / total;
  }

  double previous = divergences(w, p).information;
  double current = previous;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> log_weight(n);

  while (iterations < options.max_iter) {
    const auto q = w.output_distribution(p);

    // p(s) <- prod_o p(s|o)^p(o|s), normalized; exponents in the log domain.
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
      if (p[s] <= 0.0) {
        log_weight[s] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double acc = 0.0;
      for (std::size_t o = 0; o < m; ++o) {
        const double wso = w.at(s, o);
        if (wso <= 0.0) continue;
        const double posterior = p[s] * wso / q[o];
        acc += wso * std::log(posterior);
      }
      log_weight[s] = acc;
      max_log = std::max(max_log, acc);
    }
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double v = std::isfinite(log_weight[s]) ? std::exp(log_weight[s] - max_log) : 0.0;
      p[s] = v;
      total += v;
    }
    bool clamped = false;
    for (std::size_t s = 0; s < n; ++s) {
      p[s] /= total;
      if (p[s] > 0.0 && p[s] < kUnderflowClamp) {
        p[s] = 0.0;
        clamped = true;
      }
    }
    if (clamped) {
      const double t = std::accumulate(p.begin(), p.end(), 0.0);
      for (double& v : p) v /= t;
    }

    ++iterations;
    current = divergences(w, p).information;
    if (options.observer) options.observer(iterations, current);
    if (std::abs(current - previous) < options.tol) {
      converged = true;
      break;
    }
    previous = current;
  }

  const auto div = divergences(w, p);
  return CapacityResult{
      .capacity_bits = current,
      .input_distribution = DiscreteDistribution(channel.secrets(), p),
      .iterations = iterations,
      .converged = converged,
      .method = CapacityMethod::arimoto_blahut,
      .upper_bound_bits = std::max(finite_max(div.per_secret, std::vector<double>(n, 1.0)), current),
  };
}

CapacityResult arimoto_blahut(const Channel& channel, double tol, std::size_t max_iter) {
  ArimotoBlahutOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return arimoto_blahut(channel, options);
}

CapacityResult capacity(const Channel& channel, CapacityMethod method, double tol, std::size_t max_iter) {
  switch (method) {
    case CapacityMethod::symmetric:
      return symmetric_capacity(channel);
    case CapacityMethod::arimoto_blahut:
      return arimoto_blahut(channel, tol, max_iter);
    case CapacityMethod::automatic:
      break;
  }
  if (is_row_symmetric(channel, kSymmetryTolerance) && uniform_input_is_optimal(channel, kSymmetryTolerance)) {
    return symmetric_capacity(channel);
  }
  return arimoto_blahut(channel, tol, max_iter);
}

double max_abs_difference(const Channel& a, const Channel& b) {
  if (std::set(a.secrets().begin(), a.secrets().end()) != std::set(b.secrets().begin(), b.secrets().end())) {
    throw InvalidArgument("channels have different secret alphabets");
  }
  std::map<std::string_view, std::size_t> b_rows;
  std::map<std::string_view, std::size_t> b_cols;
  for (std::size_t s = 0; s < b.rows(); ++s) b_rows.emplace(b.secrets()[s], s);
  for (std::size_t o = 0; o < b.cols(); ++o) b_cols.emplace(b.observables()[o], o);
  std::set<std::string_view> a_cols(a.observables().begin(), a.observables().end());

  double worst = 0.0;
  for (std::size_t s = 0; s < a.rows(); ++s) {
    const std::size_t bs = b_rows.at(a.secrets()[s]);
    for (std::size_t o = 0; o < a.cols(); ++o) {
      const auto it = b_cols.find(a.observables()[o]);
      const double bv = it == b_cols.end() ? 0.0 : b.at(bs, it->second);
      worst = std::max(worst, std::abs(a.at(s, o) - bv));
    }
    for (std::size_t o = 0; o < b.cols(); ++o) {
      if (!a_cols.contains(b.observables()[o])) worst = std::max(worst, b.at(bs, o));
    }
  }
  return worst;
}

}  // namespace leakmeter
