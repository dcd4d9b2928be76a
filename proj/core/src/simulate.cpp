#include "leakmeter/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "leakmeter/error.hpp"
#include "leakmeter/rng.hpp"

namespace leakmeter {

namespace {

std::vector<std::string> numbered(std::size_t n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  return labels;
}

constexpr std::uint64_t kMaxFruitlessRuns = 100'000'000;

}  // namespace

void DcConfig::validate() const {
  if (k < 3) throw InvalidArgument("dining cryptographers needs k >= 3");
  if (k > 30) throw InvalidArgument("dining cryptographers supports k <= 30");
  if (!(bias >= 0.0 && bias <= 1.0)) throw InvalidArgument("coin bias must be in [0, 1]");
  if (samples < 1) throw InvalidArgument("samples must be >= 1");
}

void CrowdsConfig::validate() const {
  if (honest < 2) throw InvalidArgument("crowds needs at least 2 honest members");
  if (corrupt < 1) throw InvalidArgument("crowds needs at least 1 corrupt member");
  if (!(pf >= 0.0 && pf <= 1.0)) throw InvalidArgument("forwarding probability must be in [0, 1]");
  if (samples < 1) throw InvalidArgument("samples must be >= 1");
  if (!corrupt_slots.empty()) {
    auto slots = corrupt_slots;
    std::sort(slots.begin(), slots.end());
    if (slots.size() != corrupt || std::adjacent_find(slots.begin(), slots.end()) != slots.end() ||
        slots.back() >= honest + corrupt) {
      throw InvalidArgument("corrupt_slots must list exactly `corrupt` distinct member slots");
    }
  }
}

TraceSet simulate_dc(const DcConfig& config) {
  config.validate();
  const std::size_t k = config.k;
  Rng rng(config.seed);

  std::vector<std::vector<std::uint32_t>> columns(k + 1, std::vector<std::uint32_t>(config.samples));
  std::vector<std::uint32_t> coins(k);
  for (std::size_t r = 0; r < config.samples; ++r) {
    const auto payer = static_cast<std::size_t>(rng.below(k));
    for (auto& c : coins) c = rng.bernoulli(config.bias) ? 1u : 0u;
    columns[0][r] = static_cast<std::uint32_t>(payer);
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint32_t paid = i == payer ? 1u : 0u;
      columns[i + 1][r] = paid ^ coins[i] ^ coins[(i + 1) % k];
    }
  }

  std::vector<std::string> observables;
  std::vector<std::vector<std::string>> labels{numbered(k)};
  for (std::size_t i = 0; i < k; ++i) {
    observables.push_back("a" + std::to_string(i));
    labels.push_back({"0", "1"});
  }
  return TraceSet::from_columns({"payer"}, std::move(observables), labels, columns);
}

TraceSet simulate_crowds(const CrowdsConfig& config) {
  config.validate();
  const std::size_t members = config.honest + config.corrupt;

  // honest_id[slot] is the honest id at that slot, or -1 for a corrupt slot.
  std::vector<long> honest_id(members, 0);
  std::vector<std::size_t> slot_of_honest;
  {
    std::vector<bool> corrupt(members, false);
    if (config.corrupt_slots.empty()) {
      for (std::size_t i = config.honest; i < members; ++i) corrupt[i] = true;
    } else {
      for (auto s : config.corrupt_slots) corrupt[s] = true;
    }
    for (std::size_t s = 0; s < members; ++s) {
      if (corrupt[s]) {
        honest_id[s] = -1;
      } else {
        honest_id[s] = static_cast<long>(slot_of_honest.size());
        slot_of_honest.push_back(s);
      }
    }
  }

  Rng rng(config.seed);
  std::vector<std::vector<std::uint32_t>> columns(2, std::vector<std::uint32_t>(config.samples));
  std::uint64_t fruitless = 0;
  for (std::size_t r = 0; r < config.samples;) {
    const auto initiator = static_cast<std::uint32_t>(rng.below(config.honest));
    auto predecessor = initiator;
    auto target = static_cast<std::size_t>(rng.below(members));
    bool detected = false;
    while (true) {
      if (honest_id[target] < 0) {
        detected = true;
        break;
      }
      if (!rng.bernoulli(config.pf)) break;
      predecessor = static_cast<std::uint32_t>(honest_id[target]);
      target = static_cast<std::size_t>(rng.below(members));
    }
    if (!detected) {
      if (++fruitless > kMaxFruitlessRuns) throw InvalidArgument("crowds simulation never reached a corrupt member");
      continue;
    }
    fruitless = 0;
    columns[0][r] = initiator;
    columns[1][r] = predecessor;
    ++r;
  }
  const auto labels = numbered(config.honest);
  return TraceSet::from_columns({"initiator"}, {"detected"}, {labels, labels}, columns);
}

}  // namespace leakmeter
