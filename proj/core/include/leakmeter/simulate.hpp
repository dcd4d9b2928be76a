#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "leakmeter/trace_set.hpp"

namespace leakmeter {

// Dining cryptographers: k participants on a ring, each tossing a coin that
// lands heads with probability `bias`. Exactly one participant pays.
struct DcConfig {
  std::size_t k = 3;
  double bias = 0.5;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;

  void validate() const;
};

// Crowds: `honest` + `corrupt` members. Each honest holder forwards with
// probability `pf` to a uniformly chosen member (itself included) and
// delivers otherwise. Corrupt members stop the message and record who handed
// it to them.
struct CrowdsConfig {
  std::size_t honest = 10;
  std::size_t corrupt = 2;
  double pf = 0.8;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  // Member slots (0 .. honest+corrupt-1) held by corrupt members; empty
  // means the last `corrupt` slots. Honest ids follow the remaining slots in
  // order. Only the member draw layout changes, not the protocol.
  std::vector<std::size_t> corrupt_slots;

  void validate() const;
};

/// Traces `s:payer,o:a0,...,o:a{k-1}`. Per record the payer is drawn
/// uniformly, then coins c0..c{k-1}; cryptographer i compares its coin with
/// c{(i+1) mod k} and announces payer-bit when they match, its negation
/// otherwise, i.e. a_i = [i == payer] xor c_i xor c_{i+1}.
TraceSet simulate_dc(const DcConfig& config);

/// Traces `s:initiator,o:detected`, conditioned on a corrupt member having
/// received the message (undetected runs are discarded). `detected` is the
/// honest member that handed the message to the first corrupt member.
TraceSet simulate_crowds(const CrowdsConfig& config);

}  // namespace leakmeter
