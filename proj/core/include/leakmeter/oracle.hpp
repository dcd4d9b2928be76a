#pragma once

#include <cstddef>

#include "leakmeter/channel.hpp"

namespace leakmeter {

/// Exact dining-cryptographers channel p(a | payer) by enumerating all 2^k
/// coin outcomes. Secrets are "0".."k-1"; observables are the announcement
/// vectors with odd parity, labelled like trace tuples ("1,0,0").
Channel oracle_dc_channel(std::size_t k, double bias);

/// Exact crowds channel p(detected | initiator), conditioned on detection.
///
/// With N = honest + corrupt members, every honest holder is visited
/// V = (1/N) / (1 - honest*pf/N) times in expectation, so
///   P(detected = i | initiator = i) ∝ corrupt/N + V*pf*corrupt/N
///   P(detected = h | initiator = i) ∝ V*pf*corrupt/N     (h != i)
Channel oracle_crowds_channel(std::size_t honest, std::size_t corrupt, double pf);

/// The same channel from a dense solve of the full absorbing chain (start
/// states, holder states, detected-with-predecessor states, delivered). Used
/// to cross-check the closed form; O(honest^3).
Channel crowds_channel_full_solve(std::size_t honest, std::size_t corrupt, double pf);

/// capacity(auto) on an exact channel.
CapacityResult oracle_capacity(const Channel& channel);

}  // namespace leakmeter
