#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "leakmeter/learn.hpp"

namespace leakmeter {

enum class Protocol { dc, crowds };

std::optional<Protocol> parse_protocol(std::string_view text);
std::string_view to_string(Protocol protocol);

// Inclusive grid start, start+step, ..., up to stop (with 1e-9 step slack).
struct ParameterRange {
  double start = 0.0;
  double stop = 1.0;
  double step = 0.1;

  // "start:stop:step"
  static ParameterRange parse(std::string_view text);
  void validate(double lo, double hi) const;
  std::vector<double> values() const;
};

struct SweepSpec {
  Protocol protocol = Protocol::dc;
  std::size_t k = 3;
  std::size_t honest = 10;
  std::size_t corrupt = 2;
  // Coin bias for dc, forwarding probability for crowds.
  ParameterRange range;
  std::size_t samples = 100000;
  std::vector<std::uint64_t> seeds{0};
  EstimateOptions estimate;
  std::size_t jobs = 1;

  void validate() const;
};

struct SweepRow {
  double swept = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> estimated_bits;
  std::optional<double> exact_bits;
  std::string error;

  std::optional<double> abs_error() const;
};

/// Exact capacity of the protocol in `spec` at one swept value.
double exact_capacity(const SweepSpec& spec, double swept);

/// Simulate -> learn -> capacity for every (grid value, seed), plus one
/// oracle evaluation per grid value. Rows come back in grid order, seeds in
/// the given order, regardless of `jobs`. Failures land in SweepRow::error.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

/// Header "swept_param,seed,estimated_bits,exact_bits,abs_error,error".
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Shared number formatting for machine-readable output (shortest
/// round-trip representation).
std::string format_bits(double value);

}  // namespace leakmeter
