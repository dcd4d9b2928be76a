#include "leakmeter/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "leakmeter/error.hpp"
#include "leakmeter/oracle.hpp"
#include "leakmeter/simulate.hpp"

namespace leakmeter {

namespace {

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw InvalidArgument("'" + std::string(text) + "' is not a number");
  return v;
}

CrowdsConfig crowds_config(const SweepSpec& spec, double pf, std::uint64_t seed) {
  CrowdsConfig c;
  c.honest = spec.honest;
  c.corrupt = spec.corrupt;
  c.pf = pf;
  c.samples = spec.samples;
  c.seed = seed;
  return c;
}

DcConfig dc_config(const SweepSpec& spec, double bias, std::uint64_t seed) {
  DcConfig c;
  c.k = spec.k;
  c.bias = bias;
  c.samples = spec.samples;
  c.seed = seed;
  return c;
}

std::string csv_safe(std::string text) {
  for (char& c : text) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

}  // namespace

std::optional<Protocol> parse_protocol(std::string_view text) {
  if (text == "dc") return Protocol::dc;
  if (text == "crowds") return Protocol::crowds;
  return std::nullopt;
}

std::string_view to_string(Protocol protocol) { return protocol == Protocol::dc ? "dc" : "crowds"; }

ParameterRange ParameterRange::parse(std::string_view text) {
  const auto first = text.find(':');
  const auto second = first == std::string_view::npos ? first : text.find(':', first + 1);
  if (second == std::string_view::npos || text.find(':', second + 1) != std::string_view::npos) {
    throw InvalidArgument("range must look like start:stop:step, got '" + std::string(text) + "'");
  }
  return {parse_double(text.substr(0, first)), parse_double(text.substr(first + 1, second - first - 1)),
          parse_double(text.substr(second + 1))};
}

void ParameterRange::validate(double lo, double hi) const {
  if (!(step > 0.0)) throw InvalidArgument("range step must be positive");
  if (!(start <= stop)) throw InvalidArgument("range start must not exceed stop");
  if (start < lo || stop > hi) throw InvalidArgument(fmt::format("range must lie within [{}, {}]", lo, hi));
}

std::vector<double> ParameterRange::values() const {
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = start + static_cast<double>(i) * step;
    out.push_back(std::round(v * 1e12) / 1e12);
  }
  return out;
}

void SweepSpec::validate() const {
  range.validate(0.0, 1.0);
  if (seeds.empty()) throw InvalidArgument("sweep needs at least one seed");
  if (jobs < 1) throw InvalidArgument("jobs must be >= 1");
  if (protocol == Protocol::dc) {
    dc_config(*this, range.start, 0).validate();
  } else {
    crowds_config(*this, range.start, 0).validate();
  }
}

std::optional<double> SweepRow::abs_error() const {
  if (!estimated_bits || !exact_bits) return std::nullopt;
  return std::abs(*estimated_bits - *exact_bits);
}

double exact_capacity(const SweepSpec& spec, double swept) {
  const auto channel = spec.protocol == Protocol::dc ? oracle_dc_channel(spec.k, swept)
                                                     : oracle_crowds_channel(spec.honest, spec.corrupt, swept);
  return oracle_capacity(channel).capacity_bits;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  const auto grid = spec.range.values();
  const std::size_t per_point = spec.seeds.size();
  std::vector<SweepRow> rows(grid.size() * per_point);

  std::vector<std::optional<double>> exact(grid.size());
  std::vector<std::string> exact_error(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    try {
      exact[g] = exact_capacity(spec, grid[g]);
    } catch (const std::exception& e) {
      exact_error[g] = std::string("oracle: ") + e.what();
    }
  }

  auto run_one = [&](std::size_t index) {
    const std::size_t g = index / per_point;
    SweepRow& row = rows[index];
    row.swept = grid[g];
    row.seed = spec.seeds[index % per_point];
    row.exact_bits = exact[g];
    row.error = exact_error[g];
    try {
      const TraceSet traces = spec.protocol == Protocol::dc ? simulate_dc(dc_config(spec, grid[g], row.seed))
                                                            : simulate_crowds(crowds_config(spec, grid[g], row.seed));
      const auto estimate = estimate_capacity(traces, spec.estimate);
      row.estimated_bits = estimate.capacity.capacity_bits;
      if (!estimate.capacity.converged) {
        row.error += std::string(row.error.empty() ? "" : "; ") + "capacity solver did not converge";
      }
    } catch (const std::exception& e) {
      row.error += std::string(row.error.empty() ? "" : "; ") + e.what();
    }
  };

  const std::size_t workers = std::min(spec.jobs, rows.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run_one(i);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < rows.size(); i = next.fetch_add(1)) run_one(i);
    });
  }
  pool.clear();
  return rows;
}

std::string format_bits(double value) {
  if (value == 0.0) return "0";
  return fmt::format("{}", value);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "swept_param,seed,estimated_bits,exact_bits,abs_error,error\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_bits(*v) : std::string{}; };
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{}\n", format_bits(r.swept), r.seed, opt(r.estimated_bits), opt(r.exact_bits),
                       opt(r.abs_error()), csv_safe(r.error));
  }
}

}  // namespace leakmeter
