#include "leakmeter/oracle.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "leakmeter/error.hpp"

namespace leakmeter {

namespace {

std::vector<std::string> numbered(std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  return labels;
}

void check_crowds(std::size_t honest, std::size_t corrupt, double pf) {
  if (honest < 2) throw InvalidArgument("crowds needs at least 2 honest members");
  if (corrupt < 1) throw InvalidArgument("crowds needs at least 1 corrupt member");
  if (!(pf >= 0.0 && pf <= 1.0)) throw InvalidArgument("forwarding probability must be in [0, 1]");
}

}  // namespace

Channel oracle_dc_channel(std::size_t k, double bias) {
  if (k < 3 || k > 24) throw InvalidArgument("dining cryptographers oracle needs 3 <= k <= 24");
  if (!(bias >= 0.0 && bias <= 1.0)) throw InvalidArgument("coin bias must be in [0, 1]");

  // Announcement vector as a bitmask, bit i = a_i. Columns in label order,
  // which for 0/1 tuples is lexicographic with a0 most significant.
  auto bit_of = [k](std::uint32_t mask, std::size_t i) { return (mask >> (k - 1 - i)) & 1u; };
  std::vector<std::uint32_t> columns;
  std::vector<std::string> labels;
  std::map<std::uint32_t, std::size_t> column_of;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    if (std::popcount(mask) % 2 == 0) continue;
    std::string label;
    for (std::size_t i = 0; i < k; ++i) {
      if (i > 0) label += ',';
      label += bit_of(mask, i) ? '1' : '0';
    }
    column_of.emplace(mask, columns.size());
    columns.push_back(mask);
    labels.push_back(std::move(label));
  }

  const std::size_t m = columns.size();
  std::vector<double> matrix(k * m, 0.0);
  for (std::uint32_t coins = 0; coins < (1u << k); ++coins) {
    const int heads = std::popcount(coins);
    const double weight = std::pow(bias, heads) * std::pow(1.0 - bias, static_cast<int>(k) - heads);
    if (weight == 0.0) continue;
    // Coin i is bit i of `coins`; d_i = c_i xor c_{i+1}.
    std::uint32_t differences = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint32_t d = ((coins >> i) & 1u) ^ ((coins >> ((i + 1) % k)) & 1u);
      differences |= d << (k - 1 - i);
    }
    for (std::size_t payer = 0; payer < k; ++payer) {
      const std::uint32_t announced = differences ^ (1u << (k - 1 - payer));
      matrix[payer * m + column_of.at(announced)] += weight;
    }
  }
  return {numbered(k), std::move(labels), std::move(matrix)};
}

Channel oracle_crowds_channel(std::size_t honest, std::size_t corrupt, double pf) {
  check_crowds(honest, corrupt, pf);
  const double n = static_cast<double>(honest);
  const double members = static_cast<double>(honest + corrupt);
  const double catch_prob = static_cast<double>(corrupt) / members;
  const double visits = (1.0 / members) / (1.0 - n * pf / members);
  const double via_other = visits * pf * catch_prob;
  const double at_initiator = catch_prob + via_other;
  const double total = at_initiator + (n - 1.0) * via_other;

  std::vector<double> matrix(honest * honest, via_other / total);
  for (std::size_t i = 0; i < honest; ++i) matrix[i * honest + i] = at_initiator / total;
  return {numbered(honest), numbered(honest), std::move(matrix)};
}

Channel crowds_channel_full_solve(std::size_t honest, std::size_t corrupt, double pf) {
  check_crowds(honest, corrupt, pf);
  const auto n = static_cast<Eigen::Index>(honest);
  const double members = static_cast<double>(honest + corrupt);
  const double catch_prob = static_cast<double>(corrupt) / members;

  // Transient: start(i) = 0..n-1, holder(h) = n..2n-1.
  // Absorbing: detected-after(h) = 0..n-1, delivered = n.
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2 * n, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index h = 0; h < n; ++h) q(i, n + h) = 1.0 / members;
    r(i, i) = catch_prob;
  }
  for (Eigen::Index h = 0; h < n; ++h) {
    for (Eigen::Index g = 0; g < n; ++g) q(n + h, n + g) = pf / members;
    r(n + h, h) = pf * catch_prob;
    r(n + h, n) = 1.0 - pf;
  }
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  const Eigen::MatrixXd absorb = (identity - q).partialPivLu().solve(r);

  std::vector<double> matrix(honest * honest);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double detected = absorb.row(i).head(n).sum();
    for (Eigen::Index h = 0; h < n; ++h) {
      matrix[static_cast<std::size_t>(i * n + h)] = absorb(i, h) / detected;
    }
  }
  return {numbered(honest), numbered(honest), std::move(matrix)};
}

CapacityResult oracle_capacity(const Channel& channel) { return capacity(channel, CapacityMethod::automatic); }

}  // namespace leakmeter
