#include "leakmeter/trace_set.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "leakmeter/error.hpp"

namespace leakmeter {

namespace {

bool is_unsigned_integer(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

}  // namespace

bool natural_less(std::string_view a, std::string_view b) {
  const bool a_num = is_unsigned_integer(a);
  const bool b_num = is_unsigned_integer(b);
  if (a_num && b_num) {
    // Compare by magnitude without parsing: strip leading zeros, then length.
    auto strip = [](std::string_view s) {
      const auto nz = s.find_first_not_of('0');
      return nz == std::string_view::npos ? std::string_view{} : s.substr(nz);
    };
    const auto sa = strip(a);
    const auto sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
    return a < b;
  }
  if (a_num != b_num) return a_num;
  return a < b;
}

std::string tuple_key(const std::vector<std::string>& parts) {
  std::string key;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) key += ',';
    key += parts[i];
  }
  return key;
}

TraceSet::TraceSet(std::vector<std::string> secret_vars, std::vector<std::string> observable_vars,
                   const std::vector<Record>& records)
    : secret_vars_(std::move(secret_vars)), observable_vars_(std::move(observable_vars)) {
  validate_names();
  const std::size_t width = secret_vars_.size() + observable_vars_.size();
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw InvalidArgument("trace record " + std::to_string(r) + " has " +
                            std::to_string(records[r].size()) + " values, expected " +
                            std::to_string(width));
    }
  }
  alphabets_.resize(width);
  columns_.resize(width);
  rows_ = records.size();
  for (std::size_t v = 0; v < width; ++v) {
    std::vector<std::string> values;
    values.reserve(records.size());
    for (const auto& rec : records) values.push_back(rec[v]);
    std::sort(values.begin(), values.end(),
              [](const std::string& a, const std::string& b) { return natural_less(a, b); });
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::map<std::string_view, std::uint32_t> code;
    for (std::uint32_t i = 0; i < values.size(); ++i) code.emplace(values[i], i);
    auto& col = columns_[v];
    col.reserve(records.size());
    for (const auto& rec : records) col.push_back(code.at(rec[v]));
    alphabets_[v] = std::move(values);
  }
}

TraceSet TraceSet::from_columns(std::vector<std::string> secret_vars,
                                std::vector<std::string> observable_vars,
                                const std::vector<std::vector<std::string>>& labels,
                                const std::vector<std::vector<std::uint32_t>>& columns) {
  TraceSet t;
  t.secret_vars_ = std::move(secret_vars);
  t.observable_vars_ = std::move(observable_vars);
  t.validate_names();
  const std::size_t width = t.secret_vars_.size() + t.observable_vars_.size();
  if (labels.size() != width || columns.size() != width) {
    throw InvalidArgument("column count does not match declared variables");
  }
  t.rows_ = columns.front().size();
  t.alphabets_.resize(width);
  t.columns_.resize(width);
  for (std::size_t v = 0; v < width; ++v) {
    if (columns[v].size() != t.rows_) throw InvalidArgument("trace columns have unequal lengths");
    std::vector<bool> seen(labels[v].size(), false);
    for (auto c : columns[v]) {
      if (c >= labels[v].size()) throw InvalidArgument("trace column code out of range");
      seen[c] = true;
    }
    std::vector<std::uint32_t> order;
    for (std::uint32_t i = 0; i < labels[v].size(); ++i) {
      if (seen[i]) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return natural_less(labels[v][a], labels[v][b]);
    });
    std::vector<std::uint32_t> remap(labels[v].size(), 0);
    for (std::uint32_t i = 0; i < order.size(); ++i) {
      remap[order[i]] = i;
      t.alphabets_[v].push_back(labels[v][order[i]]);
    }
    for (std::size_t i = 1; i < t.alphabets_[v].size(); ++i) {
      if (t.alphabets_[v][i] == t.alphabets_[v][i - 1]) throw InvalidArgument("duplicate label");
    }
    t.columns_[v].reserve(t.rows_);
    for (auto c : columns[v]) t.columns_[v].push_back(remap[c]);
  }
  return t;
}

void TraceSet::validate_names() const {
  if (secret_vars_.empty()) throw InvalidArgument("trace set needs at least one secret variable");
  if (observable_vars_.empty()) throw InvalidArgument("trace set needs at least one observable variable");
  std::set<std::string_view> names;
  for (const auto& n : secret_vars_) {
    if (n.empty() || !names.insert(n).second) throw InvalidArgument("duplicate or empty variable name '" + n + "'");
  }
  for (const auto& n : observable_vars_) {
    if (n.empty() || !names.insert(n).second) throw InvalidArgument("duplicate or empty variable name '" + n + "'");
  }
}

std::vector<std::string> TraceSet::variables() const {
  auto all = secret_vars_;
  all.insert(all.end(), observable_vars_.begin(), observable_vars_.end());
  return all;
}

bool TraceSet::has_variable(std::string_view variable) const {
  return std::find(secret_vars_.begin(), secret_vars_.end(), variable) != secret_vars_.end() ||
         std::find(observable_vars_.begin(), observable_vars_.end(), variable) != observable_vars_.end();
}

std::size_t TraceSet::index_of(std::string_view variable) const {
  for (std::size_t i = 0; i < secret_vars_.size(); ++i) {
    if (secret_vars_[i] == variable) return i;
  }
  for (std::size_t i = 0; i < observable_vars_.size(); ++i) {
    if (observable_vars_[i] == variable) return secret_vars_.size() + i;
  }
  throw InvalidArgument("unknown variable '" + std::string(variable) + "'");
}

const std::string& TraceSet::value(std::size_t row, std::size_t variable) const {
  return alphabets_.at(variable)[columns_.at(variable).at(row)];
}

TraceSet::Record TraceSet::record(std::size_t row) const {
  Record rec;
  rec.reserve(alphabets_.size());
  for (std::size_t v = 0; v < alphabets_.size(); ++v) rec.push_back(value(row, v));
  return rec;
}

void TraceSet::write_csv(std::ostream& out) const {
  std::string line;
  for (std::size_t i = 0; i < secret_vars_.size(); ++i) {
    if (i > 0) line += ',';
    line += "s:" + secret_vars_[i];
  }
  for (const auto& o : observable_vars_) line += ",o:" + o;
  line += '\n';
  out << line;
  for (std::size_t r = 0; r < rows_; ++r) {
    line.clear();
    for (std::size_t v = 0; v < alphabets_.size(); ++v) {
      if (v > 0) line += ',';
      line += value(r, v);
    }
    line += '\n';
    out << line;
  }
}

TraceSet TraceSet::read_csv(std::istream& in) {
  std::string line;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw IoError("trace CSV is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  const auto header = split_csv_line(line);
  std::vector<std::string> secrets;
  std::vector<std::string> observables;
  std::vector<std::size_t> secret_cols;
  std::vector<std::size_t> observable_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h.rfind("s:", 0) == 0) {
      secrets.push_back(h.substr(2));
      secret_cols.push_back(c);
    } else if (h.rfind("o:", 0) == 0) {
      observables.push_back(h.substr(2));
      observable_cols.push_back(c);
    } else {
      throw IoError("trace CSV header column '" + h + "' lacks an s: or o: prefix");
    }
  }
  std::vector<Record> records;
  std::size_t line_no = 1;
  while (next_line()) {
    ++line_no;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw IoError("trace CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                    " cells, header has " + std::to_string(header.size()));
    }
    Record rec;
    rec.reserve(cells.size());
    for (auto c : secret_cols) rec.push_back(std::move(cells[c]));
    for (auto c : observable_cols) rec.push_back(std::move(cells[c]));
    records.push_back(std::move(rec));
  }
  try {
    return TraceSet(std::move(secrets), std::move(observables), records);
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid trace CSV: ") + e.what());
  }
}

void TraceSet::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

TraceSet TraceSet::load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_csv(in);
}

TupleColumn tuple_column(const TraceSet& traces, const std::vector<std::size_t>& variables) {
  TupleColumn out;
  const std::size_t rows = traces.size();
  if (variables.empty()) {
    out.codes.assign(rows, 0);
    out.labels.push_back({});
    return out;
  }

  bool fits = true;
  std::uint64_t radix_product = 1;
  for (auto v : variables) {
    const std::uint64_t card = std::max<std::size_t>(1, traces.alphabet(v).size());
    if (radix_product > std::numeric_limits<std::uint64_t>::max() / card) {
      fits = false;
      break;
    }
    radix_product *= card;
  }

  std::vector<std::vector<std::uint32_t>> distinct;
  if (fits) {
    std::vector<std::uint64_t> keys(rows, 0);
    for (auto v : variables) {
      const std::uint64_t card = traces.alphabet(v).size();
      const auto& col = traces.column(v);
      for (std::size_t r = 0; r < rows; ++r) keys[r] = keys[r] * card + col[r];
    }
    std::vector<std::uint64_t> uniq = keys;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    out.codes.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      out.codes[r] = static_cast<std::uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), keys[r]) - uniq.begin());
    }
    for (auto key : uniq) {
      std::vector<std::uint32_t> parts(variables.size());
      for (std::size_t i = variables.size(); i-- > 0;) {
        const std::uint64_t card = traces.alphabet(variables[i]).size();
        parts[i] = static_cast<std::uint32_t>(key % card);
        key /= card;
      }
      distinct.push_back(std::move(parts));
    }
  } else {
    std::map<std::vector<std::uint32_t>, std::uint32_t> index;
    std::vector<std::vector<std::uint32_t>> per_row(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      per_row[r].reserve(variables.size());
      for (auto v : variables) per_row[r].push_back(traces.column(v)[r]);
      index.emplace(per_row[r], 0);
    }
    std::uint32_t next = 0;
    for (auto& [parts, code] : index) {
      code = next++;
      distinct.push_back(parts);
    }
    out.codes.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) out.codes[r] = index.at(per_row[r]);
  }

  out.labels.reserve(distinct.size());
  for (const auto& parts : distinct) {
    std::vector<std::string> label;
    label.reserve(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) label.push_back(traces.alphabet(variables[i])[parts[i]]);
    out.labels.push_back(std::move(label));
  }
  return out;
}

}  // namespace leakmeter
