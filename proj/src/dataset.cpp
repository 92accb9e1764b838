#include "fedsim/dataset.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

[[noreturn]] void parse_error(long line_no, const std::string& what) {
  throw std::runtime_error("libsvm parse error: " + what + " at line " +
                           std::to_string(line_no));
}

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);  // from_chars rejects it
  if (tok.empty()) return false;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_int(std::string_view tok, long& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

SparseDataset parse_libsvm(std::istream& in) {
  SparseDataset ds;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);

    std::string_view rest(line);
    auto next_token = [&rest]() -> std::string_view {
      std::size_t b = 0;
      while (b < rest.size() && std::isspace(static_cast<unsigned char>(rest[b]))) ++b;
      std::size_t e = b;
      while (e < rest.size() && !std::isspace(static_cast<unsigned char>(rest[e]))) ++e;
      std::string_view tok = rest.substr(b, e - b);
      rest.remove_prefix(e);
      return tok;
    };

    const std::string_view label_tok = next_token();
    if (label_tok.empty()) continue;  // blank or comment-only line

    double label_raw = 0.0;
    if (!parse_double(label_tok, label_raw))
      parse_error(line_no, "non-numeric label '" + std::string(label_tok) + "'");
    double label;
    if (label_raw == 0.0) label = -1.0;
    else if (label_raw == 1.0) label = 1.0;
    else if (label_raw == -1.0) label = -1.0;
    else parse_error(line_no, "label must be one of 0, +1, -1");

    LabeledRow row;
    row.label = label;
    long prev_idx = 0;
    for (std::string_view tok = next_token(); !tok.empty(); tok = next_token()) {
      const std::size_t colon = tok.find(':');
      long idx = 0;
      double val = 0.0;
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size() ||
          !parse_int(tok.substr(0, colon), idx) || !parse_double(tok.substr(colon + 1), val))
        parse_error(line_no, "malformed feature token '" + std::string(tok) + "'");
      if (idx < 1) parse_error(line_no, "feature index must be >= 1");
      if (idx <= prev_idx) parse_error(line_no, "indices not strictly increasing");
      prev_idx = idx;
      row.features.idx.push_back(static_cast<int>(idx - 1));
      row.features.val.push_back(val);
      if (idx > ds.d) ds.d = static_cast<int>(idx);
    }
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

SparseDataset parse_libsvm(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in);
}

SparseDataset load_libsvm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return parse_libsvm(in);
}

std::string serialize_libsvm(const SparseDataset& ds) {
  std::string out;
  char buf[64];
  for (const LabeledRow& row : ds.rows) {
    out += row.label > 0 ? "+1" : "-1";
    for (std::size_t k = 0; k < row.features.idx.size(); ++k) {
      std::snprintf(buf, sizeof buf, " %d:%.17g", row.features.idx[k] + 1, row.features.val[k]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<std::pair<int, int>> partition_ranges(int M, int n) {
  if (n < 2) throw std::invalid_argument("partition: need n >= 2 clients");
  if (M < n)
    throw std::invalid_argument("partition: M = " + std::to_string(M) +
                                " rows cannot cover n = " + std::to_string(n) + " clients");
  const int base = M / n;
  const int extra = M % n;
  std::vector<std::pair<int, int>> ranges;
  ranges.reserve(static_cast<std::size_t>(n));
  int at = 0;
  for (int i = 0; i < n; ++i) {
    const int len = base + (i < extra ? 1 : 0);
    ranges.emplace_back(at, at + len);
    at += len;
  }
  return ranges;
}

namespace {

std::vector<ClientObjective> partition_rows(const std::vector<LabeledRow>& rows, int d, int n,
                                            double mu) {
  const auto ranges = partition_ranges(static_cast<int>(rows.size()), n);
  std::vector<ClientObjective> clients;
  clients.reserve(static_cast<std::size_t>(n));
  for (const auto& [lo, hi] : ranges) {
    std::vector<LabeledRow> block(rows.begin() + lo, rows.begin() + hi);
    clients.push_back(ClientObjective::logistic(std::move(block), d, mu));
  }
  return clients;
}

std::vector<LabeledRow> maybe_shuffled(const SparseDataset& ds, bool shuffle,
                                       std::uint64_t seed) {
  std::vector<LabeledRow> rows = ds.rows;
  if (shuffle) {
    SeededGenerator g(seed, 7);  // dedicated shuffle stream
    for (std::size_t i = rows.size(); i > 1; --i) {
      const std::size_t j = g.next_below(i);
      std::swap(rows[i - 1], rows[j]);
    }
  }
  return rows;
}

}  // namespace

std::vector<ClientObjective> partition(const SparseDataset& ds, int n) {
  return partition_rows(ds.rows, ds.d, n, 0.0);
}

std::vector<ClientObjective> partition(const SparseDataset& ds, int n, bool shuffle,
                                       std::uint64_t seed) {
  return partition_rows(maybe_shuffled(ds, shuffle, seed), ds.d, n, 0.0);
}

Problem build_logistic_problem(const SparseDataset& ds, int n, MuRule rule, bool shuffle,
                               std::uint64_t seed) {
  const std::vector<LabeledRow> rows = maybe_shuffled(ds, shuffle, seed);
  const auto ranges = partition_ranges(static_cast<int>(rows.size()), n);

  // Data smoothness first, on the unregularized loss, so a relative mu rule
  // has a fixed point: mu = factor * L_data, L = L_data + mu.
  std::vector<double> data_lip(ranges.size(), 0.0);
  double l_data = 0.0;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto& [lo, hi] = ranges[i];
    std::vector<SparseVec> feats;
    feats.reserve(static_cast<std::size_t>(hi - lo));
    for (int r = lo; r < hi; ++r) feats.push_back(rows[static_cast<std::size_t>(r)].features);
    data_lip[i] = top_gram_eigenvalue(feats, ds.d) / (4.0 * static_cast<double>(hi - lo));
    l_data = std::max(l_data, data_lip[i]);
  }
  const double mu = rule.kind == MuRule::Kind::absolute ? rule.value : rule.value * l_data;

  std::vector<ClientObjective> clients;
  clients.reserve(ranges.size());
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto& [lo, hi] = ranges[i];
    std::vector<LabeledRow> block(rows.begin() + lo, rows.begin() + hi);
    clients.push_back(ClientObjective::logistic(std::move(block), ds.d, mu, data_lip[i]));
  }
  return make_problem(std::move(clients));
}

Problem synthesize_quadratic(int n, int d, double kappa, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("synthesize_quadratic: need n >= 2");
  if (d < 1) throw std::invalid_argument("synthesize_quadratic: need d >= 1");
  if (kappa < 1.0) throw std::invalid_argument("synthesize_quadratic: need kappa >= 1");

  SeededGenerator g(seed, 3);  // data-synthesis stream
  const double log_kappa = std::log(kappa);
  std::vector<ClientObjective> clients;
  clients.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vec curv(static_cast<std::size_t>(d));
    Vec off(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
      curv[static_cast<std::size_t>(j)] = std::exp(g.next_unit() * log_kappa);
    for (int j = 0; j < d; ++j)
      off[static_cast<std::size_t>(j)] = 2.0 * g.next_unit() - 1.0;
    // Pin the extremes so the global constants are exactly 1 and kappa.
    if (i == 0) curv[0] = 1.0;
    if (i == 1) curv[static_cast<std::size_t>(d - 1)] = kappa;
    clients.push_back(ClientObjective::quadratic_diag(std::move(curv), std::move(off)));
  }
  return make_problem(std::move(clients));
}

SparseDataset synthesize_logistic_data(int M, int d, std::uint64_t seed, int avg_nnz,
                                       double label_flip_prob) {
  if (M < 1 || d < 1) throw std::invalid_argument("synthesize_logistic_data: M, d must be >= 1");
  SeededGenerator g(seed, 4);
  Vec teacher(static_cast<std::size_t>(d));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int j = 0; j < d; ++j)
    teacher[static_cast<std::size_t>(j)] = (2.0 * g.next_unit() - 1.0) * scale;

  const double density = std::min(1.0, static_cast<double>(avg_nnz) / static_cast<double>(d));
  SparseDataset ds;
  ds.d = d;
  ds.rows.reserve(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    LabeledRow row;
    double margin = 0.0;
    for (int j = 0; j < d; ++j) {
      if (g.next_unit() < density) {
        row.features.idx.push_back(j);
        row.features.val.push_back(1.0);
        margin += teacher[static_cast<std::size_t>(j)];
      }
    }
    row.label = margin >= 0.0 ? 1.0 : -1.0;
    if (g.next_unit() < label_flip_prob) row.label = -row.label;
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

}  // namespace fedsim
