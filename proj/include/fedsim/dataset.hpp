#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/objective.hpp"

namespace fedsim {

// Labeled sparse rows as parsed from LIBSVM-format text. Feature indices are
// stored 0-based internally; d is the max 1-based index seen in the input (or
// set explicitly by generators).
struct SparseDataset {
  std::vector<LabeledRow> rows;
  int d = 0;

  int M() const { return static_cast<int>(rows.size()); }
};

// Line format: `<label> <idx>:<val> <idx>:<val> ...`, `#` starts a comment.
// Labels 0/+1/1/-1 accepted, 0 mapping to -1. Indices are 1-based and must be
// strictly increasing within a line. Errors name the offending line.
SparseDataset parse_libsvm(std::istream& in);
SparseDataset parse_libsvm(std::string_view text);
SparseDataset load_libsvm_file(const std::string& path);

std::string serialize_libsvm(const SparseDataset& ds);

// Contiguous near-equal blocks: floor(M/n) rows each, the first M mod n
// clients receiving one extra row. Requires n >= 2 and M >= n.
std::vector<std::pair<int, int>> partition_ranges(int M, int n);

// Unregularized logistic clients over the partition blocks. The optional
// shuffle permutes rows with a seeded draw before splitting.
std::vector<ClientObjective> partition(const SparseDataset& ds, int n);
std::vector<ClientObjective> partition(const SparseDataset& ds, int n, bool shuffle,
                                       std::uint64_t seed);

struct MuRule {
  enum class Kind { absolute, relative };  // relative: mu = value * L_data
  Kind kind = Kind::relative;
  double value = 1e-4;

  bool operator==(const MuRule&) const = default;
};

// Partition + regularize + global constants. The data smoothness L_data is
// computed first on the unregularized loss, then mu = rule(L_data), and the
// problem's L is L_data + mu.
Problem build_logistic_problem(const SparseDataset& ds, int n, MuRule rule,
                               bool shuffle = false, std::uint64_t seed = 0);

// Per-client diagonal quadratics with curvatures log-uniform in [1, kappa]
// (both extremes attained), seeded heterogeneous offsets, and a closed-form
// minimizer. Requires n >= 2, d >= 1, kappa >= 1.
Problem synthesize_quadratic(int n, int d, double kappa, std::uint64_t seed);

// Binary-feature logistic rows shaped like small LIBSVM classification sets:
// ~avg_nnz active features per row, labels from a random linear teacher with
// a fraction of labels flipped.
SparseDataset synthesize_logistic_data(int M, int d, std::uint64_t seed, int avg_nnz = 14,
                                       double label_flip_prob = 0.2);

}  // namespace fedsim
