#pragma once

// Basis pursuit denoising with a row-selected Walsh sensing matrix.
//
//   minimize tau ||x||_1 + 1/2 ||A x - b||^2,   A = rows of W_p
//
// posed as the bounds-only QP over x = u - v with u, v >= 0. The quadratic
// term stays factored as F^T diag(mask) F with F = [W, -W], so every product
// with A goes through the Walsh diagram.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "symqp/qp.hpp"

namespace symqp {

enum class RowSelection {
  Leading,  // the first m rows: a cofactor block on the leading row bits
  Random,   // m distinct rows drawn uniformly
};

const char* to_string(RowSelection s);
RowSelection parse_row_selection(const std::string& s);

struct BpdnParams {
  int log_n = 12;
  int log_m = 10;
  int k = 50;
  double tau = 1.0;
  std::uint64_t seed = 1;
  RowSelection selection = RowSelection::Random;
  /// Standard deviation of additive Gaussian measurement noise.
  double noise = 0.0;
};

struct BpdnInstance {
  int log_n = 0;
  int log_m = 0;
  double tau = 1.0;
  RowSelection selection = RowSelection::Random;
  std::vector<std::uint64_t> rows;  // selected Walsh rows, increasing
  std::vector<double> x_true;       // length n, k nonzeros
  std::vector<double> b;            // one entry per selected row

  std::uint64_t n() const { return std::uint64_t{1} << log_n; }
  std::uint64_t m() const { return std::uint64_t{1} << log_m; }
  std::size_t sparsity() const;
};

/// Throws InvalidArgument for log_m >= log_n, k > m, k < 0, tau <= 0 or
/// log_n outside [1, 24].
BpdnInstance make_bpdn(const BpdnParams& p);
void validate(const BpdnInstance& inst);

/// W_p(r, c) = (-1)^popcount(r & c).
double walsh_entry(std::uint64_t r, std::uint64_t c);

/// Columns: a split bit (u first, then v) followed by the signal bits.
QpStandard bpdn_qp(const BpdnInstance& inst, AddManager& m);

/// x = u - v from a solver column vector of length 2n.
std::vector<double> bpdn_signal(const BpdnInstance& inst, const std::vector<double>& z);

/// tau ||x||_1 + 1/2 ||A x - b||^2, evaluated densely.
double bpdn_objective(const BpdnInstance& inst, const std::vector<double>& x);

/// Constant 1/2 ||b||^2 dropped from the QP objective.
double bpdn_offset(const BpdnInstance& inst);

void write_bpdn(std::ostream& os, const BpdnInstance& inst);
BpdnInstance read_bpdn(std::istream& is);

}  // namespace symqp
