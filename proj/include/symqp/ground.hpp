#pragma once

// The naive ground-and-solve path: explicit matrices obtained either by
// enumerating a program's guards or by expanding compiled decision diagrams.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "symqp/foqp.hpp"
#include "symqp/qp.hpp"

namespace symqp {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

/// Dense normal form of a program, in the same row/column layout as compile().
struct GroundProgram {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::MatrixXd Q;
  Eigen::VectorXd row_mask;
  Eigen::VectorXd ge_mask;
  Eigen::VectorXd col_mask;
};

/// Sparse normal form of a compiled program.
struct GroundQp {
  SparseMatrix A;
  SparseMatrix Q;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd row_mask;
  Eigen::VectorXd ge_mask;
  Eigen::VectorXd col_mask;
};

inline constexpr int kDefaultGroundBits = 24;

/// Enumerates every assignment of every guard. Independent of the decision
/// diagram code; reproduces compile()'s floating-point evaluation order.
GroundProgram ground(const Foqp& f, int bit_budget = kDefaultGroundBits);

/// Expands compiled diagrams into sparse matrices by walking nonzero paths.
/// Each dimension and nnz(A) must fit in 2^bit_budget.
GroundQp ground_qp(const QpStandard& qp, int bit_budget = kDefaultGroundBits);

/// Nonzero entries of a matrix diagram as (row, col, value), row-major order.
std::vector<Eigen::Triplet<double, std::int64_t>> nonzero_entries(const MatF& a);
Eigen::VectorXd to_eigen(const VecF& v);

/// Coordinate text format: "rows cols nnz" then one "row col value" per line.
void write_coordinate(std::ostream& os, const SparseMatrix& a);
SparseMatrix read_coordinate(std::istream& is);

}  // namespace symqp
