#pragma once

// Standard-form quadratic programs held as decision diagrams, and the direct
// compiler from FOQP syntax.
//
//   minimize c^T x + 1/2 x^T Q x  subject to  A x (>= | =) b,  x >= 0
//
// Rows are indexed by block bits followed by row bits (block-major); columns by
// column bits. Rows and columns outside the masks are structurally zero and
// carry no unknowns. Inequality rows receive a surplus variable in the solver.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "symqp/foqp.hpp"
#include "symqp/linalg.hpp"

namespace symqp {

/// Quadratic term kept in factored form, Q = F^T diag(weight) F, where F maps
/// the columns to some other index space. Products never form Q.
struct QuadFactor {
  MatF F;
  VecF weight;  // over F.row_bits
};

struct QpStandard {
  MatF A;
  VecF b;
  VecF c;
  MatF Q;  // rows over col_bits, columns over colp_bits
  VecF row_mask;
  VecF ge_mask;  // active rows carrying a surplus variable
  VecF col_mask;
  std::vector<VarId> row_bits;  // block bits first
  std::vector<VarId> col_bits;
  std::vector<VarId> colp_bits;
  std::size_t block_bits = 0;
  /// Added to the explicit Q when present.
  std::optional<QuadFactor> q_factor;

  AddManager& manager() const { return A.manager(); }
  bool has_rows() const;
  bool q_zero() const;
  bool q_diagonal() const;
  /// Diagonal of Q as a vector over col_bits.
  VecF q_diag() const;
  /// Q v for v over col_bits.
  VecF q_apply(const VecF& v) const;
};

struct QpStats {
  std::uint64_t vars = 0;         // active columns
  std::uint64_t constraints = 0;  // active rows
  std::uint64_t nnz_a = 0;
  std::uint64_t nnz_q = 0;         // explicit Q only
  std::size_t add_nodes_a = 0;
  std::size_t add_nodes_q = 0;     // explicit Q plus the factor, if any
  std::size_t add_nodes_total = 0;  // A, b, c, Q together
  std::uint64_t rows = 0;           // padded extents
  std::uint64_t cols = 0;
};

/// Compiles without enumerating ground rows or columns. Quantifiers and atoms
/// are eliminated first if present. The manager should be fresh or previously
/// used only for programs with the same layout.
QpStandard compile(const Foqp& f, AddManager& m);

/// Builds a standard-form program directly from its parts (used by the
/// generators that do not go through the modeling language).
QpStandard make_qp(AddManager& m, MatF a, VecF b, VecF c, MatF q, VecF row_mask, VecF ge_mask,
                   VecF col_mask, std::vector<VarId> colp_bits, std::size_t block_bits = 0);

QpStats stats(const QpStandard& qp);

/// Number of nonzero entries of a matrix ADD, counted without expansion.
std::uint64_t count_nonzeros(const MatF& a);

/// JSON summary: dimensions, node counts and mask sizes.
std::string structure_json(const QpStandard& qp);

}  // namespace symqp
