#pragma once

// Vectors and matrices as ADDs. A vector of length 2^m is a function of m
// index bits (first bit most significant); a 2^m x 2^n matrix is a function of
// its row bits and column bits, which are interleaved in the manager's order.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "symqp/add.hpp"

namespace symqp {

/// Vector over `bits`; `length` is the logical (unpadded) size.
struct VecF {
  Add fun;
  std::vector<VarId> bits;
  std::uint64_t length = 0;

  AddManager& manager() const { return *fun.manager(); }
  std::uint64_t padded_length() const { return std::uint64_t{1} << bits.size(); }
};

/// Matrix with rows indexed by `row_bits` and columns by `col_bits`.
struct MatF {
  Add fun;
  std::vector<VarId> row_bits;
  std::vector<VarId> col_bits;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;

  AddManager& manager() const { return *fun.manager(); }
};

/// Diagonal matrix stored as its diagonal.
struct DiagF {
  VecF diag;
};

// ---- construction ---------------------------------------------------------

/// Allocates `count` fresh variables named prefix0, prefix1, ... (reused if
/// already registered).
std::vector<VarId> named_bits(AddManager& m, const std::string& prefix, std::size_t count);

VecF constant_vec(AddManager& m, std::span<const VarId> bits, double value);
VecF zero_vec(AddManager& m, std::span<const VarId> bits);
VecF unit_vec(AddManager& m, std::span<const VarId> bits, std::uint64_t index);
/// Zero-pads to the next power of two not exceeding 2^|bits|.
VecF vec_from_dense(AddManager& m, std::span<const VarId> bits, std::span<const double> values);
std::vector<double> vec_to_dense(const VecF& v);
double vec_at(const VecF& v, std::uint64_t index);

MatF mat_from_dense(AddManager& m, std::span<const VarId> row_bits, std::span<const VarId> col_bits,
                    const Eigen::MatrixXd& dense);
Eigen::MatrixXd mat_to_dense(const MatF& a);

MatF identity(AddManager& m, std::span<const VarId> row_bits, std::span<const VarId> col_bits);
/// Unnormalized +-1 Walsh matrix: W_0 = 1, W_n = [[W, W], [W, -W]].
MatF walsh(AddManager& m, std::span<const VarId> row_bits, std::span<const VarId> col_bits);

/// 0/1 function that is 1 where the two bit vectors are equal.
Add bits_equal(AddManager& m, std::span<const VarId> a, std::span<const VarId> b);
/// 0/1 function that is 1 exactly at the given index of `bits`.
Add index_cube(AddManager& m, std::span<const VarId> bits, std::uint64_t index);

// ---- products -------------------------------------------------------------

/// u = A v by recursive block descent (cached on A-node, v-node, depth).
VecF matvec(const MatF& a, const VecF& v);
/// u = A^T v without forming the transpose.
VecF matvec_t(const MatF& a, const VecF& v);
/// Row i of A as a vector over the column bits (cofactors on the row bits).
VecF row_extract(const MatF& a, std::uint64_t i);
/// Naive recursive block product; only used by tests.
MatF matmat(const MatF& a, const MatF& b);

// ---- termwise -------------------------------------------------------------

VecF vec_add(const VecF& u, const VecF& v);
VecF vec_sub(const VecF& u, const VecF& v);
VecF vec_hadamard(const VecF& u, const VecF& v);
VecF scalar_mul(double k, const VecF& v);
/// k*u + v
VecF axpy(double k, const VecF& u, const VecF& v);
/// sum_j k[j] * vs[j] in one pass over all operands.
VecF lincomb(std::span<const double> k, std::span<const VecF> vs);
VecF map_elements(const std::function<double(double)>& w, const VecF& v);
/// Re-expresses v over another bit list of the same size.
VecF rename(const VecF& v, std::span<const VarId> bits);

// ---- reductions -----------------------------------------------------------

double element_sum(const VecF& v);
double dot(const VecF& u, const VecF& v);
/// dot(v, us[j]) for every j in one pass.
std::vector<double> dots(const VecF& v, std::span<const VecF> us);
double norm2_sq(const VecF& v);
double norm2(const VecF& v);
double norm_inf(const VecF& v);

// ---- diagonals ------------------------------------------------------------

VecF diag_apply(const DiagF& d, const VecF& v);
DiagF diag_reciprocal(const DiagF& d);

// ---- text IO --------------------------------------------------------------

/// Row-major, one row per line, whitespace separated.
void write_dense(std::ostream& os, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_dense(std::istream& is);

}  // namespace symqp
