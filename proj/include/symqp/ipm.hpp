#pragma once

// Primal-dual barrier interior point method for standard-form QPs.
//
// The same outer loop runs over two linear-algebra backends: decision-diagram
// vectors and matrices (matrix-free; every product is a recursive-descent
// matvec), or explicit sparse matrices for ground programs. Newton directions
// come from the normal equations solved by (preconditioned) conjugate
// gradients, or for problems without coupling rows from a column-space system.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "symqp/ground.hpp"
#include "symqp/linalg.hpp"
#include "symqp/qp.hpp"

namespace symqp {

enum class Structure {
  Auto,
  Separable,   // diagonal Q, general A: normal equations
  Box,         // square diagonal A, general Q: column-space system
  BoundsOnly,  // no active rows, general Q
};

enum class SolveStatus { Optimal, IterationLimit, Stalled };

/// Orientation of the separable normal equations: A D A^T + D_w over the rows,
/// or D^{-1} + A^T E A over the columns (only when every active row is an
/// inequality). Auto takes the smaller of the two.
enum class NormalSpace { Auto, Rows, Columns };

const char* to_string(Structure s);
const char* to_string(NormalSpace s);
const char* to_string(SolveStatus s);

/// Dense snapshot of one outer iteration, passed to SolveOptions::observer.
/// Row-space quantities have the padded row length, column-space ones the
/// padded column length. `w`, `sw`, `dw`, `dsw` are the surplus block.
struct IterationView {
  int iteration = 0;
  double mu = 0.0;
  double rho_p = 0.0;
  double rho_d = 0.0;
  Eigen::VectorXd x, w, y, sx, sw;
  Eigen::VectorXd dx, dw, dy, dsx, dsw;
  int cg_iterations = 0;
};

struct SolveOptions {
  double tolerance = 1e-5;
  double cg_reduction = 1e-2;
  int max_iterations = 200;
  int max_cg_iterations = 500;
  double fraction = 0.995;
  double sigma = 0.1;
  bool regularize = true;
  double rho_primal = 1e-8;
  double rho_dual = 1e-8;
  double theta_min = 1e-12;
  double theta_max = 1e12;
  /// Partial Cholesky pivots; negative means automatic (50 when the normal system has at least 128 rows, else 0).
  int precond_k = -1;
  Structure structure = Structure::Auto;
  NormalSpace normal_space = NormalSpace::Auto;
  /// Rounds iterates to 12 significant digits after each step.
  bool quantize = false;
  /// Collects unreachable diagram nodes when the live count exceeds this.
  std::size_t gc_threshold = 4'000'000;
  /// Ground backend only: solve the normal equations by sparse LDL^T instead of CG.
  bool ground_direct = true;
  std::function<void(const IterationView&)> observer;
};

/// Applies one "key=value" setting; throws InvalidArgument on unknown keys.
void set_option(SolveOptions& opts, const std::string& key_value);

struct SolveReport {
  SolveStatus status = SolveStatus::IterationLimit;
  Structure structure = Structure::Auto;
  NormalSpace normal_space = NormalSpace::Rows;
  std::vector<double> x;  // column space, padded length
  std::vector<double> y;  // row space
  double objective = 0.0;
  int iterations = 0;
  long cg_total = 0;
  int cg_cap_hits = 0;
  std::vector<int> cg_per_iteration;
  std::vector<double> primal_residuals;  // relative, one per iteration
  std::vector<double> dual_residuals;
  std::vector<double> comp_residuals;
  double final_residual = 0.0;
  double rho_primal = 0.0;
  double rho_dual = 0.0;
  int precond_k = 0;
  std::size_t add_nodes_A = 0;
  std::size_t add_nodes_Q = 0;
  std::size_t peak_live_nodes = 0;
  double time_compile = 0.0;
  double time_solve = 0.0;
  /// Products with A or A^T and the wall time spent in them.
  long products = 0;
  double time_products = 0.0;

  bool converged() const { return status == SolveStatus::Optimal; }
};

/// key=value lines with fixed field names.
std::string to_text(const SolveReport& r);

SolveReport ipm_solve(const QpStandard& qp, const SolveOptions& opts = {});
SolveReport ground_ipm_solve(const GroundQp& g, const SolveOptions& opts = {});

// ---- building blocks ------------------------------------------------------

/// Interior iterate over decision diagrams. `w`/`sw` live on the rows.
struct IpmState {
  VecF x, w, y, sx, sw;
  double mu = 0.0;
};

struct Residuals {
  VecF primal;     // b - A x + w
  VecF dual_x;     // c - A^T y - s_x + Q x
  VecF dual_w;     // y - s_w on inequality rows
  VecF comp_x;     // mu e - x s_x
  VecF comp_w;
};

/// Starting point x = s = e (scaled by max(1, |b|_inf) and max(1, |c|_inf)), y = 0.
IpmState initial_state(const QpStandard& qp);
Residuals residuals(const QpStandard& qp, const IpmState& st, double mu);

/// w -> A (Q + Theta^{-1} + rho_p)^{-1} A^T w + D_w w + rho_d w, with
/// Theta^{-1} = s/x clipped; D_w is the surplus block's contribution.
struct NormalOperator {
  const QpStandard* qp = nullptr;
  VecF dx_scale;  // (qdiag + Theta_x^{-1} + rho_p)^{-1}, masked
  VecF dw_scale;  // (Theta_w^{-1} + rho_p)^{-1}, masked
  double rho_d = 0.0;

  VecF apply(const VecF& v) const;
  /// Diagonal of the operator, computed as (A o A) dx_scale + dw_scale + rho_d.
  VecF diagonal() const;
};

NormalOperator build_normal_operator(const QpStandard& qp, const IpmState& st, const SolveOptions& opts);

struct CgStats {
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  bool converged = false;
  bool breakdown = false;
};

using LinearMap = std::function<VecF(const VecF&)>;

/// Conjugate gradients from x0 = 0; stops when |r_k| <= reduction * |r_0| (or
/// `abs_tol` if given). `precond` applies M^{-1}.
VecF cg_solve(const LinearMap& op, const VecF& f, const LinearMap* precond, double reduction, int max_iter,
              CgStats* stats = nullptr, std::optional<double> abs_tol = std::nullopt);

/// Same algorithm on dense vectors.
Eigen::VectorXd cg_solve(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op, const Eigen::VectorXd& f,
                         const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>* precond, double reduction,
                         int max_iter, CgStats* stats = nullptr, std::optional<double> abs_tol = std::nullopt);

/// Greedy partial pivoted Cholesky of an SPD operator given its diagonal and a
/// column oracle; the unpivoted remainder is approximated by its diagonal.
/// k = 0 gives the identity.
class PartialCholesky {
 public:
  PartialCholesky() = default;
  PartialCholesky(const LinearMap& column_of, const VecF& diagonal, const VecF& mask, int k);

  VecF apply_inverse(const VecF& r) const;
  VecF apply(const VecF& v) const;
  const std::vector<std::uint64_t>& pivots() const;

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
};

PartialCholesky build_preconditioner(const NormalOperator& op, int k);

struct Directions {
  VecF dx, dw, dy, dsx, dsw;
  CgStats cg;
};

/// Normal-equation direction: solves for dy, then recovers
/// dx = (Q + Theta^{-1})^{-1}(A^T dy - g) and ds = X^{-1} r_c - Theta^{-1} dx, with
/// Theta^{-1} the clipped s/x used in the solve.
Directions newton_direction(const QpStandard& qp, const IpmState& st, const SolveOptions& opts);

/// Largest alpha <= 1 keeping x + alpha dx >= (1 - fraction) x componentwise.
double step_length(const VecF& x, const VecF& dx, double fraction);

}  // namespace symqp
