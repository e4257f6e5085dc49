#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Nothing here touches decision diagrams except the table-driven builders.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <random>
#include <vector>

#include "symqp/add.hpp"

namespace oracle {

using Rng = std::mt19937_64;

/// Random table of 2^n values drawn from a small palette so that diagrams share
/// structure.
inline std::vector<double> random_table(Rng& rng, int n, int palette = 4) {
  std::uniform_int_distribution<int> pick(0, palette - 1);
  std::vector<double> pal(palette);
  std::normal_distribution<double> g(0.0, 2.0);
  for (auto& p : pal) p = std::round(g(rng) * 8.0) / 8.0;
  std::vector<double> t(std::size_t{1} << n);
  for (auto& v : t) v = pal[pick(rng)];
  return t;
}

/// Builds f(x_0..x_{n-1}) = table[x_0 x_1 ... x_{n-1} read as binary, x_0 MSB]
/// by Shannon expansion from the top variable.
inline symqp::Add from_table(symqp::AddManager& m, std::span<const symqp::VarId> vars,
                             std::span<const double> table) {
  const std::size_t n = vars.size();
  std::function<symqp::Add(std::size_t, std::uint64_t)> rec = [&](std::size_t k, std::uint64_t off) {
    if (k == n) return m.terminal(table[off]);
    const std::uint64_t half = std::uint64_t{1} << (n - 1 - k);
    return m.ite_var(vars[k], rec(k + 1, off + half), rec(k + 1, off));
  };
  return rec(0, 0);
}

/// Truth-table interpreter: evaluates f at every assignment of `vars`.
inline std::vector<double> to_table(symqp::AddManager& m, const symqp::Add& f,
                                    std::span<const symqp::VarId> vars) {
  const std::size_t n = vars.size();
  std::vector<double> out(std::size_t{1} << n);
  std::vector<std::pair<symqp::VarId, bool>> asg(n);
  for (std::uint64_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < n; ++k) asg[k] = {vars[k], ((i >> (n - 1 - k)) & 1u) != 0};
    out[i] = m.eval(f, asg);
  }
  return out;
}

/// In-place unnormalized fast Walsh-Hadamard transform (natural order).
inline void fwht(std::vector<double>& a) {
  for (std::size_t h = 1; h < a.size(); h <<= 1)
    for (std::size_t i = 0; i < a.size(); i += h << 1)
      for (std::size_t j = i; j < i + h; ++j) {
        const double x = a[j], y = a[j + h];
        a[j] = x + y;
        a[j + h] = x - y;
      }
}

/// Accelerated proximal gradient for tau ||x||_1 + 1/2 ||A x - b||^2 where A
/// holds the listed rows of the 2^p Walsh matrix. Products use fwht; the step
/// is 1/n since A A^T = n I. Stops when the iterate moves less than tol
/// relative to its norm.
struct IstaResult {
  std::vector<double> x;
  double objective = 0.0;
  int iterations = 0;
};

inline IstaResult ista_walsh(std::span<const std::uint64_t> rows, std::span<const double> b, std::size_t n,
                             double tau, double tol = 1e-13, int max_iter = 200000) {
  auto apply = [&](const std::vector<double>& x) {
    std::vector<double> t = x;
    fwht(t);
    std::vector<double> out(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) out[j] = t[rows[j]];
    return out;
  };
  auto objective = [&](const std::vector<double>& x) {
    const std::vector<double> ax = apply(x);
    double fit = 0.0, l1 = 0.0;
    for (std::size_t j = 0; j < ax.size(); ++j) fit += (ax[j] - b[j]) * (ax[j] - b[j]);
    for (double v : x) l1 += std::abs(v);
    return tau * l1 + 0.5 * fit;
  };
  const double step = 1.0 / static_cast<double>(n);
  std::vector<double> x(n, 0.0), z = x, prev = x;
  double t = 1.0;
  IstaResult res;
  for (int it = 1; it <= max_iter; ++it) {
    const std::vector<double> az = apply(z);
    std::vector<double> r(n, 0.0);
    for (std::size_t j = 0; j < rows.size(); ++j) r[rows[j]] = az[j] - b[j];
    fwht(r);
    double moved = 0.0, size = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = z[i] - step * r[i];
      const double v = std::copysign(std::max(std::abs(g) - step * tau, 0.0), g);
      moved += (v - x[i]) * (v - x[i]);
      size += v * v;
      prev[i] = x[i];
      x[i] = v;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + (t - 1.0) / tn * (x[i] - prev[i]);
    t = tn;
    res.iterations = it;
    if (std::sqrt(moved) <= tol * std::max(1.0, std::sqrt(size))) break;
  }
  res.x = x;
  res.objective = objective(x);
  return res;
}

inline Eigen::MatrixXd random_dense(Rng& rng, Eigen::Index rows, Eigen::Index cols, double density = 0.5) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution keep(density);
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = keep(rng) ? u(rng) : 0.0;
  return a;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  const double scale = std::max(1.0, want.norm());
  return (got - want).norm() / scale;
}

inline Eigen::VectorXd as_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace oracle

namespace oracle {

/// minimize c'x + 1/2 x'Qx  s.t.  A x (>= | =) b on active rows, x >= 0 on
/// active columns. Dense, padded the same way as the solver's vectors.
struct DenseQp {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::MatrixXd Q;
  Eigen::VectorXd row_mask;
  Eigen::VectorXd ge_mask;
  Eigen::VectorXd col_mask;

  double objective(const Eigen::VectorXd& x) const { return c.dot(x) + 0.5 * x.dot(Q * x); }
};

struct QpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  bool found = false;
};

/// Enumerates active sets of the inequality rows and the bounds, solves each
/// equality-constrained KKT system and keeps the best feasible point. Exact for
/// small convex problems whose optimum is attained.
inline QpSolution active_set_qp(const DenseQp& p, double feas_tol = 1e-9) {
  std::vector<Eigen::Index> cols, eq_rows, ge_rows;
  for (Eigen::Index j = 0; j < p.c.size(); ++j)
    if (p.col_mask[j] != 0.0) cols.push_back(j);
  for (Eigen::Index i = 0; i < p.b.size(); ++i) {
    if (p.row_mask[i] == 0.0) continue;
    (p.ge_mask[i] != 0.0 ? ge_rows : eq_rows).push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(cols.size());
  const std::size_t choices = ge_rows.size() + cols.size();
  QpSolution best;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << choices); ++s) {
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    auto row_of = [&](Eigen::Index i) {
      Eigen::VectorXd r(n);
      for (Eigen::Index k = 0; k < n; ++k) r[k] = p.A(i, cols[static_cast<std::size_t>(k)]);
      return r;
    };
    for (auto i : eq_rows) {
      rows.push_back(row_of(i));
      rhs.push_back(p.b[i]);
    }
    for (std::size_t k = 0; k < ge_rows.size(); ++k)
      if ((s >> k) & 1u) {
        rows.push_back(row_of(ge_rows[k]));
        rhs.push_back(p.b[ge_rows[k]]);
      }
    for (std::size_t k = 0; k < cols.size(); ++k)
      if ((s >> (ge_rows.size() + k)) & 1u) {
        rows.push_back(Eigen::VectorXd::Unit(n, static_cast<Eigen::Index>(k)));
        rhs.push_back(0.0);
      }
    const auto e = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + e, n + e);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n + e);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b)
        kkt(a, b) = p.Q(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
      r[a] = -p.c[cols[static_cast<std::size_t>(a)]];
    }
    for (Eigen::Index k = 0; k < e; ++k) {
      kkt.block(n + k, 0, 1, n) = rows[static_cast<std::size_t>(k)].transpose();
      kkt.block(0, n + k, n, 1) = -rows[static_cast<std::size_t>(k)];
      r[n + k] = rhs[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(r);
    if ((kkt * sol - r).norm() > 1e-8 * (1.0 + r.norm())) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p.c.size());
    for (Eigen::Index k = 0; k < n; ++k) x[cols[static_cast<std::size_t>(k)]] = sol[k];
    if (n > 0 && x.minCoeff() < -feas_tol) continue;
    const Eigen::VectorXd ax = p.A * x;
    bool ok = true;
    for (auto i : eq_rows) ok = ok && std::abs(ax[i] - p.b[i]) <= feas_tol * (1.0 + std::abs(p.b[i]));
    for (auto i : ge_rows) ok = ok && ax[i] >= p.b[i] - feas_tol * (1.0 + std::abs(p.b[i]));
    if (!ok) continue;
    const double obj = p.objective(x);
    if (!best.found || obj < best.objective) best = QpSolution{x, obj, true};
  }
  return best;
}

enum class QKind { Zero, Diagonal, Dense };

/// Random feasible and bounded program: a positive primal point and a dual
/// feasible point are planted. `rows`/`cols` are active counts inside padded
/// sizes `prow`/`pcol`; `diagonal_a` makes A square diagonal.
inline DenseQp random_feasible_qp(Rng& rng, Eigen::Index rows, Eigen::Index cols, Eigen::Index prow,
                                  Eigen::Index pcol, QKind qk, bool diagonal_a = false, double ge_share = 0.5) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.2, 2.0);
  std::bernoulli_distribution is_ge(ge_share), zero_x(0.3);
  DenseQp p;
  p.A = Eigen::MatrixXd::Zero(prow, pcol);
  p.Q = Eigen::MatrixXd::Zero(pcol, pcol);
  p.b = Eigen::VectorXd::Zero(prow);
  p.c = Eigen::VectorXd::Zero(pcol);
  p.row_mask = Eigen::VectorXd::Zero(prow);
  p.ge_mask = Eigen::VectorXd::Zero(prow);
  p.col_mask = Eigen::VectorXd::Zero(pcol);
  for (Eigen::Index j = 0; j < cols; ++j) p.col_mask[j] = 1.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    p.row_mask[i] = 1.0;
    p.ge_mask[i] = is_ge(rng) ? 1.0 : 0.0;
    if (diagonal_a) {
      p.A(i, i) = pos(rng) * (u(rng) < 0 ? -1.0 : 1.0);
    } else {
      for (Eigen::Index j = 0; j < cols; ++j) p.A(i, j) = std::round(u(rng) * 8.0) / 8.0;
    }
  }
  if (qk == QKind::Diagonal) {
    for (Eigen::Index j = 0; j < cols; ++j) p.Q(j, j) = std::max(0.0, u(rng));
  } else if (qk == QKind::Dense) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(cols, cols);
    for (Eigen::Index i = 0; i < cols; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) f(i, j) = u(rng);
    p.Q.topLeftCorner(cols, cols) = f.transpose() * f;
  }
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(pcol), s0 = Eigen::VectorXd::Zero(pcol), y0 = Eigen::VectorXd::Zero(prow);
  for (Eigen::Index j = 0; j < cols; ++j) {
    x0[j] = zero_x(rng) ? 0.0 : pos(rng);
    s0[j] = pos(rng);
  }
  for (Eigen::Index i = 0; i < rows; ++i) y0[i] = p.ge_mask[i] != 0.0 ? pos(rng) : u(rng);
  p.b = p.A * x0;
  for (Eigen::Index i = 0; i < rows; ++i)
    if (p.ge_mask[i] != 0.0) p.b[i] -= zero_x(rng) ? 0.0 : pos(rng);
  p.c = p.A.transpose() * y0 + s0 - p.Q * x0;
  for (Eigen::Index j = cols; j < pcol; ++j) p.c[j] = 0.0;
  return p;
}

/// Equality-constrained LP whose optimum has `support` < `rows` positive
/// entries (primal degenerate) with a strictly complementary dual: late
/// iterates drive the normal matrix toward rank `support`.
inline DenseQp degenerate_lp(Rng& rng, Eigen::Index rows, Eigen::Index cols, Eigen::Index support, Eigen::Index prow,
                             Eigen::Index pcol) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.5, 2.0);
  DenseQp p;
  p.A = Eigen::MatrixXd::Zero(prow, pcol);
  p.Q = Eigen::MatrixXd::Zero(pcol, pcol);
  p.row_mask = Eigen::VectorXd::Zero(prow);
  p.ge_mask = Eigen::VectorXd::Zero(prow);
  p.col_mask = Eigen::VectorXd::Zero(pcol);
  for (Eigen::Index i = 0; i < rows; ++i) {
    p.row_mask[i] = 1.0;
    for (Eigen::Index j = 0; j < cols; ++j) p.A(i, j) = std::round(u(rng) * 8.0) / 8.0;
  }
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(pcol), s0 = Eigen::VectorXd::Zero(pcol), y0 = Eigen::VectorXd::Zero(prow);
  for (Eigen::Index j = 0; j < cols; ++j) {
    p.col_mask[j] = 1.0;
    (j < support ? x0[j] : s0[j]) = pos(rng);
  }
  for (Eigen::Index i = 0; i < rows; ++i) y0[i] = u(rng);
  p.b = p.A * x0;
  p.c = p.A.transpose() * y0 + s0;
  return p;
}

}  // namespace oracle
