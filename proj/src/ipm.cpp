#include "symqp/ipm.hpp"

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "symqp/error.hpp"

namespace symqp {

namespace {

constexpr double kNoBound = 1e300;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double round_digits(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  const double scale = std::pow(10.0, 11 - std::floor(std::log10(std::abs(v))));
  return std::round(v * scale) / scale;
}

// ---- vector operations, overloaded for diagram and dense vectors ------------

VecF vadd(const VecF& u, const VecF& v) { return vec_add(u, v); }
VecF vsub(const VecF& u, const VecF& v) { return vec_sub(u, v); }
VecF vmul(const VecF& u, const VecF& v) { return vec_hadamard(u, v); }
VecF vscale(double k, const VecF& v) { return scalar_mul(k, v); }
VecF vaxpy(double k, const VecF& u, const VecF& v) { return axpy(k, u, v); }
double vdot(const VecF& u, const VecF& v) { return dot(u, v); }
VecF vlincomb(const std::vector<double>& k, const std::vector<VecF>& vs) { return lincomb(k, vs); }
std::vector<double> vdots(const VecF& v, const std::vector<VecF>& us) { return dots(v, us); }
double vnorm(const VecF& v) { return norm2(v); }
double vnorm_inf(const VecF& v) { return norm_inf(v); }
double vsum(const VecF& v) { return element_sum(v); }
double vmin(const VecF& v) { return v.manager().min_value(v.fun); }
double vat(const VecF& v, std::uint64_t i) { return vec_at(v, i); }
VecF vzeros(const VecF& like) { return VecF{like.manager().zero(), like.bits, like.length}; }
Eigen::VectorXd vdense(const VecF& v) { return to_eigen(v); }
VecF vmap(const std::function<double(double)>& fn, const VecF& v) { return map_elements(fn, v); }

VecF vunit(const VecF& like, std::uint64_t i) {
  VecF e = unit_vec(like.manager(), like.bits, i);
  e.length = like.length;
  return e;
}

VecF vzip(const std::function<double(double, double)>& fn, const VecF& u, const VecF& v) {
  if (u.bits != v.bits) throw DimensionError("vector index bits differ");
  return VecF{u.manager().apply(fn, u.fun, v.fun), u.bits, u.length};
}

// First index holding the maximum entry.
std::pair<std::uint64_t, double> vargmax(const VecF& v) {
  AddManager& m = v.manager();
  const double target = m.max_value(v.fun);
  absl::flat_hash_map<std::uint32_t, std::size_t> pos;
  for (std::size_t i = 0; i < v.bits.size(); ++i) pos[v.bits[i].index] = i;
  const std::size_t n = v.bits.size();
  absl::flat_hash_set<NodeId> dead;
  std::uint64_t idx = 0;
  std::function<bool(NodeId)> find = [&](NodeId id) -> bool {
    if (m.terminal_id(id)) return m.node(id).value == target;
    if (dead.contains(id)) return false;
    const AddManager::Node nd = m.node(id);
    const std::uint64_t bit = std::uint64_t{1} << (n - 1 - pos.at(nd.level));
    idx |= bit;
    if (find(nd.hi)) return true;
    idx &= ~bit;
    if (find(nd.lo)) return true;
    dead.insert(id);
    return false;
  };
  find(v.fun.id());
  return {idx, target};
}

using Dense = Eigen::VectorXd;

Dense vadd(const Dense& u, const Dense& v) { return u + v; }
Dense vsub(const Dense& u, const Dense& v) { return u - v; }
Dense vmul(const Dense& u, const Dense& v) { return u.cwiseProduct(v); }
Dense vscale(double k, const Dense& v) { return k * v; }
Dense vaxpy(double k, const Dense& u, const Dense& v) { return k * u + v; }
double vdot(const Dense& u, const Dense& v) { return u.dot(v); }
Dense vlincomb(const std::vector<double>& k, const std::vector<Dense>& vs) {
  Dense out = k[0] * vs[0];
  for (std::size_t j = 1; j < vs.size(); ++j) out += k[j] * vs[j];
  return out;
}
std::vector<double> vdots(const Dense& v, const std::vector<Dense>& us) {
  std::vector<double> out;
  for (const Dense& u : us) out.push_back(v.dot(u));
  return out;
}
double vnorm(const Dense& v) { return v.norm(); }
double vnorm_inf(const Dense& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }
double vsum(const Dense& v) { return v.sum(); }
double vmin(const Dense& v) { return v.size() ? v.minCoeff() : 0.0; }
double vat(const Dense& v, std::uint64_t i) { return v[static_cast<Eigen::Index>(i)]; }
Dense vzeros(const Dense& like) { return Dense::Zero(like.size()); }
Dense vdense(const Dense& v) { return v; }
Dense vmap(const std::function<double(double)>& fn, const Dense& v) { return v.unaryExpr(fn); }
Dense vunit(const Dense& like, std::uint64_t i) { return Dense::Unit(like.size(), static_cast<Eigen::Index>(i)); }

Dense vzip(const std::function<double(double, double)>& fn, const Dense& u, const Dense& v) {
  if (u.size() != v.size()) throw DimensionError("vector sizes differ");
  return u.binaryExpr(v, fn);
}

std::pair<std::uint64_t, double> vargmax(const Dense& v) {
  Eigen::Index i = 0;
  const double mx = v.maxCoeff(&i);
  return {static_cast<std::uint64_t>(i), mx};
}

// a/b, and 0 wherever b is 0 (outside the masks).
double safe_div(double a, double b) { return b != 0.0 ? a / b : 0.0; }

// ---- conjugate gradients ------------------------------------------------------

template <class V>
V pcg(const std::function<V(const V&)>& op, const V& f, const std::function<V(const V&)>* pre, double tol,
      int max_iter, CgStats& st, const std::function<void()>* tick = nullptr) {
  st = CgStats{};
  V x = vzeros(f);
  V r = f;
  double rr = vdot(r, r);
  st.initial_residual = std::sqrt(rr);
  st.final_residual = st.initial_residual;
  if (st.initial_residual <= tol) {
    st.converged = true;
    return x;
  }
  V z = pre ? (*pre)(r) : r;
  double rz = pre ? vdot(r, z) : rr;
  V p = z;
  for (int k = 1; k <= max_iter; ++k) {
    const V q = op(p);
    const double pq = vdot(p, q);
    if (!(pq > 0.0) || !(rz > 0.0)) {
      st.breakdown = true;
      break;
    }
    const double a = rz / pq;
    x = vaxpy(a, p, x);
    r = vaxpy(-a, q, r);
    rr = vdot(r, r);
    st.iterations = k;
    st.final_residual = std::sqrt(rr);
    if (!std::isfinite(st.final_residual)) {
      st.breakdown = true;
      break;
    }
    if (st.final_residual <= tol) {
      st.converged = true;
      break;
    }
    z = pre ? (*pre)(r) : r;
    const double rz_new = pre ? vdot(r, z) : rr;
    p = vaxpy(rz_new / rz, p, z);
    rz = rz_new;
    if (tick) (*tick)();
  }
  return x;
}

// ---- partial Cholesky ------------------------------------------------------------

template <class V>
struct PcholData {
  std::vector<std::uint64_t> pivots;
  std::vector<V> l21;
  std::vector<V> units;
  Eigen::MatrixXd l11;
  V rest;
  V rest_inv;
  V nonpivot;
};

template <class V>
PcholData<V> build_pchol(const std::function<V(std::uint64_t)>& column_of, const V& diagonal, const V& mask, int k,
                         const std::function<void()>* tick = nullptr) {
  PcholData<V> p;
  p.nonpivot = mask;
  V d = vmul(diagonal, mask);
  if (k <= 0) return p;
  const double d0 = vargmax(d).second;
  std::vector<V> cols;
  for (int j = 0; j < k; ++j) {
    const auto [i, di] = vargmax(vmul(d, p.nonpivot));
    if (!(di > 1e-14 * d0)) break;
    V col = column_of(i);
    if (!cols.empty()) {
      std::vector<double> k{1.0};
      std::vector<V> vs{col};
      for (const V& c : cols) {
        k.push_back(-vat(c, i));
        vs.push_back(c);
      }
      col = vlincomb(k, vs);
    }
    col = vscale(1.0 / std::sqrt(di), vmul(col, p.nonpivot));
    d = vsub(d, vmul(col, col));
    p.nonpivot = vsub(p.nonpivot, vmul(vunit(mask, i), p.nonpivot));
    p.pivots.push_back(i);
    cols.push_back(std::move(col));
    if (tick) (*tick)();
  }
  const std::size_t n = p.pivots.size();
  p.l11 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = j; r < n; ++r) p.l11(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = vat(cols[j], p.pivots[r]);
    p.l21.push_back(vmul(cols[j], p.nonpivot));
    p.units.push_back(vunit(mask, p.pivots[j]));
  }
  const double floor = 1e-12 * std::max(d0, 1e-300);
  p.rest = vzip([floor](double v, double on) { return on != 0.0 ? std::max(v, floor) : 0.0; }, d, p.nonpivot);
  p.rest_inv = vmap([](double v) { return v != 0.0 ? 1.0 / v : 0.0; }, p.rest);
  return p;
}

template <class V>
V pchol_solve(const PcholData<V>& p, const V& r) {
  if (p.pivots.empty()) return r;
  const auto n = static_cast<Eigen::Index>(p.pivots.size());
  Eigen::VectorXd r1(n);
  for (Eigen::Index j = 0; j < n; ++j) r1[j] = vat(r, p.pivots[static_cast<std::size_t>(j)]);
  const Eigen::VectorXd u1 = p.l11.template triangularView<Eigen::Lower>().solve(r1);
  std::vector<double> k{1.0};
  std::vector<V> vs{vmul(r, p.nonpivot)};
  for (Eigen::Index j = 0; j < n; ++j) {
    k.push_back(-u1[j]);
    vs.push_back(p.l21[static_cast<std::size_t>(j)]);
  }
  V out = vmul(vlincomb(k, vs), p.rest_inv);
  const std::vector<double> d = vdots(out, p.l21);
  Eigen::VectorXd v1(n);
  for (Eigen::Index j = 0; j < n; ++j) v1[j] = u1[j] - d[static_cast<std::size_t>(j)];
  const Eigen::VectorXd t1 = p.l11.transpose().template triangularView<Eigen::Upper>().solve(v1);
  k.assign(1, 1.0);
  vs.assign(1, out);
  for (Eigen::Index j = 0; j < n; ++j) {
    k.push_back(t1[j]);
    vs.push_back(p.units[static_cast<std::size_t>(j)]);
  }
  return vlincomb(k, vs);
}

template <class V>
V pchol_apply(const PcholData<V>& p, const V& v) {
  if (p.pivots.empty()) return v;
  const auto n = static_cast<Eigen::Index>(p.pivots.size());
  Eigen::VectorXd v1(n);
  for (Eigen::Index j = 0; j < n; ++j) v1[j] = vat(v, p.pivots[static_cast<std::size_t>(j)]);
  const V v2 = vmul(v, p.nonpivot);
  Eigen::VectorXd w1 = p.l11.transpose() * v1;
  const std::vector<double> d = vdots(v2, p.l21);
  for (Eigen::Index j = 0; j < n; ++j) w1[j] += d[static_cast<std::size_t>(j)];
  const Eigen::VectorXd o1 = p.l11 * w1;
  std::vector<double> k{1.0};
  std::vector<V> vs{vmul(v2, p.rest)};
  for (Eigen::Index j = 0; j < n; ++j) {
    k.push_back(w1[j]);
    vs.push_back(p.l21[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    k.push_back(o1[j]);
    vs.push_back(p.units[static_cast<std::size_t>(j)]);
  }
  return vlincomb(k, vs);
}

// ---- backends ------------------------------------------------------------------

struct ProductStats {
  long count = 0;
  double seconds = 0.0;
};

// Times one product with A or A^T.
class ProductClock {
 public:
  explicit ProductClock(ProductStats& s) : s_(s), t0_(std::chrono::steady_clock::now()) {}
  ~ProductClock() {
    ++s_.count;
    s_.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  ProductStats& s_;
  std::chrono::steady_clock::time_point t0_;
};

class AddBackend {
 public:
  using Vec = VecF;

  explicit AddBackend(const QpStandard& qp) : qp_(qp), m_(qp.manager()) {}

  const Vec& b() const { return qp_.b; }
  const Vec& c() const { return qp_.c; }
  const Vec& row_mask() const { return qp_.row_mask; }
  const Vec& ge_mask() const { return qp_.ge_mask; }
  const Vec& col_mask() const { return qp_.col_mask; }
  bool has_rows() const { return qp_.has_rows(); }
  bool q_zero() const { return qp_.q_zero(); }
  bool q_diagonal() const { return qp_.q_diagonal(); }
  Vec q_diag() const { return qp_.q_diag(); }

  Vec A(const Vec& x) const {
    ProductClock c(products_);
    return matvec(qp_.A, x);
  }
  Vec At(const Vec& y) const {
    ProductClock c(products_);
    return matvec_t(qp_.A, y);
  }
  const ProductStats& products() const { return products_; }
  Vec Q(const Vec& x) const { return qp_.q_apply(x); }
  Vec A_row(std::uint64_t i) const { return row_extract(qp_.A, i); }

  Vec squared_A_times(const Vec& d) { return matvec(a_square(), d); }
  Vec squared_At_times(const Vec& e) { return matvec_t(a_square(), e); }

  bool a_square_diagonal() const {
    if (qp_.row_bits.size() != qp_.col_bits.size()) return false;
    return m_.apply(BinaryOp::Times, qp_.A.fun, bits_equal(m_, qp_.row_bits, qp_.col_bits)) == qp_.A.fun;
  }
  Vec a_diag() const {
    Add d = m_.sum_abstract(m_.apply(BinaryOp::Times, qp_.A.fun, bits_equal(m_, qp_.row_bits, qp_.col_bits)),
                            qp_.row_bits);
    return VecF{d, qp_.col_bits, qp_.c.length};
  }
  Vec to_cols(const Vec& v) const { return VecF{rename(v, qp_.col_bits).fun, qp_.col_bits, qp_.c.length}; }
  Vec to_rows(const Vec& v) const { return VecF{rename(v, qp_.row_bits).fun, qp_.row_bits, qp_.b.length}; }

  std::optional<Vec> direct_normal(const Vec&, const Vec&, double, const Vec&) const { return std::nullopt; }
  std::optional<Vec> direct_cols(const Vec&, const Vec&, const Vec&) const { return std::nullopt; }
  std::optional<Vec> direct_column(const Vec&, const Vec&, const Vec&) const { return std::nullopt; }

  void maintenance(std::size_t threshold) {
    peak_ = std::max(peak_, m_.live_nodes());
    if (m_.live_nodes() > threshold) m_.collect_garbage();
  }
  std::size_t peak() const { return std::max(peak_, m_.live_nodes()); }
  std::size_t nodes_A() const { return m_.node_count(qp_.A.fun); }
  std::size_t nodes_Q() const { return m_.node_count(qp_.Q.fun); }

 private:
  const MatF& a_square() {
    if (!a_sq_) a_sq_ = MatF{m_.apply(BinaryOp::Times, qp_.A.fun, qp_.A.fun), qp_.A.row_bits, qp_.A.col_bits,
                             qp_.A.rows, qp_.A.cols};
    return *a_sq_;
  }

  const QpStandard& qp_;
  AddManager& m_;
  mutable ProductStats products_;
  std::optional<MatF> a_sq_;
  std::size_t peak_ = 0;
};

class DenseBackend {
 public:
  using Vec = Dense;
  using ColSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, std::int64_t>;

  explicit DenseBackend(const GroundQp& g, bool direct) : g_(g), direct_(direct) {}

  const Vec& b() const { return g_.b; }
  const Vec& c() const { return g_.c; }
  const Vec& row_mask() const { return g_.row_mask; }
  const Vec& ge_mask() const { return g_.ge_mask; }
  const Vec& col_mask() const { return g_.col_mask; }
  bool has_rows() const { return g_.row_mask.size() > 0 && g_.row_mask.maxCoeff() != 0.0; }
  bool q_zero() const { return g_.Q.nonZeros() == 0; }
  bool q_diagonal() const {
    for (Eigen::Index r = 0; r < g_.Q.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(g_.Q, r); it; ++it)
        if (it.row() != it.col() && it.value() != 0.0) return false;
    return true;
  }
  Vec q_diag() const { return g_.Q.diagonal(); }

  Vec A(const Vec& x) const {
    ProductClock c(products_);
    return g_.A * x;
  }
  Vec At(const Vec& y) const {
    ProductClock c(products_);
    return g_.A.transpose() * y;
  }
  const ProductStats& products() const { return products_; }
  Vec Q(const Vec& x) const { return g_.Q * x; }
  Vec A_row(std::uint64_t i) const { return Vec(g_.A.row(static_cast<Eigen::Index>(i)).transpose()); }
  Vec squared_A_times(const Vec& d) const { return g_.A.cwiseAbs2() * d; }
  Vec squared_At_times(const Vec& e) const { return g_.A.cwiseAbs2().transpose() * e; }

  bool a_square_diagonal() const {
    if (g_.A.rows() != g_.A.cols()) return false;
    for (Eigen::Index r = 0; r < g_.A.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(g_.A, r); it; ++it)
        if (it.row() != it.col() && it.value() != 0.0) return false;
    return true;
  }
  Vec a_diag() const { return g_.A.diagonal(); }
  Vec to_cols(const Vec& v) const { return v; }
  Vec to_rows(const Vec& v) const { return v; }

  std::optional<Vec> direct_normal(const Vec& dx, const Vec& dw, double rho_d, const Vec& f) const {
    if (!direct_) return std::nullopt;
    const ColSparse a = g_.A;
    ColSparse n = a * dx.asDiagonal() * a.transpose();
    const Vec inactive = (g_.row_mask.array() == 0.0).cast<double>();
    const Vec extra = dw + rho_d * g_.row_mask + inactive;
    n += ColSparse(extra.asDiagonal());
    return ldlt(n, f);
  }

  std::optional<Vec> direct_cols(const Vec& dinv, const Vec& e, const Vec& rhs) const {
    if (!direct_) return std::nullopt;
    const ColSparse a = g_.A;
    ColSparse k = a.transpose() * e.asDiagonal() * a;
    if (!q_diagonal()) k += ColSparse(g_.Q);
    const Vec inactive = (g_.col_mask.array() == 0.0).cast<double>();
    k += ColSparse(Vec(dinv + inactive).asDiagonal());
    return ldlt(k, rhs);
  }

  std::optional<Vec> direct_column(const Vec& free, const Vec& diag, const Vec& rhs) const {
    if (!direct_) return std::nullopt;
    const ColSparse q = g_.Q;
    ColSparse k = free.asDiagonal() * q * free.asDiagonal();
    const Vec fixed = (free.array() == 0.0).cast<double>();
    const Vec extra = diag.cwiseProduct(free) + fixed;
    k += ColSparse(extra.asDiagonal());
    return ldlt(k, rhs);
  }

  void maintenance(std::size_t) {}
  std::size_t peak() const { return 0; }
  std::size_t nodes_A() const { return 0; }
  std::size_t nodes_Q() const { return 0; }

 private:
  static std::optional<Vec> ldlt(ColSparse& k, const Vec& rhs) {
    k.makeCompressed();
    Eigen::SimplicialLDLT<ColSparse> solver(k);
    if (solver.info() != Eigen::Success) return std::nullopt;
    Vec out = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !out.allFinite()) return std::nullopt;
    return out;
  }

  const GroundQp& g_;
  mutable ProductStats products_;
  bool direct_;
};

// ---- the shared outer loop ---------------------------------------------------

template <class B>
class Engine {
 public:
  using V = typename B::Vec;

  struct State {
    V x, w, y, sx, sw;
  };
  struct Res {
    V rp, rdx, rdw;
  };
  struct Dir {
    V dx, dw, dy, dsx, dsw;
    CgStats cg;
  };
  struct Scales {
    V dx_scale, dw_scale;
  };

  Engine(B& be, const SolveOptions& o) : be_(be), o_(o), tick_([this] { be_.maintenance(o_.gc_threshold); }) {
    rho_p_ = o.regularize ? o.rho_primal : 0.0;
    rho_d_ = o.regularize ? o.rho_dual : 0.0;
  }

  double rho_p() const { return rho_p_; }
  double rho_d() const { return rho_d_; }
  void set_space(NormalSpace s) { space_ = s; }

  State initial() const {
    const double xi_p = std::max(1.0, vnorm_inf(be_.b()));
    const double xi_d = std::max(1.0, vnorm_inf(be_.c()));
    return State{vscale(xi_p, be_.col_mask()), vscale(xi_p, be_.ge_mask()), vzeros(be_.row_mask()),
                 vscale(xi_d, be_.col_mask()), vscale(xi_d, be_.ge_mask())};
  }

  Res residuals(const State& st) const {
    Res r;
    r.rp = vadd(vsub(be_.b(), be_.A(st.x)), st.w);
    r.rdx = vsub(vsub(be_.c(), be_.At(st.y)), st.sx);
    if (!be_.q_zero()) r.rdx = vadd(r.rdx, be_.Q(st.x));
    r.rdw = vsub(vmul(be_.ge_mask(), st.y), st.sw);
    return r;
  }

  V comp(const V& x, const V& s, const V& mask, double mu) const { return vsub(vscale(mu, mask), vmul(x, s)); }

  V theta_inv(const V& s, const V& x) const {
    const double lo = o_.theta_min, hi = o_.theta_max;
    return vzip([lo, hi](double sv, double xv) { return xv != 0.0 ? std::clamp(sv / xv, lo, hi) : 0.0; }, s, x);
  }

  Structure resolve() const {
    const bool rows = be_.has_rows();
    switch (o_.structure) {
      case Structure::Auto:
        if (!rows) return Structure::BoundsOnly;
        if (be_.q_diagonal()) return Structure::Separable;
        if (be_.a_square_diagonal()) return Structure::Box;
        throw UnsupportedStructure("quadratic term couples columns and the constraint matrix is not diagonal");
      case Structure::Separable:
        if (!be_.q_diagonal()) throw UnsupportedStructure("separable solve needs a diagonal quadratic term");
        return Structure::Separable;
      case Structure::Box:
        if (rows && !be_.a_square_diagonal()) throw UnsupportedStructure("box solve needs a square diagonal A");
        return Structure::Box;
      case Structure::BoundsOnly:
        if (rows) throw UnsupportedStructure("bounds-only solve needs a program without rows");
        return Structure::BoundsOnly;
    }
    return Structure::Auto;
  }

  Scales scales(const State& st) const {
    const V thx = theta_inv(st.sx, st.x);
    const V thw = theta_inv(st.sw, st.w);
    V t = be_.q_zero() ? thx : vadd(be_.q_diag(), thx);
    const double rp = rho_p_;
    auto inv = [rp](double v, double on) { return on != 0.0 ? 1.0 / (v + rp) : 0.0; };
    return Scales{vzip(inv, t, be_.col_mask()), vzip(inv, thw, be_.ge_mask())};
  }

  V normal_apply(const Scales& sc, const V& v) const {
    V out = be_.A(vmul(sc.dx_scale, be_.At(v)));
    out = vadd(out, vmul(sc.dw_scale, v));
    if (rho_d_ != 0.0) out = vaxpy(rho_d_, vmul(be_.row_mask(), v), out);
    return out;
  }

  V normal_diagonal(const Scales& sc) const {
    V d = vadd(be_.squared_A_times(sc.dx_scale), sc.dw_scale);
    return vaxpy(rho_d_, be_.row_mask(), d);
  }

  V normal_column(const Scales& sc, std::uint64_t i) const {
    V col = be_.A(vmul(sc.dx_scale, be_.A_row(i)));
    return vaxpy(vat(sc.dw_scale, i) + rho_d_ * vat(be_.row_mask(), i), vunit(be_.row_mask(), i), col);
  }

  PcholData<V> preconditioner(const Scales& sc, int k) const {
    std::function<V(std::uint64_t)> column = [&](std::uint64_t i) { return normal_column(sc, i); };
    return build_pchol<V>(column, normal_diagonal(sc), be_.row_mask(), k, &tick_);
  }

  NormalSpace space(Structure s) const {
    if (s != Structure::Separable) return NormalSpace::Rows;
    const double rows = vsum(be_.row_mask());
    const bool all_ge = vsum(be_.ge_mask()) == rows;
    switch (o_.normal_space) {
      case NormalSpace::Rows:
        return NormalSpace::Rows;
      case NormalSpace::Columns:
        if (!all_ge) throw UnsupportedStructure("column normal equations need inequality rows only");
        return NormalSpace::Columns;
      case NormalSpace::Auto:
        break;
    }
    return all_ge && vsum(be_.col_mask()) < rows ? NormalSpace::Columns : NormalSpace::Rows;
  }

  int auto_k() const {
    if (o_.precond_k >= 0) return o_.precond_k;
    const double n = space_ == NormalSpace::Columns ? vsum(be_.col_mask()) : vsum(be_.row_mask());
    return n >= 128.0 ? 50 : 0;
  }

  // D^{-1} + A^T E A with E = (Theta_w^{-1} + rho_p) / (1 + rho_d (Theta_w^{-1} + rho_p)).
  struct ColScales {
    V dinv, e, h;
  };

  ColScales col_scales(const State& st) const {
    const V thx = theta_inv(st.sx, st.x);
    const V thw = theta_inv(st.sw, st.w);
    const double rp = rho_p_, rd = rho_d_;
    V t = be_.q_diagonal() && !be_.q_zero() ? vadd(be_.q_diag(), thx) : thx;
    ColScales cs;
    cs.dinv = vzip([rp](double v, double on) { return on != 0.0 ? v + rp : 0.0; }, t, be_.col_mask());
    cs.h = vzip([rp, rd](double v, double on) { return on != 0.0 ? 1.0 / (1.0 + rd * (v + rp)) : 0.0; }, thw,
                be_.ge_mask());
    cs.e = vmul(cs.h, vzip([rp](double v, double on) { return on != 0.0 ? v + rp : 0.0; }, thw, be_.ge_mask()));
    return cs;
  }

  V cols_apply(const ColScales& cs, const V& v) const {
    V out = vadd(vmul(cs.dinv, v), be_.At(vmul(cs.e, be_.A(v))));
    if (!be_.q_diagonal()) out = vadd(out, vmul(be_.col_mask(), be_.Q(v)));
    return out;
  }

  V cols_diagonal(const ColScales& cs) const {
    V d = vadd(cs.dinv, be_.squared_At_times(cs.e));
    if (!be_.q_diagonal()) d = vadd(d, vmul(be_.col_mask(), be_.q_diag()));
    return d;
  }

  Dir columns(const State& st, const V& gx, const V& gw, const Res& r, double kkt) const {
    Dir d;
    const ColScales cs = col_scales(st);
    // dy = H (E r_p - g_w) - E A dx
    const V dy0 = vsub(vmul(cs.e, r.rp), vmul(cs.h, gw));
    const V rhs = vmul(be_.col_mask(), vsub(be_.At(dy0), gx));
    if (auto direct = be_.direct_cols(cs.dinv, cs.e, rhs)) {
      d.dx = vmul(be_.col_mask(), *direct);
      d.cg.converged = true;
    } else {
      const double tol = o_.cg_reduction * std::min(vnorm(rhs), kkt);
      std::function<V(const V&)> op = [&](const V& v) { return cols_apply(cs, v); };
      const int k = auto_k();
      if (k > 0) {
        std::function<V(std::uint64_t)> column = [&](std::uint64_t i) {
          return cols_apply(cs, vunit(be_.col_mask(), i));
        };
        const PcholData<V> pc = build_pchol<V>(column, cols_diagonal(cs), be_.col_mask(), k, &tick_);
        std::function<V(const V&)> pre = [&](const V& v) { return pchol_solve(pc, v); };
        d.dx = pcg<V>(op, rhs, &pre, tol, o_.max_cg_iterations, d.cg, &tick_);
      } else {
        d.dx = pcg<V>(op, rhs, nullptr, tol, o_.max_cg_iterations, d.cg, &tick_);
      }
    }
    d.dy = vsub(dy0, vmul(cs.e, be_.A(d.dx)));
    const Scales sc = scales(st);
    d.dw = vmul(sc.dw_scale, vsub(vscale(-1.0, d.dy), gw));
    return d;
  }

  Dir separable(const State& st, const V& gx, const V& gw, const Res& r, double kkt) const {
    Dir d;
    const Scales sc = scales(st);
    const V f = vsub(vadd(r.rp, be_.A(vmul(sc.dx_scale, gx))), vmul(sc.dw_scale, gw));
    if (auto direct = be_.direct_normal(sc.dx_scale, sc.dw_scale, rho_d_, f)) {
      d.dy = *direct;
      d.cg.converged = true;
    } else {
      const double tol = o_.cg_reduction * std::min(vnorm(f), kkt);
      std::function<V(const V&)> op = [&](const V& v) { return normal_apply(sc, v); };
      const int k = auto_k();
      if (k > 0) {
        const PcholData<V> pc = preconditioner(sc, k);
        std::function<V(const V&)> pre = [&](const V& v) { return pchol_solve(pc, v); };
        d.dy = pcg<V>(op, f, &pre, tol, o_.max_cg_iterations, d.cg, &tick_);
      } else {
        d.dy = pcg<V>(op, f, nullptr, tol, o_.max_cg_iterations, d.cg, &tick_);
      }
    }
    d.dx = vmul(sc.dx_scale, vsub(be_.At(d.dy), gx));
    d.dw = vmul(sc.dw_scale, vsub(vscale(-1.0, d.dy), gw));
    return d;
  }

  // Eliminates dy and dw row by row; A is diagonal in the row/column pairing.
  Dir column_space(const State& st, const V& gx, const V& gw, const Res& r, double kkt) const {
    Dir d;
    const V& cmask = be_.col_mask();
    const double rp = rho_p_;
    const V thx = theta_inv(st.sx, st.x);
    V mdiag = vzip([rp](double t, double on) { return on != 0.0 ? t + rp : 0.0; }, thx, cmask);
    V a = vzeros(cmask), ge_c = vzeros(cmask), eq_c = vzeros(cmask), rp_c = vzeros(cmask), gw_c = vzeros(cmask),
      wreg_c = vzeros(cmask);
    const bool rows = be_.has_rows();
    if (rows) {
      a = be_.a_diag();
      ge_c = be_.to_cols(be_.ge_mask());
      eq_c = vsub(be_.to_cols(be_.row_mask()), ge_c);
      rp_c = be_.to_cols(r.rp);
      gw_c = be_.to_cols(gw);
      const V thw_c = be_.to_cols(theta_inv(st.sw, st.w));
      wreg_c = vzip([rp](double t, double on) { return on != 0.0 ? t + rp : 0.0; }, thw_c, ge_c);
      if (vmin(vzip([](double av, double on) { return on != 0.0 ? std::abs(av) : 1.0; }, a, eq_c)) == 0.0)
        throw SingularError("equality row with a zero diagonal coefficient");
    }
    const V m_full = mdiag;
    const V free = vsub(cmask, vmul(eq_c, cmask));
    const V dx_e = vzip(safe_div, vmul(rp_c, eq_c), a);
    mdiag = vadd(mdiag, vmul(vmul(a, a), wreg_c));
    auto mfull_apply = [&](const V& v) {
      V out = vmul(m_full, v);
      return be_.q_zero() ? out : vadd(out, be_.Q(v));
    };
    V rhs = vsub(vmul(a, vsub(vmul(rp_c, wreg_c), gw_c)), gx);
    if (!be_.q_zero() && rows) rhs = vsub(rhs, be_.Q(dx_e));
    rhs = vmul(free, rhs);

    V dx_f;
    const bool diag_only = be_.q_zero() || be_.q_diagonal();
    if (diag_only) {
      const V full_diag = be_.q_zero() ? mdiag : vadd(mdiag, vmul(be_.q_diag(), free));
      dx_f = vmul(free, vzip(safe_div, rhs, full_diag));
      d.cg.converged = true;
    } else if (auto direct = be_.direct_column(free, mdiag, rhs)) {
      dx_f = vmul(free, *direct);
      d.cg.converged = true;
    } else {
      std::function<V(const V&)> op = [&](const V& v) { return vmul(free, vadd(be_.Q(v), vmul(mdiag, v))); };
      const V jac = vmul(free, vzip(safe_div, cmask, vadd(mdiag, be_.q_diag())));
      std::function<V(const V&)> pre = [&](const V& v) { return vmul(jac, v); };
      const double tol = o_.cg_reduction * std::min(vnorm(rhs), kkt);
      dx_f = pcg<V>(op, rhs, &pre, tol, o_.max_cg_iterations, d.cg, &tick_);
    }
    d.dx = vadd(dx_e, dx_f);
    if (rows) {
      V dy_c = vmul(ge_c, vsub(vmul(vsub(rp_c, vmul(a, d.dx)), wreg_c), gw_c));
      dy_c = vadd(dy_c, vmul(eq_c, vzip(safe_div, vadd(mfull_apply(d.dx), gx), a)));
      d.dy = be_.to_rows(dy_c);
      const Scales sc = scales(st);
      d.dw = vmul(sc.dw_scale, vsub(vscale(-1.0, d.dy), gw));
    } else {
      d.dy = vzeros(be_.row_mask());
      d.dw = vzeros(be_.row_mask());
    }
    return d;
  }

  Dir direction(const State& st, const Res& r, double mu, Structure s) const {
    const V rcx = comp(st.x, st.sx, be_.col_mask(), mu);
    const V rcw = comp(st.w, st.sw, be_.ge_mask(), mu);
    const V gx = vsub(r.rdx, vzip(safe_div, rcx, st.x));
    const V gw = vsub(r.rdw, vzip(safe_div, rcw, st.w));
    const double kkt = std::sqrt(vdot(r.rp, r.rp) + vdot(r.rdx, r.rdx) + vdot(r.rdw, r.rdw) + vdot(rcx, rcx) +
                                 vdot(rcw, rcw));
    Dir d = s != Structure::Separable     ? column_space(st, gx, gw, r, kkt)
            : space_ == NormalSpace::Rows ? separable(st, gx, gw, r, kkt)
                                          : columns(st, gx, gw, r, kkt);
    d.dsx = vsub(vzip(safe_div, rcx, st.x), vmul(theta_inv(st.sx, st.x), d.dx));
    d.dsw = vsub(vzip(safe_div, rcw, st.w), vmul(theta_inv(st.sw, st.w), d.dw));
    return d;
  }

  // Retries with ten times the regularization after a CG breakdown.
  Dir robust_direction(const State& st, const Res& r, double mu, Structure s) {
    for (int attempt = 0;; ++attempt) {
      Dir d = direction(st, r, mu, s);
      if (!d.cg.breakdown || !o_.regularize || attempt >= 8) return d;
      rho_p_ *= 10.0;
      rho_d_ *= 10.0;
    }
  }

  static double max_step(const V& x, const V& dx) {
    return vmin(vzip([](double xv, double d) { return d < 0.0 ? -xv / d : kNoBound; }, x, dx));
  }

  double objective(const V& x) const {
    double obj = vdot(be_.c(), x);
    if (!be_.q_zero()) obj += 0.5 * vdot(x, be_.Q(x));
    return obj;
  }

  SolveReport run() {
    const auto t0 = Clock::now();
    SolveReport rep;
    const Structure s = resolve();
    rep.structure = s;
    space_ = space(s);
    rep.normal_space = space_;
    rep.precond_k = s == Structure::Separable ? auto_k() : 0;
    rep.add_nodes_A = be_.nodes_A();
    rep.add_nodes_Q = be_.nodes_Q();
    State st = initial();
    const double n = std::max(1.0, vsum(be_.col_mask()) + vsum(be_.ge_mask()));
    const double bnorm = vnorm(be_.b()), cnorm = vnorm(be_.c());
    int tiny_steps = 0;
    double last_alpha = 1.0;
    rep.status = SolveStatus::IterationLimit;
    for (int it = 0;; ++it) {
      const Res r = residuals(st);
      const double xs = vdot(st.x, st.sx) + vdot(st.w, st.sw);
      const double pobj = objective(st.x);
      const double rel_p = vnorm(r.rp) / (1.0 + bnorm);
      const double rel_d = std::hypot(vnorm(r.rdx), vnorm(r.rdw)) / (1.0 + cnorm);
      const double rel_c = xs / (1.0 + std::abs(pobj));
      rep.primal_residuals.push_back(rel_p);
      rep.dual_residuals.push_back(rel_d);
      rep.comp_residuals.push_back(rel_c);
      rep.final_residual = std::max({rel_p, rel_d, rel_c});
      rep.iterations = it;
      if (!std::isfinite(rep.final_residual)) {
        rep.status = SolveStatus::Stalled;
        break;
      }
      if (rep.final_residual <= o_.tolerance) {
        rep.status = SolveStatus::Optimal;
        break;
      }
      if (it >= o_.max_iterations) break;

      const double sigma = std::max(o_.sigma, std::min(0.9, 1.0 - last_alpha));
      const double mu = sigma * xs / n;
      const Dir d = robust_direction(st, r, mu, s);
      rep.cg_total += d.cg.iterations;
      rep.cg_per_iteration.push_back(d.cg.iterations);
      if (!d.cg.converged && !d.cg.breakdown) ++rep.cg_cap_hits;

      if (o_.observer) {
        IterationView view;
        view.iteration = it;
        view.mu = mu;
        view.rho_p = rho_p_;
        view.rho_d = rho_d_;
        view.x = vdense(st.x);
        view.w = vdense(st.w);
        view.y = vdense(st.y);
        view.sx = vdense(st.sx);
        view.sw = vdense(st.sw);
        view.dx = vdense(d.dx);
        view.dw = vdense(d.dw);
        view.dy = vdense(d.dy);
        view.dsx = vdense(d.dsx);
        view.dsw = vdense(d.dsw);
        view.cg_iterations = d.cg.iterations;
        o_.observer(view);
      }

      const double rp = std::min(max_step(st.x, d.dx), max_step(st.w, d.dw));
      const double rd = std::min(max_step(st.sx, d.dsx), max_step(st.sw, d.dsw));
      // a quadratic term couples the primal and dual steps
      const bool split = be_.q_zero();
      const double alpha_p = std::min(1.0, o_.fraction * (split ? rp : std::min(rp, rd)));
      const double alpha_d = std::min(1.0, o_.fraction * (split ? rd : std::min(rp, rd)));
      const double alpha = std::min(alpha_p, alpha_d);
      last_alpha = alpha;
      st.x = vaxpy(alpha_p, d.dx, st.x);
      st.w = vaxpy(alpha_p, d.dw, st.w);
      st.y = vaxpy(alpha_d, d.dy, st.y);
      st.sx = vaxpy(alpha_d, d.dsx, st.sx);
      st.sw = vaxpy(alpha_d, d.dsw, st.sw);
      if (o_.quantize) {
        for (V* v : {&st.x, &st.w, &st.y, &st.sx, &st.sw}) *v = vmap(round_digits, *v);
      }
      if (!(alpha > 1e-12)) {
        if (++tiny_steps >= 5) {
          rep.status = SolveStatus::Stalled;
          break;
        }
      } else {
        tiny_steps = 0;
      }
      be_.maintenance(o_.gc_threshold);
    }
    const Dense xd = vdense(st.x), yd = vdense(st.y);
    rep.x.assign(xd.data(), xd.data() + xd.size());
    rep.y.assign(yd.data(), yd.data() + yd.size());
    rep.objective = objective(st.x);
    rep.rho_primal = rho_p_;
    rep.rho_dual = rho_d_;
    rep.peak_live_nodes = be_.peak();
    rep.time_solve = seconds_since(t0);
    rep.products = be_.products().count;
    rep.time_products = be_.products().seconds;
    return rep;
  }

 private:
  B& be_;
  const SolveOptions& o_;
  double rho_p_ = 0.0;
  double rho_d_ = 0.0;
  NormalSpace space_ = NormalSpace::Rows;
  std::function<void()> tick_;
};

Engine<AddBackend>::State to_engine(const IpmState& s) { return {s.x, s.w, s.y, s.sx, s.sw}; }

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw InvalidArgument("expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw InvalidArgument("expected a number, got '" + v + "'");
  return out;
}

int parse_int(const std::string& v) {
  const double d = parse_double(v);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw InvalidArgument("expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

}  // namespace

// ---- public interface ------------------------------------------------------------

const char* to_string(Structure s) {
  switch (s) {
    case Structure::Auto:
      return "auto";
    case Structure::Separable:
      return "separable";
    case Structure::Box:
      return "box";
    case Structure::BoundsOnly:
      return "bounds-only";
  }
  return "?";
}

const char* to_string(NormalSpace s) {
  switch (s) {
    case NormalSpace::Auto:
      return "auto";
    case NormalSpace::Rows:
      return "rows";
    case NormalSpace::Columns:
      return "columns";
  }
  return "?";
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::IterationLimit:
      return "iteration-limit";
    case SolveStatus::Stalled:
      return "stalled";
  }
  return "?";
}

void set_option(SolveOptions& o, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw InvalidArgument("option '" + kv + "' is not key=value");
  const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
  if (key == "tolerance" || key == "tol") o.tolerance = parse_double(val);
  else if (key == "cg_reduction") o.cg_reduction = parse_double(val);
  else if (key == "max_iterations") o.max_iterations = parse_int(val);
  else if (key == "max_cg_iterations") o.max_cg_iterations = parse_int(val);
  else if (key == "fraction") o.fraction = parse_double(val);
  else if (key == "sigma") o.sigma = parse_double(val);
  else if (key == "regularize") o.regularize = parse_bool(val);
  else if (key == "rho_primal") o.rho_primal = parse_double(val);
  else if (key == "rho_dual") o.rho_dual = parse_double(val);
  else if (key == "precond_k") o.precond_k = parse_int(val);
  else if (key == "quantize") o.quantize = parse_bool(val);
  else if (key == "ground_direct") o.ground_direct = parse_bool(val);
  else if (key == "gc_threshold") o.gc_threshold = static_cast<std::size_t>(parse_double(val));
  else if (key == "structure") {
    if (val == "auto") o.structure = Structure::Auto;
    else if (val == "separable") o.structure = Structure::Separable;
    else if (val == "box") o.structure = Structure::Box;
    else if (val == "bounds-only") o.structure = Structure::BoundsOnly;
    else throw InvalidArgument("unknown structure '" + val + "'");
  } else if (key == "normal_space") {
    if (val == "auto") o.normal_space = NormalSpace::Auto;
    else if (val == "rows") o.normal_space = NormalSpace::Rows;
    else if (val == "columns") o.normal_space = NormalSpace::Columns;
    else throw InvalidArgument("unknown normal space '" + val + "'");
  } else {
    throw InvalidArgument("unknown option '" + key + "'");
  }
  if (!(o.fraction > 0.0 && o.fraction < 1.0)) throw InvalidArgument("fraction must lie in (0, 1)");
  if (!(o.sigma > 0.0 && o.sigma < 1.0)) throw InvalidArgument("sigma must lie in (0, 1)");
  if (!(o.tolerance > 0.0) || !(o.cg_reduction > 0.0)) throw InvalidArgument("tolerances must be positive");
}

std::string to_text(const SolveReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "status=" << to_string(r.status) << '\n'
     << "structure=" << to_string(r.structure) << '\n'
     << "normal_space=" << to_string(r.normal_space) << '\n'
     << "objective=" << r.objective << '\n'
     << "iterations=" << r.iterations << '\n'
     << "cg_total=" << r.cg_total << '\n'
     << "cg_cap_hits=" << r.cg_cap_hits << '\n'
     << "residual=" << r.final_residual << '\n'
     << "primal_residual=" << (r.primal_residuals.empty() ? 0.0 : r.primal_residuals.back()) << '\n'
     << "dual_residual=" << (r.dual_residuals.empty() ? 0.0 : r.dual_residuals.back()) << '\n'
     << "comp_residual=" << (r.comp_residuals.empty() ? 0.0 : r.comp_residuals.back()) << '\n'
     << "precond_k=" << r.precond_k << '\n'
     << "add_nodes_A=" << r.add_nodes_A << '\n'
     << "add_nodes_Q=" << r.add_nodes_Q << '\n'
     << "peak_live_nodes=" << r.peak_live_nodes << '\n'
     << "time_compile=" << r.time_compile << '\n'
     << "time_solve=" << r.time_solve << '\n'
     << "products=" << r.products << '\n'
     << "time_products=" << r.time_products << '\n';
  return os.str();
}

SolveReport ipm_solve(const QpStandard& qp, const SolveOptions& opts) {
  AddBackend be(qp);
  Engine<AddBackend> eng(be, opts);
  return eng.run();
}

SolveReport ground_ipm_solve(const GroundQp& g, const SolveOptions& opts) {
  DenseBackend be(g, opts.ground_direct);
  Engine<DenseBackend> eng(be, opts);
  return eng.run();
}

IpmState initial_state(const QpStandard& qp) {
  AddBackend be(qp);
  SolveOptions o;
  const auto s = Engine<AddBackend>(be, o).initial();
  return IpmState{s.x, s.w, s.y, s.sx, s.sw, 0.0};
}

Residuals residuals(const QpStandard& qp, const IpmState& st, double mu) {
  AddBackend be(qp);
  SolveOptions o;
  Engine<AddBackend> eng(be, o);
  const auto s = to_engine(st);
  const auto r = eng.residuals(s);
  return Residuals{r.rp, r.rdx, r.rdw, eng.comp(st.x, st.sx, qp.col_mask, mu), eng.comp(st.w, st.sw, qp.ge_mask, mu)};
}

NormalOperator build_normal_operator(const QpStandard& qp, const IpmState& st, const SolveOptions& opts) {
  AddBackend be(qp);
  Engine<AddBackend> eng(be, opts);
  if (!qp.q_diagonal()) throw UnsupportedStructure("normal equations need a diagonal quadratic term");
  const auto sc = eng.scales(to_engine(st));
  return NormalOperator{&qp, sc.dx_scale, sc.dw_scale, eng.rho_d()};
}

VecF NormalOperator::apply(const VecF& v) const {
  VecF out = matvec(qp->A, vec_hadamard(dx_scale, matvec_t(qp->A, v)));
  out = vec_add(out, vec_hadamard(dw_scale, v));
  if (rho_d != 0.0) out = axpy(rho_d, vec_hadamard(qp->row_mask, v), out);
  return out;
}

VecF NormalOperator::diagonal() const {
  AddBackend be(*qp);
  VecF d = vec_add(be.squared_A_times(dx_scale), dw_scale);
  return axpy(rho_d, qp->row_mask, d);
}

VecF cg_solve(const LinearMap& op, const VecF& f, const LinearMap* precond, double reduction, int max_iter,
              CgStats* stats, std::optional<double> abs_tol) {
  CgStats st;
  const double tol = abs_tol ? *abs_tol : reduction * norm2(f);
  VecF x = pcg<VecF>(op, f, precond, tol, max_iter, st);
  if (stats) *stats = st;
  return x;
}

Eigen::VectorXd cg_solve(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op, const Eigen::VectorXd& f,
                         const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>* precond, double reduction,
                         int max_iter, CgStats* stats, std::optional<double> abs_tol) {
  CgStats st;
  const double tol = abs_tol ? *abs_tol : reduction * f.norm();
  Eigen::VectorXd x = pcg<Eigen::VectorXd>(op, f, precond, tol, max_iter, st);
  if (stats) *stats = st;
  return x;
}

struct PartialCholesky::Impl {
  PcholData<VecF> data;
};

PartialCholesky::PartialCholesky(const LinearMap& column_of, const VecF& diagonal, const VecF& mask, int k) {
  auto impl = std::make_shared<Impl>();
  std::function<VecF(std::uint64_t)> col = [&](std::uint64_t i) { return column_of(vunit(mask, i)); };
  impl->data = build_pchol<VecF>(col, diagonal, mask, k);
  impl_ = std::move(impl);
}

VecF PartialCholesky::apply_inverse(const VecF& r) const { return impl_ ? pchol_solve(impl_->data, r) : r; }

VecF PartialCholesky::apply(const VecF& v) const { return impl_ ? pchol_apply(impl_->data, v) : v; }

const std::vector<std::uint64_t>& PartialCholesky::pivots() const {
  static const std::vector<std::uint64_t> none;
  return impl_ ? impl_->data.pivots : none;
}

PartialCholesky build_preconditioner(const NormalOperator& op, int k) {
  const QpStandard& qp = *op.qp;
  LinearMap column = [&op, &qp](const VecF& e) {
    VecF col = matvec(qp.A, vec_hadamard(op.dx_scale, matvec_t(qp.A, e)));
    col = vec_add(col, vec_hadamard(op.dw_scale, e));
    return axpy(op.rho_d, vec_hadamard(qp.row_mask, e), col);
  };
  return PartialCholesky(column, op.diagonal(), qp.row_mask, k);
}

Directions newton_direction(const QpStandard& qp, const IpmState& st, const SolveOptions& opts) {
  AddBackend be(qp);
  Engine<AddBackend> eng(be, opts);
  const auto s = to_engine(st);
  const auto r = eng.residuals(s);
  const Structure str = eng.resolve();
  eng.set_space(eng.space(str));
  const auto d = eng.direction(s, r, st.mu, str);
  return Directions{d.dx, d.dw, d.dy, d.dsx, d.dsw, d.cg};
}

double step_length(const VecF& x, const VecF& dx, double fraction) {
  return std::min(1.0, fraction * Engine<AddBackend>::max_step(x, dx));
}

}  // namespace symqp
