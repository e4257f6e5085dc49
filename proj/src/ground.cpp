#include "symqp/ground.hpp"

#include <algorithm>
#include <functional>
#include <istream>
#include <map>
#include <ostream>

#include "symqp/error.hpp"

namespace symqp {

namespace {

int bits_for_size(std::size_t n) {
  int w = 0;
  while ((std::size_t{1} << w) < n) ++w;
  return w;
}

// Direct semantic evaluation of guards and coefficients under an assignment of
// integer values to names.
class Evaluator {
 public:
  explicit Evaluator(const Foqp& f) : f_(f) {}

  int width(const std::string& name) const {
    if (auto it = fresh_.find(name); it != fresh_.end()) return it->second.first;
    return f_.find_var(name)->width;
  }

  std::uint64_t domain_size(const std::string& name) const {
    if (auto it = fresh_.find(name); it != fresh_.end()) return it->second.second;
    const VarDecl* d = f_.find_var(name);
    if (d->domain) return f_.find_domain(*d->domain)->constants.size();
    return std::uint64_t{1} << d->width;
  }

  bool valid(const std::vector<std::string>& names, std::map<std::string, std::uint64_t>& env) const {
    for (const auto& n : names)
      if (env.at(n) >= domain_size(n)) return false;
    return true;
  }

  bool holds(const FormulaPtr& g, std::map<std::string, std::uint64_t>& env) {
    switch (g->kind) {
      case FormulaKind::True:
        return true;
      case FormulaKind::False:
        return false;
      case FormulaKind::Bit: {
        const int w = width(g->var);
        return ((env.at(g->var) >> (w - 1 - g->bit)) & 1u) != 0;
      }
      case FormulaKind::Not:
        return !holds(g->lhs, env);
      case FormulaKind::And:
        return holds(g->lhs, env) && holds(g->rhs, env);
      case FormulaKind::Or:
        return holds(g->lhs, env) || holds(g->rhs, env);
      case FormulaKind::EqVars:
        return env.at(g->var) == env.at(g->var2);
      case FormulaKind::EqConst:
        return env.at(g->var) == g->constant;
      case FormulaKind::Atom: {
        const PredDecl* p = f_.find_pred(g->pred);
        Fact probe{g->pred, {}};
        for (std::size_t i = 0; i < g->args.size(); ++i) {
          const DomainDecl* d = f_.find_domain(p->arg_domains[i]);
          if (auto it = env.find(g->args[i]); it != env.end()) {
            if (it->second >= d->constants.size()) return false;
            probe.args.push_back(d->constants[it->second]);
          } else {
            probe.args.push_back(g->args[i]);
          }
        }
        return f_.facts.contains(probe);
      }
      case FormulaKind::Exists:
      case FormulaKind::Forall: {
        int w;
        std::uint64_t count;
        if (!g->domain.empty()) {
          const DomainDecl* d = f_.find_domain(g->domain);
          w = bits_for_size(d->constants.size());
          count = d->constants.size();
        } else {
          const VarDecl* v = f_.find_var(g->var);
          if (!v) throw InvalidArgument("unbounded quantifier: '" + g->var + "'");
          w = v->width;
          count = v->domain ? f_.find_domain(*v->domain)->constants.size() : (std::uint64_t{1} << w);
        }
        const bool fresh = !g->domain.empty();
        if (fresh) fresh_[g->var] = {w, count};
        const bool exists = g->kind == FormulaKind::Exists;
        bool result = !exists;
        for (std::uint64_t c = 0; c < count; ++c) {
          env[g->var] = c;
          if (holds(g->lhs, env) == exists) {
            result = exists;
            break;
          }
        }
        env.erase(g->var);
        if (fresh) fresh_.erase(g->var);
        return result;
      }
      case FormulaKind::Prop:
        throw UnsupportedStructure("open proposition " + to_string(g) + " cannot be grounded");
    }
    return false;
  }

  double value(const ExprPtr& e, std::map<std::string, std::uint64_t>& env) {
    switch (e->kind) {
      case ExprKind::Number:
        return e->value;
      case ExprKind::Add:
        return value(e->lhs, env) + value(e->rhs, env);
      case ExprKind::Sub:
        return value(e->lhs, env) - value(e->rhs, env);
      case ExprKind::Mul:
        return value(e->lhs, env) * value(e->rhs, env);
      case ExprKind::Neg:
        return 0.0 - value(e->lhs, env);
      case ExprKind::Indicator:
        return holds(e->guard, env) ? 1.0 : 0.0;
    }
    return 0.0;
  }

 private:
  const Foqp& f_;
  std::map<std::string, std::pair<int, std::uint64_t>> fresh_;
};

// Names bound to auxiliary bits: every bound name except the targets.
std::vector<std::string> aux_names(const std::vector<std::string>& bound, const std::string& t1,
                                   const std::string& t2 = {}) {
  std::vector<std::string> out;
  for (const auto& n : bound)
    if (n != t1 && n != t2) out.push_back(n);
  return out;
}

// Sum over all assignments of the auxiliary names, added pairwise along the
// binary tree of their bits (most significant first).
double tree_sum(Evaluator& ev, const std::vector<std::string>& aux, std::map<std::string, std::uint64_t>& env,
                const std::function<double()>& leaf) {
  std::vector<std::pair<std::string, int>> bits;
  for (const auto& n : aux)
    for (int i = 0; i < ev.width(n); ++i) bits.emplace_back(n, i);
  for (const auto& n : aux) env[n] = 0;
  std::function<double(std::size_t)> rec = [&](std::size_t k) -> double {
    if (k == bits.size()) return leaf();
    const auto& [name, i] = bits[k];
    const std::uint64_t mask = std::uint64_t{1} << (ev.width(name) - 1 - i);
    env[name] |= mask;
    const double hi = rec(k + 1);
    env[name] &= ~mask;
    const double lo = rec(k + 1);
    return hi + lo;
  };
  return rec(0);
}

}  // namespace

GroundProgram ground(const Foqp& f, int bit_budget) {
  Evaluator ev(f);
  const int w = f.column_width();
  const int k = bits_for_size(f.constraints.size());
  int r = 0;
  for (const auto& c : f.constraints) {
    int rw = 0;
    for (const auto& y : c.rows) rw += f.find_var(y)->width;
    r = std::max(r, rw);
  }
  int aux_max = 0;
  auto note_aux = [&](const std::vector<std::string>& names) {
    int a = 0;
    for (const auto& n : names) a += f.find_var(n)->width;
    aux_max = std::max(aux_max, a);
  };
  for (const auto& t : f.objective) note_aux(aux_names(t.bound, t.target));
  for (const auto& t : f.quadratic) note_aux(aux_names(t.bound, t.left, t.right));
  for (const auto& c : f.constraints)
    for (const auto& t : c.body) note_aux(aux_names(t.bound, t.target));
  if (k + r + w + aux_max > bit_budget)
    throw InvalidArgument("grounding needs " + std::to_string(k + r + w + aux_max) + " bits; budget is " +
                          std::to_string(bit_budget));

  const Eigen::Index rows = Eigen::Index{1} << (k + r);
  const Eigen::Index cols = Eigen::Index{1} << w;
  GroundProgram g;
  g.A = Eigen::MatrixXd::Zero(rows, cols);
  g.b = Eigen::VectorXd::Zero(rows);
  g.c = Eigen::VectorXd::Zero(cols);
  g.Q = Eigen::MatrixXd::Zero(cols, cols);
  g.row_mask = Eigen::VectorXd::Zero(rows);
  g.ge_mask = Eigen::VectorXd::Zero(rows);
  g.col_mask = Eigen::VectorXd::Zero(cols);

  std::map<std::string, std::uint64_t> env;
  for (std::size_t bi = 0; bi < f.constraints.size(); ++bi) {
    const ConstraintBlock& c = f.constraints[bi];
    int rw = 0;
    for (const auto& y : c.rows) rw += f.find_var(y)->width;
    for (std::uint64_t yv = 0; yv < (std::uint64_t{1} << rw); ++yv) {
      env.clear();
      int shift = rw;
      for (const auto& y : c.rows) {
        const int yw = f.find_var(y)->width;
        shift -= yw;
        env[y] = (yv >> shift) & ((std::uint64_t{1} << yw) - 1);
      }
      const Eigen::Index row = static_cast<Eigen::Index>((bi << r) + yv);
      const double rowf = (ev.holds(c.row_guard, env) ? 1.0 : 0.0) * (ev.valid(c.rows, env) ? 1.0 : 0.0);
      g.row_mask(row) = rowf;
      if (c.sense != Sense::Eq) g.ge_mask(row) = rowf;
      for (Eigen::Index j = 0; j < cols; ++j) {
        double ab = 0.0;
        for (const auto& t : c.body) {
          const bool to_row = env.contains(t.target) &&
                              std::find(c.rows.begin(), c.rows.end(), t.target) != c.rows.end();
          const auto aux = aux_names(t.bound, to_row ? std::string() : t.target);
          if (!to_row) env[t.target] = static_cast<std::uint64_t>(j);
          bool any = false;
          const double term = tree_sum(ev, aux, env, [&] {
            double gv = rowf * (ev.holds(t.guard, env) ? 1.0 : 0.0);
            gv *= ev.valid(t.bound, env) ? 1.0 : 0.0;
            if (to_row) gv *= env.at(t.target) == static_cast<std::uint64_t>(j) ? 1.0 : 0.0;
            if (gv != 0.0) any = true;
            return gv * ev.value(t.coef, env);
          });
          if (any) g.col_mask(j) = 1.0;
          ab = ab + term;
          for (const auto& n : aux) env.erase(n);
          if (!to_row) env.erase(t.target);
        }
        if (c.sense == Sense::Le) ab = -1.0 * ab;
        g.A(row, j) = 0.0 + ab;
      }
      double rhs = rowf * ev.value(c.rhs, env);
      if (c.sense == Sense::Le) rhs = -1.0 * rhs;
      g.b(row) = 0.0 + rhs;
    }
  }

  for (Eigen::Index j = 0; j < cols; ++j) {
    double cj = 0.0;
    for (const auto& t : f.objective) {
      env.clear();
      env[t.target] = static_cast<std::uint64_t>(j);
      const auto aux = aux_names(t.bound, t.target);
      bool any = false;
      const double term = tree_sum(ev, aux, env, [&] {
        const double gv = (ev.holds(t.guard, env) ? 1.0 : 0.0) * (ev.valid(t.bound, env) ? 1.0 : 0.0);
        if (gv != 0.0) any = true;
        return gv * ev.value(t.coef, env);
      });
      if (any) g.col_mask(j) = 1.0;
      cj = cj + term;
    }
    g.c(j) = cj;
  }

  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(cols, cols);
  for (Eigen::Index i = 0; i < cols; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      double qij = 0.0;
      for (const auto& t : f.quadratic) {
        env.clear();
        env[t.left] = static_cast<std::uint64_t>(i);
        env[t.right] = static_cast<std::uint64_t>(j);
        const auto aux = aux_names(t.bound, t.left, t.right);
        bool any = false;
        const double term = tree_sum(ev, aux, env, [&] {
          const double gv = (ev.holds(t.guard, env) ? 1.0 : 0.0) * (ev.valid(t.bound, env) ? 1.0 : 0.0);
          if (gv != 0.0) any = true;
          return gv * ev.value(t.coef, env);
        });
        if (any) {
          g.col_mask(i) = 1.0;
          g.col_mask(j) = 1.0;
        }
        qij = qij + term;
      }
      q(i, j) = qij;
    }
  for (Eigen::Index i = 0; i < cols; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) g.Q(i, j) = (q(i, j) + q(j, i)) * 0.5;
  return g;
}

// ---- expansion of compiled diagrams ---------------------------------------

std::vector<Eigen::Triplet<double, std::int64_t>> nonzero_entries(const MatF& a) {
  AddManager& m = a.manager();
  struct Bit {
    std::uint32_t level;
    bool row;
    std::uint64_t weight;
  };
  std::vector<Bit> merged;
  const std::size_t nr = a.row_bits.size(), nc = a.col_bits.size();
  for (std::size_t i = 0; i < nr; ++i) merged.push_back({a.row_bits[i].index, true, std::uint64_t{1} << (nr - 1 - i)});
  for (std::size_t i = 0; i < nc; ++i) merged.push_back({a.col_bits[i].index, false, std::uint64_t{1} << (nc - 1 - i)});
  std::sort(merged.begin(), merged.end(), [](const Bit& x, const Bit& y) { return x.level < y.level; });

  std::vector<Eigen::Triplet<double, std::int64_t>> out;
  std::function<void(NodeId, std::size_t, std::uint64_t, std::uint64_t)> walk =
      [&](NodeId f, std::size_t k, std::uint64_t r, std::uint64_t c) {
        if (f == m.zero_id()) return;
        const auto& nd = m.node(f);
        if (k == merged.size()) {
          if (nd.level != AddManager::kTerminalLevel)
            throw DimensionError("matrix depends on a variable outside its index bits");
          if (r < a.rows && c < a.cols)
            out.emplace_back(static_cast<std::int64_t>(r), static_cast<std::int64_t>(c), nd.value);
          return;
        }
        const Bit& b = merged[k];
        if (nd.level < b.level) throw DimensionError("matrix depends on a foreign variable");
        const std::uint64_t rh = r + (b.row ? b.weight : 0), ch = c + (b.row ? 0 : b.weight);
        const bool split = nd.level == b.level;
        const NodeId hi = split ? nd.hi : f, lo = split ? nd.lo : f;
        walk(lo, k + 1, r, c);
        walk(hi, k + 1, rh, ch);
      };
  walk(a.fun.id(), 0, 0, 0);
  return out;
}

Eigen::VectorXd to_eigen(const VecF& v) {
  const auto d = vec_to_dense(v);
  return Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
}

GroundQp ground_qp(const QpStandard& qp, int bit_budget) {
  const int bits = static_cast<int>(std::max(qp.row_bits.size(), qp.col_bits.size()));
  if (bits > bit_budget)
    throw InvalidArgument("grounding needs " + std::to_string(bits) + " bits; budget is " + std::to_string(bit_budget));
  const std::uint64_t nnz = count_nonzeros(qp.A);
  if (nnz > (std::uint64_t{1} << bit_budget))
    throw InvalidArgument("grounding needs " + std::to_string(nnz) + " nonzeros; budget is 2^" +
                          std::to_string(bit_budget));
  GroundQp g;
  auto sparse = [](const MatF& a) {
    SparseMatrix s(static_cast<std::int64_t>(a.rows), static_cast<std::int64_t>(a.cols));
    auto t = nonzero_entries(a);
    s.setFromTriplets(t.begin(), t.end());
    s.makeCompressed();
    return s;
  };
  g.A = sparse(qp.A);
  g.Q = sparse(qp.Q);
  if (qp.q_factor) {
    const SparseMatrix f = sparse(qp.q_factor->F);
    const Eigen::VectorXd w = to_eigen(qp.q_factor->weight);
    g.Q = SparseMatrix(g.Q + SparseMatrix(f.transpose() * w.asDiagonal() * f));
    g.Q.makeCompressed();
  }
  g.b = to_eigen(qp.b);
  g.c = to_eigen(qp.c);
  g.row_mask = to_eigen(qp.row_mask);
  g.ge_mask = to_eigen(qp.ge_mask);
  g.col_mask = to_eigen(qp.col_mask);
  return g;
}

void write_coordinate(std::ostream& os, const SparseMatrix& a) {
  const auto old = os.precision(17);
  os << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  for (std::int64_t r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  os.precision(old);
}

SparseMatrix read_coordinate(std::istream& is) {
  std::int64_t rows = 0, cols = 0, nnz = 0;
  if (!(is >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
    throw InvalidArgument("bad coordinate header");
  std::vector<Eigen::Triplet<double, std::int64_t>> t;
  t.reserve(static_cast<std::size_t>(nnz));
  for (std::int64_t k = 0; k < nnz; ++k) {
    std::int64_t r, c;
    double v;
    if (!(is >> r >> c >> v)) throw InvalidArgument("truncated coordinate data");
    if (r < 0 || r >= rows || c < 0 || c >= cols) throw DimensionError("coordinate entry out of range");
    t.emplace_back(r, c, v);
  }
  SparseMatrix a(rows, cols);
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  return a;
}

}  // namespace symqp
