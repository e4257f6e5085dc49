#include <json.hpp>

#include <algorithm>
#include <map>

#include "symqp/error.hpp"
#include "symqp/qp.hpp"

namespace symqp {

namespace {

int bits_for_size(std::size_t n) {
  int w = 0;
  while ((std::size_t{1} << w) < n) ++w;
  return w;
}

std::vector<VarId> concat(std::span<const VarId> a, std::span<const VarId> b) {
  std::vector<VarId> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

using Binding = std::map<std::string, std::vector<VarId>>;

class Compiler {
 public:
  Compiler(const Foqp& f, AddManager& m) : f_(f), m_(m) {}

  QpStandard run() {
    layout();
    Add a = m_.zero(), b = m_.zero(), rows = m_.zero(), ge = m_.zero(), cols = m_.zero();
    for (std::size_t bi = 0; bi < f_.constraints.size(); ++bi) block(bi, a, b, rows, ge, cols);

    Add c = m_.zero();
    for (const auto& t : f_.objective) {
      Binding bind;
      std::vector<VarId> aux;
      bind_bound(t.bound, t.target, col_, bind, aux);
      Add g = m_.apply(BinaryOp::Times, formula(t.guard, bind), validity(t.bound, bind));
      Add term = m_.sum_abstract(m_.apply(BinaryOp::Times, g, expr(t.coef, bind)), aux);
      c = m_.apply(BinaryOp::Plus, c, term);
      cols = m_.apply(BinaryOp::Max, cols, m_.max_abstract(g, aux));
    }

    Add q = m_.zero();
    for (const auto& t : f_.quadratic) {
      Binding bind;
      std::vector<VarId> aux;
      bind_bound(t.bound, t.left, col_, bind, aux, &t.right, &colp_);
      Add g = m_.apply(BinaryOp::Times, formula(t.guard, bind), validity(t.bound, bind));
      Add term = m_.sum_abstract(m_.apply(BinaryOp::Times, g, expr(t.coef, bind)), aux);
      q = m_.apply(BinaryOp::Plus, q, term);
      Add support = m_.max_abstract(g, aux);
      cols = m_.apply(BinaryOp::Max, cols, m_.max_abstract(support, colp_));
      cols = m_.apply(BinaryOp::Max, cols, swap(m_.max_abstract(support, col_)));
    }
    q = m_.apply(BinaryOp::Times, m_.apply(BinaryOp::Plus, q, swap(q)), m_.terminal(0.5));

    const std::uint64_t nrows = std::uint64_t{1} << row_bits_.size();
    const std::uint64_t ncols = std::uint64_t{1} << col_.size();
    QpStandard qp;
    qp.A = MatF{a, row_bits_, col_, nrows, ncols};
    qp.b = VecF{b, row_bits_, nrows};
    qp.c = VecF{c, col_, ncols};
    qp.Q = MatF{q, col_, colp_, ncols, ncols};
    qp.row_mask = VecF{rows, row_bits_, nrows};
    qp.ge_mask = VecF{ge, row_bits_, nrows};
    qp.col_mask = VecF{cols, col_, ncols};
    qp.row_bits = row_bits_;
    qp.col_bits = col_;
    qp.colp_bits = colp_;
    qp.block_bits = blk_.size();
    return qp;
  }

 private:
  void layout() {
    const int w = f_.column_width();
    if (w == 0 && f_.objective.empty() && f_.quadratic.empty() && f_.constraints.empty())
      throw InvalidArgument("program has no decision terms");
    const int k = bits_for_size(f_.constraints.size());
    int r = 0;
    for (const auto& c : f_.constraints) r = std::max(r, row_width(c));
    for (int i = 0; i < k; ++i) blk_.push_back(m_.named_var("blk" + std::to_string(i)));
    for (int i = 0; i < std::max(r, w); ++i) {
      if (i < r) row_.push_back(m_.named_var("row" + std::to_string(i)));
      if (i < w) {
        col_.push_back(m_.named_var("col" + std::to_string(i)));
        colp_.push_back(m_.named_var("colp" + std::to_string(i)));
      }
    }
    row_bits_ = blk_;
    row_bits_.insert(row_bits_.end(), row_.begin(), row_.end());
    auto ascending = [](const std::vector<VarId>& v) { return std::is_sorted(v.begin(), v.end()); };
    if (!ascending(row_bits_) || !ascending(col_) || !ascending(colp_))
      throw InvalidArgument("manager variable order does not fit this program's layout; use a fresh manager");
  }

  int width(const std::string& name) const { return f_.find_var(name)->width; }

  int row_width(const ConstraintBlock& c) const {
    int r = 0;
    for (const auto& y : c.rows) r += width(y);
    return r;
  }

  std::vector<VarId> aux_bits(std::size_t& next, int count) {
    std::vector<VarId> out;
    for (int i = 0; i < count; ++i, ++next) {
      while (aux_.size() <= next) aux_.push_back(m_.named_var("aux" + std::to_string(aux_.size())));
      out.push_back(aux_[next]);
    }
    return out;
  }

  // Binds `target` (and optionally `second`) to column bits and every other
  // bound name to auxiliary bits, which are returned in `aux`.
  void bind_bound(const std::vector<std::string>& bound, const std::string& target,
                  const std::vector<VarId>& target_bits, Binding& bind, std::vector<VarId>& aux,
                  const std::string* second = nullptr, const std::vector<VarId>* second_bits = nullptr) {
    std::size_t next = 0;
    for (const auto& name : bound) {
      if (name == target) {
        bind[name] = target_bits;
      } else if (second && name == *second) {
        bind[name] = *second_bits;
      } else {
        auto bits = aux_bits(next, width(name));
        aux.insert(aux.end(), bits.begin(), bits.end());
        bind[name] = std::move(bits);
      }
    }
  }

  // 1 where every finite-domain variable in `names` holds a valid index.
  Add validity(const std::vector<std::string>& names, const Binding& bind) {
    Add v = m_.one();
    for (const auto& n : names) {
      const VarDecl* d = f_.find_var(n);
      if (!d->domain) continue;
      const std::size_t size = f_.find_domain(*d->domain)->constants.size();
      const auto& bits = bind.at(n);
      if (size == (std::size_t{1} << bits.size())) continue;
      std::vector<double> ones(size, 1.0);
      v = m_.apply(BinaryOp::Times, v, vec_from_dense(m_, bits, ones).fun);
    }
    return v;
  }

  Add swap(const Add& f) {
    std::vector<std::pair<VarId, VarId>> map;
    for (std::size_t i = 0; i < col_.size(); ++i) {
      map.emplace_back(col_[i], colp_[i]);
      map.emplace_back(colp_[i], col_[i]);
    }
    return m_.permute(f, map);
  }

  void block(std::size_t bi, Add& a, Add& b, Add& rows, Add& ge, Add& cols) {
    const ConstraintBlock& c = f_.constraints[bi];
    const int rw = row_width(c);
    Binding rbind;
    std::size_t off = row_.size() - static_cast<std::size_t>(rw);
    for (const auto& y : c.rows) {
      const int w = width(y);
      rbind[y] = std::vector<VarId>(row_.begin() + static_cast<std::ptrdiff_t>(off),
                                    row_.begin() + static_cast<std::ptrdiff_t>(off + w));
      off += static_cast<std::size_t>(w);
    }
    // Selector of this block's rows: block index, unused high row bits zero.
    Add sel = index_cube(m_, blk_, bi);
    for (std::size_t i = 0; i < row_.size() - static_cast<std::size_t>(rw); ++i)
      sel = m_.apply(BinaryOp::Times, sel, m_.apply(BinaryOp::Minus, m_.one(), m_.var(row_[i])));
    const Add rowf = m_.apply(BinaryOp::Times, formula(c.row_guard, rbind), validity(c.rows, rbind));
    const Add active = m_.apply(BinaryOp::Times, sel, rowf);
    rows = m_.apply(BinaryOp::Plus, rows, active);
    if (c.sense != Sense::Eq) ge = m_.apply(BinaryOp::Plus, ge, active);

    std::vector<VarId> all_rows = row_bits_;
    Add ab = m_.zero();
    for (const auto& t : c.body) {
      Binding bind = rbind;
      std::vector<VarId> aux;
      const bool to_row = rbind.contains(t.target);
      bind_bound(t.bound, to_row ? std::string() : t.target, col_, bind, aux);
      Add g = m_.apply(BinaryOp::Times, rowf, formula(t.guard, bind));
      g = m_.apply(BinaryOp::Times, g, validity(t.bound, bind));
      if (to_row) g = m_.apply(BinaryOp::Times, g, bits_equal(m_, col_, rbind.at(t.target)));
      Add term = m_.sum_abstract(m_.apply(BinaryOp::Times, g, expr(t.coef, bind)), aux);
      ab = m_.apply(BinaryOp::Plus, ab, term);
      std::vector<VarId> elim = concat(all_rows, aux);
      cols = m_.apply(BinaryOp::Max, cols, m_.max_abstract(m_.apply(BinaryOp::Times, sel, g), elim));
    }
    Add rhs = m_.apply(BinaryOp::Times, rowf, expr(c.rhs, rbind));
    if (c.sense == Sense::Le) {
      ab = m_.apply(BinaryOp::Times, m_.terminal(-1.0), ab);
      rhs = m_.apply(BinaryOp::Times, m_.terminal(-1.0), rhs);
    }
    a = m_.apply(BinaryOp::Plus, a, m_.apply(BinaryOp::Times, sel, ab));
    b = m_.apply(BinaryOp::Plus, b, m_.apply(BinaryOp::Times, sel, rhs));
  }

  Add formula(const FormulaPtr& g, const Binding& bind) {
    auto bits_of = [&](const std::string& name) -> const std::vector<VarId>& {
      auto it = bind.find(name);
      if (it == bind.end()) throw InvalidArgument("guard references unbound variable '" + name + "'");
      return it->second;
    };
    switch (g->kind) {
      case FormulaKind::True:
        return m_.one();
      case FormulaKind::False:
        return m_.zero();
      case FormulaKind::Bit:
        return m_.var(bits_of(g->var).at(static_cast<std::size_t>(g->bit)));
      case FormulaKind::Not:
        return m_.apply(BinaryOp::Minus, m_.one(), formula(g->lhs, bind));
      case FormulaKind::And:
        return m_.apply(BinaryOp::Times, formula(g->lhs, bind), formula(g->rhs, bind));
      case FormulaKind::Or:
        return m_.apply(BinaryOp::Max, formula(g->lhs, bind), formula(g->rhs, bind));
      case FormulaKind::EqVars:
        return bits_equal(m_, bits_of(g->var), bits_of(g->var2));
      case FormulaKind::EqConst:
        return index_cube(m_, bits_of(g->var), g->constant);
      case FormulaKind::Prop:
        throw UnsupportedStructure("open proposition " + to_string(g) + " cannot be compiled");
      default:
        throw InvalidArgument("formula is not quantifier-free");
    }
  }

  Add expr(const ExprPtr& e, const Binding& bind) {
    switch (e->kind) {
      case ExprKind::Number:
        return m_.terminal(e->value);
      case ExprKind::Add:
        return m_.apply(BinaryOp::Plus, expr(e->lhs, bind), expr(e->rhs, bind));
      case ExprKind::Sub:
        return m_.apply(BinaryOp::Minus, expr(e->lhs, bind), expr(e->rhs, bind));
      case ExprKind::Mul:
        return m_.apply(BinaryOp::Times, expr(e->lhs, bind), expr(e->rhs, bind));
      case ExprKind::Neg:
        return m_.apply(BinaryOp::Minus, m_.zero(), expr(e->lhs, bind));
      case ExprKind::Indicator:
        return formula(e->guard, bind);
    }
    return m_.zero();
  }

  const Foqp& f_;
  AddManager& m_;
  std::vector<VarId> blk_, row_, col_, colp_, aux_, row_bits_;
};

}  // namespace

QpStandard compile(const Foqp& f, AddManager& m) {
  if (!quantifier_free(f)) return Compiler(propositionalize(f), m).run();
  return Compiler(f, m).run();
}

QpStandard make_qp(AddManager& m, MatF a, VecF b, VecF c, MatF q, VecF row_mask, VecF ge_mask,
                   VecF col_mask, std::vector<VarId> colp_bits, std::size_t block_bits) {
  if (a.row_bits != b.bits || a.row_bits != row_mask.bits || a.row_bits != ge_mask.bits)
    throw DimensionError("row vectors must share the matrix row bits");
  if (a.col_bits != c.bits || a.col_bits != col_mask.bits || q.row_bits != a.col_bits || q.col_bits != colp_bits)
    throw DimensionError("column vectors must share the matrix column bits");
  if (a.fun.manager() != &m) throw InvalidArgument("parts belong to another manager");
  QpStandard qp;
  qp.row_bits = a.row_bits;
  qp.col_bits = a.col_bits;
  qp.colp_bits = std::move(colp_bits);
  qp.A = std::move(a);
  qp.b = std::move(b);
  qp.c = std::move(c);
  qp.Q = std::move(q);
  qp.row_mask = std::move(row_mask);
  qp.ge_mask = std::move(ge_mask);
  qp.col_mask = std::move(col_mask);
  qp.block_bits = block_bits;
  return qp;
}

bool QpStandard::has_rows() const { return row_mask.fun != manager().zero(); }

bool QpStandard::q_zero() const { return !q_factor && Q.fun == manager().zero(); }

bool QpStandard::q_diagonal() const {
  if (q_factor) return false;
  AddManager& m = manager();
  return m.apply(BinaryOp::Times, Q.fun, bits_equal(m, col_bits, colp_bits)) == Q.fun;
}

VecF QpStandard::q_diag() const {
  AddManager& m = manager();
  Add d = m.sum_abstract(m.apply(BinaryOp::Times, Q.fun, bits_equal(m, col_bits, colp_bits)), colp_bits);
  VecF out{d, col_bits, c.length};
  if (q_factor) {
    const MatF& f = q_factor->F;
    const MatF sq{m.apply(BinaryOp::Times, f.fun, f.fun), f.row_bits, f.col_bits, f.rows, f.cols};
    out = vec_add(out, matvec_t(sq, q_factor->weight));
  }
  return out;
}

VecF QpStandard::q_apply(const VecF& v) const {
  VecF out = matvec(Q, v);
  if (q_factor) {
    const MatF& f = q_factor->F;
    out = vec_add(out, matvec_t(f, vec_hadamard(q_factor->weight, matvec(f, v))));
  }
  return out;
}

std::uint64_t count_nonzeros(const MatF& a) {
  AddManager& m = a.manager();
  Add ind = m.map(a.fun, [](double x) { return x != 0.0 ? 1.0 : 0.0; });
  std::vector<VarId> all = concat(a.row_bits, a.col_bits);
  Add total = m.sum_abstract(ind, all);
  return static_cast<std::uint64_t>(m.value(total));
}

QpStats stats(const QpStandard& qp) {
  AddManager& m = qp.manager();
  QpStats s;
  s.vars = static_cast<std::uint64_t>(element_sum(qp.col_mask));
  s.constraints = static_cast<std::uint64_t>(element_sum(qp.row_mask));
  s.nnz_a = count_nonzeros(qp.A);
  s.nnz_q = count_nonzeros(qp.Q);
  s.add_nodes_a = m.node_count(qp.A.fun);
  std::vector<Add> qroots{qp.Q.fun};
  if (qp.q_factor) {
    qroots.push_back(qp.q_factor->F.fun);
    qroots.push_back(qp.q_factor->weight.fun);
  }
  s.add_nodes_q = m.node_count(qroots);
  std::vector<Add> roots{qp.A.fun, qp.b.fun, qp.c.fun};
  roots.insert(roots.end(), qroots.begin(), qroots.end());
  s.add_nodes_total = m.node_count(roots);
  s.rows = qp.A.rows;
  s.cols = qp.A.cols;
  return s;
}

std::string structure_json(const QpStandard& qp) {
  const QpStats s = stats(qp);
  AddManager& m = qp.manager();
  nlohmann::json j;
  j["rows"] = s.rows;
  j["cols"] = s.cols;
  j["active_rows"] = s.constraints;
  j["active_cols"] = s.vars;
  j["inequality_rows"] = static_cast<std::uint64_t>(element_sum(qp.ge_mask));
  j["block_bits"] = qp.block_bits;
  j["row_bits"] = qp.row_bits.size();
  j["col_bits"] = qp.col_bits.size();
  j["nnz_A"] = s.nnz_a;
  j["nnz_Q"] = s.nnz_q;
  j["nodes"] = {{"A", s.add_nodes_a},
                {"b", m.node_count(qp.b.fun)},
                {"c", m.node_count(qp.c.fun)},
                {"Q", s.add_nodes_q},
                {"row_mask", m.node_count(qp.row_mask.fun)},
                {"col_mask", m.node_count(qp.col_mask.fun)}};
  return j.dump(2);
}

}  // namespace symqp
