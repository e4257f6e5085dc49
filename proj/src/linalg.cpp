#include "symqp/linalg.hpp"

#include <absl/container/flat_hash_map.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

namespace symqp {

namespace {

constexpr std::uint32_t kTagContract = kClientTagBase;

std::vector<std::uint32_t> levels_of(std::span<const VarId> bits) {
  std::vector<std::uint32_t> out;
  out.reserve(bits.size());
  for (VarId v : bits) out.push_back(v.index);
  return out;
}

void require_sorted(std::span<const VarId> bits) {
  for (std::size_t i = 1; i < bits.size(); ++i)
    if (!(bits[i - 1] < bits[i]))
      throw InvalidArgument("index bits must be listed in increasing variable order");
}

void require_same_bits(const VecF& u, const VecF& v) {
  if (u.fun.manager() != v.fun.manager()) throw InvalidArgument("vectors from different managers");
  if (u.bits != v.bits) throw DimensionError("vector index bits differ");
}

VecF with_fun(const VecF& like, Add fun) { return VecF{std::move(fun), like.bits, like.length}; }

// Sum over the variables of `set` of a(.) * v(.): the matvec kernel. `pos` is
// the index of the first summed variable not yet handled.
NodeId contract_rec(AddManager& m, NodeId a, NodeId v, std::uint32_t set, std::size_t pos) {
  const NodeId zero = m.zero_id();
  if (a == zero || v == zero) return zero;
  const auto levels = m.varset_levels(set);
  const auto& na = m.node(a);
  const auto& nv = m.node(v);
  const bool ta = na.level == AddManager::kTerminalLevel;
  const bool tv = nv.level == AddManager::kTerminalLevel;
  if (ta && tv) {
    const double prod = na.value * nv.value;
    return m.make_terminal(std::ldexp(prod, static_cast<int>(levels.size() - pos)));
  }
  const CacheKey key{kTagContract, a, v, (set << 8) | static_cast<std::uint32_t>(pos)};
  if (auto hit = m.cache_find(key)) return *hit;

  const std::uint32_t top = std::min(na.level, nv.level);
  const NodeId ah = na.level == top ? na.hi : a;
  const NodeId al = na.level == top ? na.lo : a;
  const NodeId vh = nv.level == top ? nv.hi : v;
  const NodeId vl = nv.level == top ? nv.lo : v;
  std::size_t p = pos;
  while (p < levels.size() && levels[p] < top) ++p;
  const std::size_t skipped = p - pos;

  NodeId r;
  if (p < levels.size() && levels[p] == top) {
    const NodeId rh = contract_rec(m, ah, vh, set, p + 1);
    const NodeId rl = contract_rec(m, al, vl, set, p + 1);
    r = m.apply_id(BinaryOp::Plus, rh, rl);
  } else {
    const NodeId rh = contract_rec(m, ah, vh, set, p);
    const NodeId rl = contract_rec(m, al, vl, set, p);
    r = m.make_node(top, rh, rl);
  }
  if (skipped > 0) r = m.scale_id(r, std::ldexp(1.0, static_cast<int>(skipped)));
  m.cache_insert(key, r);
  return r;
}

Add contract(AddManager& m, const Add& a, const Add& v, std::span<const VarId> sum_bits) {
  const std::uint32_t set = m.intern_varset(sum_bits);
  if (set >= (1u << 24) || sum_bits.size() >= 256) throw InvalidArgument("too many summed bits");
  return m.wrap(contract_rec(m, a.id(), v.id(), set, 0));
}

using DotKey = std::tuple<NodeId, NodeId, std::uint32_t>;

double dot_rec(AddManager& m, NodeId a, NodeId b, std::span<const std::uint32_t> levels,
               std::size_t pos, absl::flat_hash_map<DotKey, double>& memo) {
  if (a == m.zero_id() || b == m.zero_id()) return 0.0;
  const auto& na = m.node(a);
  const auto& nb = m.node(b);
  const bool ta = na.level == AddManager::kTerminalLevel;
  const bool tb = nb.level == AddManager::kTerminalLevel;
  if (ta && tb) return std::ldexp(na.value * nb.value, static_cast<int>(levels.size() - pos));
  const DotKey key{a, b, static_cast<std::uint32_t>(pos)};
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  const std::uint32_t top = std::min(na.level, nb.level);
  std::size_t p = pos;
  while (p < levels.size() && levels[p] < top) ++p;
  if (p == levels.size() || levels[p] != top)
    throw DimensionError("vector depends on a variable outside its index bits");
  const NodeId ah = na.level == top ? na.hi : a;
  const NodeId al = na.level == top ? na.lo : a;
  const NodeId bh = nb.level == top ? nb.hi : b;
  const NodeId bl = nb.level == top ? nb.lo : b;
  double s = dot_rec(m, al, bl, levels, p + 1, memo) + dot_rec(m, ah, bh, levels, p + 1, memo);
  s = std::ldexp(s, static_cast<int>(p - pos));
  memo.emplace(key, s);
  return s;
}

// Memo over tuples of node ids stored back to back in an arena.
class TupleMemo {
 public:
  explicit TupleMemo(std::size_t width) : width_(width), index_(16, Hash{this}, Eq{this}) {}

  const NodeId* find(const NodeId* key, std::size_t& slot) {
    scratch_.assign(key, key + width_);
    auto it = index_.find(kScratch);
    if (it == index_.end()) return nullptr;
    slot = it->second;
    return key;
  }
  void insert(const NodeId* key, std::size_t slot) {
    const auto off = static_cast<std::uint32_t>(arena_.size() / width_);
    arena_.insert(arena_.end(), key, key + width_);
    index_.emplace(off, slot);
  }

 private:
  static constexpr std::uint32_t kScratch = std::numeric_limits<std::uint32_t>::max();
  const NodeId* at(std::uint32_t i) const { return i == kScratch ? scratch_.data() : arena_.data() + std::size_t{i} * width_; }
  struct Hash {
    const TupleMemo* t;
    std::size_t operator()(std::uint32_t i) const {
      const NodeId* p = t->at(i);
      std::uint64_t h = t->width_;
      for (std::size_t j = 0; j < t->width_; ++j) h = mix_words(h, p[j]);
      return static_cast<std::size_t>(h);
    }
  };
  struct Eq {
    const TupleMemo* t;
    bool operator()(std::uint32_t a, std::uint32_t b) const {
      return std::equal(t->at(a), t->at(a) + t->width_, t->at(b));
    }
  };
  std::size_t width_;
  std::vector<NodeId> arena_;
  std::vector<NodeId> scratch_;
  absl::flat_hash_map<std::uint32_t, std::size_t, Hash, Eq> index_;
};

NodeId lincomb_rec(AddManager& m, std::span<const double> k, std::vector<NodeId>& stack, std::size_t base,
                   TupleMemo& memo) {
  const std::size_t w = k.size();
  const NodeId* ids = stack.data() + base;
  std::uint32_t top = AddManager::kTerminalLevel;
  for (std::size_t j = 0; j < w; ++j) top = std::min(top, m.node(ids[j]).level);
  if (top == AddManager::kTerminalLevel) {
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) s += k[j] * m.node(ids[j]).value;
    return m.make_terminal(s);
  }
  std::size_t slot = 0;
  if (memo.find(ids, slot)) return static_cast<NodeId>(slot);
  NodeId res[2];
  for (int b = 0; b < 2; ++b) {
    const std::size_t child = stack.size();
    stack.resize(child + w);
    for (std::size_t j = 0; j < w; ++j) {
      const auto& n = m.node(stack[base + j]);
      stack[child + j] = n.level == top ? (b ? n.hi : n.lo) : stack[base + j];
    }
    res[b] = lincomb_rec(m, k, stack, child, memo);
    stack.resize(child);
  }
  const NodeId r = m.make_node(top, res[1], res[0]);
  memo.insert(stack.data() + base, r);
  return r;
}

void dots_rec(AddManager& m, std::vector<NodeId>& stack, std::size_t base, std::size_t w,
              std::span<const std::uint32_t> levels, std::size_t pos, std::vector<double>& out,
              std::size_t out_base, TupleMemo& memo, std::vector<double>& values) {
  const NodeId* ids = stack.data() + base;
  if (ids[0] == m.zero_id()) {
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(out_base), w - 1, 0.0);
    return;
  }
  std::uint32_t top = AddManager::kTerminalLevel;
  for (std::size_t j = 0; j < w; ++j) top = std::min(top, m.node(ids[j]).level);
  if (top == AddManager::kTerminalLevel) {
    const double v = m.node(ids[0]).value;
    for (std::size_t j = 1; j < w; ++j)
      out[out_base + j - 1] = std::ldexp(v * m.node(ids[j]).value, static_cast<int>(levels.size() - pos));
    return;
  }
  std::size_t slot = 0;
  if (memo.find(ids, slot)) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(slot), w - 1,
                out.begin() + static_cast<std::ptrdiff_t>(out_base));
    return;
  }
  std::size_t p = pos;
  while (p < levels.size() && levels[p] < top) ++p;
  if (p == levels.size() || levels[p] != top) throw DimensionError("vector depends on a variable outside its index bits");
  const std::size_t sub = out.size();
  out.resize(sub + 2 * (w - 1));
  for (int b = 0; b < 2; ++b) {
    const std::size_t child = stack.size();
    stack.resize(child + w);
    for (std::size_t j = 0; j < w; ++j) {
      const auto& n = m.node(stack[base + j]);
      stack[child + j] = n.level == top ? (b ? n.hi : n.lo) : stack[base + j];
    }
    dots_rec(m, stack, child, w, levels, p + 1, out, sub + static_cast<std::size_t>(b) * (w - 1), memo, values);
    stack.resize(child);
  }
  const std::size_t vslot = values.size();
  for (std::size_t j = 0; j + 1 < w; ++j) {
    const double s = std::ldexp(out[sub + j] + out[sub + (w - 1) + j], static_cast<int>(p - pos));
    out[out_base + j] = s;
    values.push_back(s);
  }
  out.resize(sub);
  memo.insert(stack.data() + base, vslot);
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " overflowed");
  return v;
}

}  // namespace

// ---- construction ---------------------------------------------------------

std::vector<VarId> named_bits(AddManager& m, const std::string& prefix, std::size_t count) {
  std::vector<VarId> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(m.named_var(prefix + std::to_string(i)));
  return out;
}

VecF constant_vec(AddManager& m, std::span<const VarId> bits, double value) {
  require_sorted(bits);
  return VecF{m.terminal(value), {bits.begin(), bits.end()}, std::uint64_t{1} << bits.size()};
}

VecF zero_vec(AddManager& m, std::span<const VarId> bits) { return constant_vec(m, bits, 0.0); }

Add index_cube(AddManager& m, std::span<const VarId> bits, std::uint64_t index) {
  require_sorted(bits);
  const std::size_t n = bits.size();
  if (n < 64 && index >= (std::uint64_t{1} << n)) throw DimensionError("index out of range");
  NodeId f = m.one_id();
  for (std::size_t k = n; k-- > 0;) {
    const bool bit = (index >> (n - 1 - k)) & 1u;
    f = bit ? m.make_node(bits[k].index, f, m.zero_id()) : m.make_node(bits[k].index, m.zero_id(), f);
  }
  return m.wrap(f);
}

VecF unit_vec(AddManager& m, std::span<const VarId> bits, std::uint64_t index) {
  return VecF{index_cube(m, bits, index), {bits.begin(), bits.end()}, std::uint64_t{1} << bits.size()};
}

VecF vec_from_dense(AddManager& m, std::span<const VarId> bits, std::span<const double> values) {
  require_sorted(bits);
  const std::size_t n = bits.size();
  const std::uint64_t size = std::uint64_t{1} << n;
  if (values.size() > size) throw DimensionError("vector longer than its index space");
  std::function<NodeId(std::size_t, std::uint64_t)> build = [&](std::size_t k,
                                                                std::uint64_t offset) -> NodeId {
    if (k == n) return m.make_terminal(offset < values.size() ? values[offset] : 0.0);
    const std::uint64_t half = std::uint64_t{1} << (n - 1 - k);
    if (offset >= values.size()) return m.zero_id();
    const NodeId hi = build(k + 1, offset + half);
    const NodeId lo = build(k + 1, offset);
    return m.make_node(bits[k].index, hi, lo);
  };
  return VecF{m.wrap(build(0, 0)), {bits.begin(), bits.end()}, values.size()};
}

std::vector<double> vec_to_dense(const VecF& v) {
  AddManager& m = v.manager();
  const std::size_t n = v.bits.size();
  std::vector<double> out(v.padded_length(), 0.0);
  std::function<void(NodeId, std::size_t, std::uint64_t)> expand = [&](NodeId f, std::size_t k,
                                                                       std::uint64_t offset) {
    const auto& nd = m.node(f);
    if (k == n) {
      if (nd.level != AddManager::kTerminalLevel)
        throw DimensionError("vector depends on a variable outside its index bits");
      out[offset] = nd.value;
      return;
    }
    if (f == m.zero_id()) return;
    const std::uint64_t half = std::uint64_t{1} << (n - 1 - k);
    if (nd.level < v.bits[k].index) throw DimensionError("vector depends on a foreign variable");
    if (nd.level == v.bits[k].index) {
      const NodeId hi = nd.hi, lo = nd.lo;
      expand(lo, k + 1, offset);
      expand(hi, k + 1, offset + half);
    } else {
      expand(f, k + 1, offset);
      expand(f, k + 1, offset + half);
    }
  };
  expand(v.fun.id(), 0, 0);
  out.resize(v.length);
  return out;
}

double vec_at(const VecF& v, std::uint64_t index) {
  if (index >= v.padded_length()) throw DimensionError("index out of range");
  AddManager& m = v.manager();
  const std::size_t n = v.bits.size();
  NodeId f = v.fun.id();
  std::size_t k = 0;
  while (!m.terminal_id(f)) {
    const auto& nd = m.node(f);
    while (k < n && v.bits[k].index < nd.level) ++k;
    if (k == n || v.bits[k].index != nd.level)
      throw DimensionError("vector depends on a variable outside its index bits");
    f = ((index >> (n - 1 - k)) & 1u) ? nd.hi : nd.lo;
  }
  return m.node(f).value;
}

MatF mat_from_dense(AddManager& m, std::span<const VarId> row_bits, std::span<const VarId> col_bits,
                    const Eigen::MatrixXd& dense) {
  require_sorted(row_bits);
  require_sorted(col_bits);
  const std::size_t nr = row_bits.size(), nc = col_bits.size();
  if (static_cast<std::uint64_t>(dense.rows()) > (std::uint64_t{1} << nr) ||
      static_cast<std::uint64_t>(dense.cols()) > (std::uint64_t{1} << nc))
    throw DimensionError("dense matrix larger than its index space");

  struct Bit {
    std::uint32_t level;
    bool row;
    std::uint64_t weight;
  };
  std::vector<Bit> merged;
  for (std::size_t i = 0; i < nr; ++i)
    merged.push_back({row_bits[i].index, true, std::uint64_t{1} << (nr - 1 - i)});
  for (std::size_t i = 0; i < nc; ++i)
    merged.push_back({col_bits[i].index, false, std::uint64_t{1} << (nc - 1 - i)});
  std::sort(merged.begin(), merged.end(), [](const Bit& a, const Bit& b) { return a.level < b.level; });
  for (std::size_t i = 1; i < merged.size(); ++i)
    if (merged[i].level == merged[i - 1].level) throw InvalidArgument("row and column bits overlap");

  const auto rows = static_cast<std::uint64_t>(dense.rows());
  const auto cols = static_cast<std::uint64_t>(dense.cols());
  std::function<NodeId(std::size_t, std::uint64_t, std::uint64_t)> build =
      [&](std::size_t k, std::uint64_t r, std::uint64_t c) -> NodeId {
    if (r >= rows || c >= cols) return m.zero_id();
    if (k == merged.size()) return m.make_terminal(dense(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    const Bit& b = merged[k];
    const NodeId hi = build(k + 1, r + (b.row ? b.weight : 0), c + (b.row ? 0 : b.weight));
    const NodeId lo = build(k + 1, r, c);
    return m.make_node(b.level, hi, lo);
  };
  return MatF{m.wrap(build(0, 0, 0)), {row_bits.begin(), row_bits.end()},
              {col_bits.begin(), col_bits.end()}, rows, cols};
}

Eigen::MatrixXd mat_to_dense(const MatF& a) {
  AddManager& m = a.manager();
  const std::size_t nr = a.row_bits.size(), nc = a.col_bits.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(std::uint64_t{1} << nr),
                                              static_cast<Eigen::Index>(std::uint64_t{1} << nc));
  struct Bit {
    std::uint32_t level;
    bool row;
    std::uint64_t weight;
  };
  std::vector<Bit> merged;
  for (std::size_t i = 0; i < nr; ++i)
    merged.push_back({a.row_bits[i].index, true, std::uint64_t{1} << (nr - 1 - i)});
  for (std::size_t i = 0; i < nc; ++i)
    merged.push_back({a.col_bits[i].index, false, std::uint64_t{1} << (nc - 1 - i)});
  std::sort(merged.begin(), merged.end(), [](const Bit& x, const Bit& y) { return x.level < y.level; });

  std::function<void(NodeId, std::size_t, std::uint64_t, std::uint64_t)> expand =
      [&](NodeId f, std::size_t k, std::uint64_t r, std::uint64_t c) {
        if (f == m.zero_id()) return;
        const auto& nd = m.node(f);
        if (k == merged.size()) {
          if (nd.level != AddManager::kTerminalLevel)
            throw DimensionError("matrix depends on a variable outside its index bits");
          out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = nd.value;
          return;
        }
        const Bit& b = merged[k];
        if (nd.level < b.level) throw DimensionError("matrix depends on a foreign variable");
        const std::uint64_t rh = r + (b.row ? b.weight : 0), ch = c + (b.row ? 0 : b.weight);
        if (nd.level == b.level) {
          const NodeId hi = nd.hi, lo = nd.lo;
          expand(lo, k + 1, r, c);
          expand(hi, k + 1, rh, ch);
        } else {
          expand(f, k + 1, r, c);
          expand(f, k + 1, rh, ch);
        }
      };
  expand(a.fun.id(), 0, 0, 0);
  return out.topLeftCorner(static_cast<Eigen::Index>(a.rows), static_cast<Eigen::Index>(a.cols));
}

Add bits_equal(AddManager& m, std::span<const VarId> a, std::span<const VarId> b) {
  if (a.size() != b.size()) throw DimensionError("bit lists of different length");
  Add f = m.one();
  for (std::size_t k = a.size(); k-- > 0;) {
    Add xb = m.var(b[k]);
    Add same = m.ite_var(a[k], xb, m.apply(BinaryOp::Minus, m.one(), xb));
    f = m.apply(BinaryOp::Times, same, f);
  }
  return f;
}

MatF identity(AddManager& m, std::span<const VarId> row_bits, std::span<const VarId> col_bits) {
  require_sorted(row_bits);
  require_sorted(col_bits);
  const std::uint64_t n = std::uint64_t{1} << row_bits.size();
  return MatF{bits_equal(m, row_bits, col_bits), {row_bits.begin(), row_bits.end()},
              {col_bits.begin(), col_bits.end()}, n, n};
}

MatF walsh(AddManager& m, std::span<const VarId> row_bits, std::span<const VarId> col_bits) {
  if (row_bits.size() != col_bits.size()) throw DimensionError("Walsh matrix must be square");
  require_sorted(row_bits);
  require_sorted(col_bits);
  Add f = m.one();
  Add minus_one = m.terminal(-1.0);
  for (std::size_t k = row_bits.size(); k-- > 0;) {
    // (-1)^(r_k c_k)
    Add both = m.apply(BinaryOp::Times, m.var(row_bits[k]), m.var(col_bits[k]));
    Add sign = m.ite(both, minus_one, m.one());
    f = m.apply(BinaryOp::Times, sign, f);
  }
  const std::uint64_t n = std::uint64_t{1} << row_bits.size();
  return MatF{f, {row_bits.begin(), row_bits.end()}, {col_bits.begin(), col_bits.end()}, n, n};
}

// ---- products -------------------------------------------------------------

VecF matvec(const MatF& a, const VecF& v) {
  if (v.bits.size() != a.col_bits.size()) throw DimensionError("matvec: column count mismatch");
  const VecF& w = v.bits == a.col_bits ? v : rename(v, a.col_bits);
  AddManager& m = a.manager();
  return VecF{contract(m, a.fun, w.fun, a.col_bits), a.row_bits, a.rows};
}

VecF matvec_t(const MatF& a, const VecF& v) {
  if (v.bits.size() != a.row_bits.size()) throw DimensionError("matvec_t: row count mismatch");
  const VecF& w = v.bits == a.row_bits ? v : rename(v, a.row_bits);
  AddManager& m = a.manager();
  return VecF{contract(m, a.fun, w.fun, a.row_bits), a.col_bits, a.cols};
}

VecF row_extract(const MatF& a, std::uint64_t i) {
  if (i >= a.rows) throw DimensionError("row index out of range");
  const std::size_t n = a.row_bits.size();
  std::vector<std::pair<VarId, bool>> lits;
  lits.reserve(n);
  for (std::size_t k = 0; k < n; ++k) lits.emplace_back(a.row_bits[k], ((i >> (n - 1 - k)) & 1u) != 0);
  AddManager& m = a.manager();
  return VecF{m.restrict(a.fun, lits), a.col_bits, a.cols};
}

MatF matmat(const MatF& a, const MatF& b) {
  if (a.col_bits.size() != b.row_bits.size()) throw DimensionError("matmat: inner dimension mismatch");
  AddManager& m = a.manager();
  Add bf = b.fun;
  if (a.col_bits != b.row_bits) {
    std::vector<std::pair<VarId, VarId>> map;
    for (std::size_t i = 0; i < a.col_bits.size(); ++i) map.emplace_back(b.row_bits[i], a.col_bits[i]);
    bf = m.permute(b.fun, map);
  }
  return MatF{contract(m, a.fun, bf, a.col_bits), a.row_bits, b.col_bits, a.rows, b.cols};
}

// ---- termwise -------------------------------------------------------------

VecF vec_add(const VecF& u, const VecF& v) {
  require_same_bits(u, v);
  return with_fun(u, u.manager().apply(BinaryOp::Plus, u.fun, v.fun));
}

VecF vec_sub(const VecF& u, const VecF& v) {
  require_same_bits(u, v);
  return with_fun(u, u.manager().apply(BinaryOp::Minus, u.fun, v.fun));
}

VecF vec_hadamard(const VecF& u, const VecF& v) {
  require_same_bits(u, v);
  return with_fun(u, u.manager().apply(BinaryOp::Times, u.fun, v.fun));
}

VecF scalar_mul(double k, const VecF& v) {
  AddManager& m = v.manager();
  return with_fun(v, m.apply(BinaryOp::Times, m.terminal(k), v.fun));
}

VecF axpy(double k, const VecF& u, const VecF& v) {
  require_same_bits(u, v);
  AddManager& m = u.manager();
  if (k == 0.0) return v;
  return with_fun(v, m.axpy(k, u.fun, v.fun));
}

VecF lincomb(std::span<const double> k, std::span<const VecF> vs) {
  if (k.size() != vs.size() || vs.empty()) throw DimensionError("lincomb needs one coefficient per vector");
  for (const VecF& v : vs) require_same_bits(vs[0], v);
  AddManager& m = vs[0].manager();
  std::vector<NodeId> stack;
  for (const VecF& v : vs) stack.push_back(v.fun.id());
  TupleMemo memo(vs.size());
  return with_fun(vs[0], m.wrap(lincomb_rec(m, k, stack, 0, memo)));
}

VecF map_elements(const std::function<double(double)>& w, const VecF& v) {
  return with_fun(v, v.manager().map(v.fun, w));
}

VecF rename(const VecF& v, std::span<const VarId> bits) {
  if (bits.size() != v.bits.size()) throw DimensionError("rename: bit count mismatch");
  require_sorted(bits);
  std::vector<std::pair<VarId, VarId>> map;
  for (std::size_t i = 0; i < bits.size(); ++i) map.emplace_back(v.bits[i], bits[i]);
  return VecF{v.manager().permute(v.fun, map), {bits.begin(), bits.end()}, v.length};
}

// ---- reductions -----------------------------------------------------------

double element_sum(const VecF& v) {
  AddManager& m = v.manager();
  const auto levels = levels_of(v.bits);
  absl::flat_hash_map<DotKey, double> memo;
  return checked(dot_rec(m, v.fun.id(), m.one_id(), levels, 0, memo), "element sum");
}

double dot(const VecF& u, const VecF& v) {
  require_same_bits(u, v);
  AddManager& m = u.manager();
  const auto levels = levels_of(u.bits);
  absl::flat_hash_map<DotKey, double> memo;
  return checked(dot_rec(m, u.fun.id(), v.fun.id(), levels, 0, memo), "dot product");
}

std::vector<double> dots(const VecF& v, std::span<const VecF> us) {
  if (us.empty()) return {};
  for (const VecF& u : us) require_same_bits(v, u);
  AddManager& m = v.manager();
  const auto levels = levels_of(v.bits);
  std::vector<NodeId> stack{v.fun.id()};
  for (const VecF& u : us) stack.push_back(u.fun.id());
  const std::size_t w = stack.size();
  TupleMemo memo(w);
  std::vector<double> out(w - 1), values;
  dots_rec(m, stack, 0, w, levels, 0, out, 0, memo, values);
  for (double& d : out) d = checked(d, "dot product");
  return out;
}

double norm2_sq(const VecF& v) { return dot(v, v); }

double norm2(const VecF& v) { return std::sqrt(norm2_sq(v)); }

double norm_inf(const VecF& v) {
  AddManager& m = v.manager();
  return std::max(std::abs(m.min_value(v.fun)), std::abs(m.max_value(v.fun)));
}

// ---- diagonals ------------------------------------------------------------

VecF diag_apply(const DiagF& d, const VecF& v) { return vec_hadamard(d.diag, v); }

DiagF diag_reciprocal(const DiagF& d) {
  return DiagF{map_elements(
      [](double x) {
        if (x == 0.0) throw SingularError("zero diagonal entry");
        return 1.0 / x;
      },
      d.diag)};
}

// ---- text IO --------------------------------------------------------------

void write_dense(std::ostream& os, const Eigen::MatrixXd& mat) {
  const auto old = os.precision(17);
  for (Eigen::Index r = 0; r < mat.rows(); ++r) {
    for (Eigen::Index c = 0; c < mat.cols(); ++c) {
      if (c) os << ' ';
      os << mat(r, c);
    }
    os << '\n';
  }
  os.precision(old);
}

Eigen::MatrixXd read_dense(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double x;
    while (ls >> x) row.push_back(x);
    if (!ls.eof()) throw InvalidArgument("non-numeric token in dense matrix");
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw DimensionError("ragged dense matrix");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.empty() ? 0 : rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return out;
}

}  // namespace symqp
