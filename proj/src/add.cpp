#include "symqp/add.hpp"

#include <absl/container/flat_hash_set.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace symqp {

namespace {

enum CacheTag : std::uint32_t {
  kTagApply = 1,  // + BinaryOp
  kTagIte = 16,
  kTagCofactor,
  kTagSumAbstract,
  kTagMaxAbstract,
  kTagAxpy,
};

constexpr std::uint32_t kFreeLevel = AddManager::kTerminalLevel - 1;

bool commutative(BinaryOp op) {
  return op == BinaryOp::Plus || op == BinaryOp::Times || op == BinaryOp::Min ||
         op == BinaryOp::Max;
}

double combine(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::Plus:
      return a + b;
    case BinaryOp::Minus:
      return a - b;
    case BinaryOp::Times:
      return a * b;
    case BinaryOp::Min:
      return std::min(a, b);
    case BinaryOp::Max:
      return std::max(a, b);
    case BinaryOp::Divide:
      if (b == 0.0) throw SingularError("division by zero terminal");
      return a / b;
  }
  return 0.0;
}

}  // namespace

// ---- Add handle -----------------------------------------------------------

Add::Add(AddManager* m, NodeId id) : mgr_(m), id_(id) { mgr_->ref(id_); }

Add::Add(const Add& o) : mgr_(o.mgr_), id_(o.id_) {
  if (mgr_) mgr_->ref(id_);
}

Add::Add(Add&& o) noexcept : mgr_(o.mgr_), id_(o.id_) {
  o.mgr_ = nullptr;
  o.id_ = kNoNode;
}

Add& Add::operator=(const Add& o) {
  if (this != &o) {
    if (o.mgr_) o.mgr_->ref(o.id_);
    release();
    mgr_ = o.mgr_;
    id_ = o.id_;
  }
  return *this;
}

Add& Add::operator=(Add&& o) noexcept {
  if (this != &o) {
    release();
    mgr_ = o.mgr_;
    id_ = o.id_;
    o.mgr_ = nullptr;
    o.id_ = kNoNode;
  }
  return *this;
}

Add::~Add() { release(); }

void Add::release() {
  if (mgr_) mgr_->deref(id_);
  mgr_ = nullptr;
  id_ = kNoNode;
}

// ---- manager --------------------------------------------------------------

AddManager::AddManager(std::size_t num_vars) {
  zero_ = make_terminal(0.0);
  one_ = make_terminal(1.0);
  ref(zero_);
  ref(one_);
  for (std::size_t i = 0; i < num_vars; ++i) new_var();
}

AddManager::~AddManager() = default;

VarId AddManager::new_var(std::string name) {
  VarId v{static_cast<std::uint32_t>(var_names_.size())};
  if (name.empty()) name = "v" + std::to_string(v.index);
  if (var_by_name_.contains(name)) throw InvalidArgument("duplicate variable name '" + name + "'");
  var_by_name_.emplace(name, v);
  var_names_.push_back(std::move(name));
  return v;
}

VarId AddManager::named_var(const std::string& name) {
  if (auto it = var_by_name_.find(name); it != var_by_name_.end()) return it->second;
  return new_var(name);
}

std::optional<VarId> AddManager::find_var(std::string_view name) const {
  if (auto it = var_by_name_.find(std::string(name)); it != var_by_name_.end()) return it->second;
  return std::nullopt;
}

const std::string& AddManager::var_name(VarId v) const {
  if (v.index >= var_names_.size()) throw InvalidArgument("unregistered variable");
  return var_names_[v.index];
}

NodeId AddManager::alloc(const Node& n) {
  if (!free_.empty()) {
    NodeId id = free_.back();
    free_.pop_back();
    nodes_[id] = n;
    refs_[id] = 0;
    return id;
  }
  nodes_.push_back(n);
  refs_.push_back(0);
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId AddManager::make_terminal(double v) {
  if (!std::isfinite(v)) throw NumericError("non-finite terminal value");
  if (v == 0.0) v = 0.0;  // fold -0.0 into +0.0
  const auto bits = std::bit_cast<std::uint64_t>(v);
  auto it = terminals_.lazy_emplace(
      bits, [&](const auto& ctor) { ctor(bits, alloc(Node{v, kTerminalLevel, kNoNode, kNoNode})); });
  return it->second;
}

NodeId AddManager::make_node(std::uint32_t level, NodeId hi, NodeId lo) {
  if (hi == lo) return hi;
  const UniqueKey key{level, hi, lo};
  auto it = unique_.lazy_emplace(key, [&](const auto& ctor) { ctor(key, alloc(Node{0.0, level, hi, lo})); });
  return it->second;
}

void AddManager::check_owner(const Add& f) const {
  if (f.manager() != this) throw InvalidArgument("handle belongs to a different manager");
}

Add AddManager::terminal(double v) { return wrap(make_terminal(v)); }

Add AddManager::var(VarId x) {
  if (x.index >= var_count()) throw InvalidArgument("unregistered variable");
  return wrap(make_node(x.index, one_, zero_));
}

Add AddManager::ite_var(VarId x, const Add& hi, const Add& lo) {
  check_owner(hi);
  check_owner(lo);
  if (x.index >= var_count()) throw InvalidArgument("unregistered variable");
  const auto& h = node(hi.id());
  const auto& l = node(lo.id());
  if (x.index < h.level && x.index < l.level) return wrap(make_node(x.index, hi.id(), lo.id()));
  return wrap(ite_id(make_node(x.index, one_, zero_), hi.id(), lo.id()));
}

Add AddManager::ite(const Add& cond, const Add& g, const Add& h) {
  check_owner(cond);
  check_owner(g);
  check_owner(h);
  return wrap(ite_id(cond.id(), g.id(), h.id()));
}

// ---- cache ----------------------------------------------------------------

std::optional<NodeId> AddManager::cache_find(const CacheKey& key) {
  if (!cache_enabled_) return std::nullopt;
  if (cache_capacity_ == 0) {
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    return std::nullopt;
  }
  auto it = lru_index_.find(key);
  if (it == lru_index_.end()) return std::nullopt;
  lru_.splice(lru_.begin(), lru_, it->second);
  return it->second->second;
}

void AddManager::cache_insert(const CacheKey& key, NodeId result) {
  if (!cache_enabled_) return;
  if (cache_capacity_ == 0) {
    cache_.insert_or_assign(key, result);
    return;
  }
  if (auto it = lru_index_.find(key); it != lru_index_.end()) {
    it->second->second = result;
    lru_.splice(lru_.begin(), lru_, it->second);
    return;
  }
  lru_.emplace_front(key, result);
  lru_index_.emplace(key, lru_.begin());
  while (lru_.size() > cache_capacity_) {
    lru_index_.erase(lru_.back().first);
    lru_.pop_back();
  }
}

void AddManager::clear_cache() {
  const std::size_t used = cache_.size();
  cache_.clear();
  if (cache_capacity_ == 0) cache_.reserve(std::min<std::size_t>(used, std::size_t{1} << 24));
  lru_.clear();
  lru_index_.clear();
}

void AddManager::set_cache_capacity(std::size_t capacity) {
  clear_cache();
  cache_capacity_ = capacity;
}

std::size_t AddManager::cache_size() const {
  return cache_capacity_ == 0 ? cache_.size() : lru_.size();
}

std::uint32_t AddManager::intern_varset(std::span<const VarId> vars) {
  std::vector<std::uint32_t> levels;
  levels.reserve(vars.size());
  for (VarId v : vars) {
    if (v.index >= var_count()) throw InvalidArgument("unregistered variable");
    levels.push_back(v.index);
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (auto it = varset_index_.find(levels); it != varset_index_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(varsets_.size());
  varset_index_.emplace(levels, id);
  varsets_.push_back(std::move(levels));
  return id;
}

std::span<const std::uint32_t> AddManager::varset_levels(std::uint32_t id) const {
  return varsets_.at(id);
}

// ---- apply / ite ----------------------------------------------------------

NodeId AddManager::apply_id(BinaryOp op, NodeId f, NodeId g) {
  const Node& nf = nodes_[f];
  const Node& ng = nodes_[g];
  const bool tf = nf.level == kTerminalLevel;
  const bool tg = ng.level == kTerminalLevel;
  if (tf && tg) return make_terminal(combine(op, nf.value, ng.value));

  switch (op) {
    case BinaryOp::Plus:
      if (f == zero_) return g;
      if (g == zero_) return f;
      break;
    case BinaryOp::Minus:
      if (g == zero_) return f;
      if (f == g) return zero_;
      break;
    case BinaryOp::Times:
      if (f == zero_ || g == zero_) return zero_;
      if (f == one_) return g;
      if (g == one_) return f;
      break;
    case BinaryOp::Min:
    case BinaryOp::Max:
      if (f == g) return f;
      break;
    case BinaryOp::Divide:
      if (g == one_) return f;
      break;
  }

  if (commutative(op) && f > g) std::swap(f, g);
  const CacheKey key{kTagApply + static_cast<std::uint32_t>(op), f, g, 0};
  if (auto hit = cache_find(key)) return *hit;

  const std::uint32_t lf = nodes_[f].level;
  const std::uint32_t lg = nodes_[g].level;
  const std::uint32_t top = std::min(lf, lg);
  const NodeId fh = lf == top ? nodes_[f].hi : f;
  const NodeId fl = lf == top ? nodes_[f].lo : f;
  const NodeId gh = lg == top ? nodes_[g].hi : g;
  const NodeId gl = lg == top ? nodes_[g].lo : g;
  const NodeId hi = apply_id(op, fh, gh);
  const NodeId lo = apply_id(op, fl, gl);
  const NodeId r = make_node(top, hi, lo);
  cache_insert(key, r);
  return r;
}

NodeId AddManager::axpy_id(NodeId k, NodeId f, NodeId g) {
  if (f == zero_ || k == zero_) return g;
  if (g == zero_) return apply_id(BinaryOp::Times, k, f);
  const Node& nf = nodes_[f];
  const Node& ng = nodes_[g];
  if (nf.level == kTerminalLevel && ng.level == kTerminalLevel)
    return make_terminal(nodes_[k].value * nf.value + ng.value);
  const CacheKey key{kTagAxpy, f, g, k};
  if (auto hit = cache_find(key)) return *hit;
  const std::uint32_t lf = nf.level;
  const std::uint32_t lg = ng.level;
  const std::uint32_t top = std::min(lf, lg);
  const NodeId fh = lf == top ? nf.hi : f;
  const NodeId fl = lf == top ? nf.lo : f;
  const NodeId gh = lg == top ? ng.hi : g;
  const NodeId gl = lg == top ? ng.lo : g;
  const NodeId hi = axpy_id(k, fh, gh);
  const NodeId lo = axpy_id(k, fl, gl);
  const NodeId r = make_node(top, hi, lo);
  cache_insert(key, r);
  return r;
}

NodeId AddManager::ite_id(NodeId c, NodeId g, NodeId h) {
  if (c == one_) return g;
  if (c == zero_) return h;
  if (nodes_[c].level == kTerminalLevel) throw InvalidArgument("ite condition must be 0/1 valued");
  if (g == h) return g;
  if (g == one_ && h == zero_) return c;

  const CacheKey key{kTagIte, c, g, h};
  if (auto hit = cache_find(key)) return *hit;
  const std::uint32_t top = std::min({nodes_[c].level, nodes_[g].level, nodes_[h].level});
  auto split = [&](NodeId x, bool hi) {
    const Node& n = nodes_[x];
    if (n.level != top) return x;
    return hi ? n.hi : n.lo;
  };
  const NodeId rh = ite_id(split(c, true), split(g, true), split(h, true));
  const NodeId rl = ite_id(split(c, false), split(g, false), split(h, false));
  const NodeId r = make_node(top, rh, rl);
  cache_insert(key, r);
  return r;
}

Add AddManager::axpy(double k, const Add& f, const Add& g) {
  check_owner(f);
  check_owner(g);
  const Add kt = terminal(k);
  return wrap(axpy_id(kt.id(), f.id(), g.id()));
}

Add AddManager::apply(BinaryOp op, const Add& f, const Add& g) {
  check_owner(f);
  check_owner(g);
  return wrap(apply_id(op, f.id(), g.id()));
}

Add AddManager::apply(const std::function<double(double, double)>& fn, const Add& f, const Add& g) {
  check_owner(f);
  check_owner(g);
  absl::flat_hash_map<std::uint64_t, NodeId> memo;
  std::function<NodeId(NodeId, NodeId)> rec = [&](NodeId a, NodeId b) -> NodeId {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.level == kTerminalLevel && nb.level == kTerminalLevel)
      return make_terminal(fn(na.value, nb.value));
    const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const std::uint32_t top = std::min(na.level, nb.level);
    const NodeId ah = na.level == top ? na.hi : a;
    const NodeId al = na.level == top ? na.lo : a;
    const NodeId bh = nb.level == top ? nb.hi : b;
    const NodeId bl = nb.level == top ? nb.lo : b;
    const NodeId hi = rec(ah, bh);
    const NodeId lo = rec(al, bl);
    const NodeId r = make_node(top, hi, lo);
    memo.emplace(key, r);
    return r;
  };
  return wrap(rec(f.id(), g.id()));
}

Add AddManager::map(const Add& f, const std::function<double(double)>& fn) {
  check_owner(f);
  absl::flat_hash_map<NodeId, NodeId> memo;
  std::function<NodeId(NodeId)> rec = [&](NodeId a) -> NodeId {
    const Node& na = nodes_[a];
    if (na.level == kTerminalLevel) return make_terminal(fn(na.value));
    if (auto it = memo.find(a); it != memo.end()) return it->second;
    const std::uint32_t level = na.level;
    const NodeId hi_child = na.hi;
    const NodeId lo_child = na.lo;
    const NodeId hi = rec(hi_child);
    const NodeId lo = rec(lo_child);
    const NodeId r = make_node(level, hi, lo);
    memo.emplace(a, r);
    return r;
  };
  return wrap(rec(f.id()));
}

// ---- cofactor / abstraction / permutation ---------------------------------

NodeId AddManager::cofactor_rec(NodeId f, std::uint32_t level, bool bit) {
  const Node& n = nodes_[f];
  if (n.level > level) return f;  // terminals included
  if (n.level == level) return bit ? n.hi : n.lo;
  const CacheKey key{kTagCofactor, f, level, bit ? 1u : 0u};
  if (auto hit = cache_find(key)) return *hit;
  const std::uint32_t lv = n.level;
  const NodeId h = n.hi;
  const NodeId l = n.lo;
  const NodeId rh = cofactor_rec(h, level, bit);
  const NodeId rl = cofactor_rec(l, level, bit);
  const NodeId r = make_node(lv, rh, rl);
  cache_insert(key, r);
  return r;
}

Add AddManager::cofactor(const Add& f, VarId x, bool bit) {
  check_owner(f);
  return wrap(cofactor_rec(f.id(), x.index, bit));
}

Add AddManager::restrict(const Add& f, std::span<const std::pair<VarId, bool>> lits) {
  check_owner(f);
  NodeId r = f.id();
  for (const auto& [v, b] : lits) r = cofactor_rec(r, v.index, b);
  return wrap(r);
}

NodeId AddManager::abstract_rec(NodeId f, std::uint32_t set, std::size_t pos, bool sum) {
  const auto& levels = varsets_[set];
  const Node& n = nodes_[f];
  if (n.level == kTerminalLevel) {
    if (!sum || pos == levels.size()) return f;
    return make_terminal(std::ldexp(n.value, static_cast<int>(levels.size() - pos)));
  }
  if (pos == levels.size()) return f;
  const CacheKey key{sum ? kTagSumAbstract : kTagMaxAbstract, f, set,
                     static_cast<std::uint32_t>(pos)};
  if (auto hit = cache_find(key)) return *hit;

  const std::uint32_t lv = n.level;
  const NodeId h = n.hi;
  const NodeId l = n.lo;
  std::size_t p = pos;
  while (p < levels.size() && levels[p] < lv) ++p;
  const std::size_t skipped = p - pos;
  NodeId r;
  if (p < levels.size() && levels[p] == lv) {
    const NodeId rh = abstract_rec(h, set, p + 1, sum);
    const NodeId rl = abstract_rec(l, set, p + 1, sum);
    r = apply_id(sum ? BinaryOp::Plus : BinaryOp::Max, rh, rl);
  } else {
    const NodeId rh = abstract_rec(h, set, p, sum);
    const NodeId rl = abstract_rec(l, set, p, sum);
    r = make_node(lv, rh, rl);
  }
  if (sum && skipped > 0) r = scale_id(r, std::ldexp(1.0, static_cast<int>(skipped)));
  cache_insert(key, r);
  return r;
}

Add AddManager::sum_abstract(const Add& f, std::span<const VarId> vars) {
  check_owner(f);
  return wrap(abstract_rec(f.id(), intern_varset(vars), 0, true));
}

Add AddManager::max_abstract(const Add& f, std::span<const VarId> vars) {
  check_owner(f);
  return wrap(abstract_rec(f.id(), intern_varset(vars), 0, false));
}

NodeId AddManager::permute_rec(NodeId f, const std::vector<std::uint32_t>& target,
                               absl::flat_hash_map<NodeId, NodeId>& memo) {
  const Node& n = nodes_[f];
  if (n.level == kTerminalLevel) return f;
  if (auto it = memo.find(f); it != memo.end()) return it->second;
  const std::uint32_t lv = n.level;
  const NodeId h = n.hi;
  const NodeId l = n.lo;
  const NodeId rh = permute_rec(h, target, memo);
  const NodeId rl = permute_rec(l, target, memo);
  const std::uint32_t to = target[lv];
  NodeId r;
  if (to < nodes_[rh].level && to < nodes_[rl].level) {
    r = make_node(to, rh, rl);
  } else {
    r = ite_id(make_node(to, one_, zero_), rh, rl);
  }
  memo.emplace(f, r);
  return r;
}

Add AddManager::permute(const Add& f, std::span<const std::pair<VarId, VarId>> mapping) {
  check_owner(f);
  std::vector<std::uint32_t> target(var_count());
  for (std::uint32_t i = 0; i < target.size(); ++i) target[i] = i;
  for (const auto& [from, to] : mapping) {
    if (from.index >= var_count() || to.index >= var_count())
      throw InvalidArgument("unregistered variable in permutation");
    target[from.index] = to.index;
  }
  absl::flat_hash_map<NodeId, NodeId> memo;
  return wrap(permute_rec(f.id(), target, memo));
}

// ---- evaluation and inspection --------------------------------------------

double AddManager::eval_dense(const Add& f, std::span<const std::int8_t> bits) const {
  check_owner(f);
  NodeId cur = f.id();
  while (nodes_[cur].level != kTerminalLevel) {
    const Node& n = nodes_[cur];
    if (n.level >= bits.size() || bits[n.level] < 0)
      throw InvalidArgument("incomplete assignment: variable " + var_names_[n.level] + " unset");
    cur = bits[n.level] ? n.hi : n.lo;
  }
  return nodes_[cur].value;
}

double AddManager::eval(const Add& f, std::span<const std::pair<VarId, bool>> assignment) const {
  std::vector<std::int8_t> bits(var_count(), -1);
  for (const auto& [v, b] : assignment) {
    if (v.index >= bits.size()) throw InvalidArgument("unregistered variable");
    bits[v.index] = b ? 1 : 0;
  }
  return eval_dense(f, bits);
}

double AddManager::value(const Add& f) const {
  check_owner(f);
  const Node& n = nodes_[f.id()];
  if (n.level != kTerminalLevel) throw InvalidArgument("not a terminal");
  return n.value;
}

VarId AddManager::top_var(const Add& f) const {
  check_owner(f);
  const Node& n = nodes_[f.id()];
  if (n.level == kTerminalLevel) throw InvalidArgument("terminal has no variable");
  return VarId{n.level};
}

Add AddManager::high(const Add& f) {
  check_owner(f);
  const Node& n = nodes_[f.id()];
  return n.level == kTerminalLevel ? f : wrap(n.hi);
}

Add AddManager::low(const Add& f) {
  check_owner(f);
  const Node& n = nodes_[f.id()];
  return n.level == kTerminalLevel ? f : wrap(n.lo);
}

std::size_t AddManager::node_count(const Add& f) const {
  return node_count(std::span<const Add>(&f, 1));
}

std::size_t AddManager::node_count(std::span<const Add> roots) const {
  absl::flat_hash_set<NodeId> seen;
  std::vector<NodeId> stack;
  for (const Add& r : roots) {
    check_owner(r);
    stack.push_back(r.id());
  }
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) continue;
    const Node& n = nodes_[id];
    if (n.level != kTerminalLevel) {
      stack.push_back(n.hi);
      stack.push_back(n.lo);
    }
  }
  return seen.size();
}

std::vector<VarId> AddManager::support(const Add& f) const {
  check_owner(f);
  absl::flat_hash_set<NodeId> seen;
  std::vector<bool> present(var_count(), false);
  std::vector<NodeId> stack{f.id()};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    const Node& n = nodes_[id];
    if (n.level == kTerminalLevel || !seen.insert(id).second) continue;
    present[n.level] = true;
    stack.push_back(n.hi);
    stack.push_back(n.lo);
  }
  std::vector<VarId> out;
  for (std::uint32_t i = 0; i < present.size(); ++i)
    if (present[i]) out.push_back(VarId{i});
  return out;
}

namespace {
template <typename Pick>
double fold_terminals(const std::vector<AddManager::Node>& nodes, NodeId root, Pick pick) {
  absl::flat_hash_set<NodeId> seen;
  std::vector<NodeId> stack{root};
  std::optional<double> best;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) continue;
    const auto& n = nodes[id];
    if (n.level == AddManager::kTerminalLevel) {
      best = best ? pick(*best, n.value) : n.value;
    } else {
      stack.push_back(n.hi);
      stack.push_back(n.lo);
    }
  }
  return *best;
}
}  // namespace

double AddManager::min_value(const Add& f) const {
  check_owner(f);
  return fold_terminals(nodes_, f.id(), [](double a, double b) { return std::min(a, b); });
}

double AddManager::max_value(const Add& f) const {
  check_owner(f);
  return fold_terminals(nodes_, f.id(), [](double a, double b) { return std::max(a, b); });
}

// ---- text dump ------------------------------------------------------------

std::string AddManager::dump(const Add& f) const {
  check_owner(f);
  absl::flat_hash_map<NodeId, std::size_t> local;
  std::vector<NodeId> order;
  // Iterative post-order, low child first.
  std::vector<std::pair<NodeId, bool>> stack{{f.id(), false}};
  while (!stack.empty()) {
    auto [id, expanded] = stack.back();
    stack.pop_back();
    if (local.contains(id)) continue;
    const Node& n = nodes_[id];
    if (n.level == kTerminalLevel || expanded) {
      local.emplace(id, order.size());
      order.push_back(id);
      continue;
    }
    stack.emplace_back(id, true);
    stack.emplace_back(n.hi, false);
    stack.emplace_back(n.lo, false);
  }
  std::ostringstream os;
  os << "add " << order.size() << " root " << local.at(f.id()) << '\n';
  char buf[64];
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Node& n = nodes_[order[i]];
    if (n.level == kTerminalLevel) {
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      os << i << " T " << buf << '\n';
    } else {
      os << i << " V " << n.level << ' ' << local.at(n.hi) << ' ' << local.at(n.lo) << '\n';
    }
  }
  return os.str();
}

Add AddManager::load(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string tag, root_tag;
  std::size_t count = 0, root = 0;
  if (!(is >> tag >> count >> root_tag >> root) || tag != "add" || root_tag != "root" ||
      root >= count)
    throw InvalidArgument("malformed ADD dump header");
  std::vector<Add> built;
  built.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t idx = 0;
    std::string kind;
    if (!(is >> idx >> kind) || idx != i) throw InvalidArgument("malformed ADD dump line");
    if (kind == "T") {
      double v = 0.0;
      if (!(is >> v)) throw InvalidArgument("malformed terminal in ADD dump");
      built.push_back(terminal(v));
    } else if (kind == "V") {
      std::uint32_t level = 0;
      std::size_t hi = 0, lo = 0;
      if (!(is >> level >> hi >> lo) || hi >= i || lo >= i || level >= var_count())
        throw InvalidArgument("malformed internal node in ADD dump");
      built.push_back(ite_var(VarId{level}, built[hi], built[lo]));
    } else {
      throw InvalidArgument("unknown node kind in ADD dump");
    }
  }
  return built[root];
}

// ---- garbage collection ---------------------------------------------------

std::size_t AddManager::collect_garbage() {
  std::vector<bool> marked(nodes_.size(), false);
  std::vector<NodeId> stack;
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (refs_[i] > 0 && nodes_[i].level != kFreeLevel) stack.push_back(i);
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (marked[id]) continue;
    marked[id] = true;
    const Node& n = nodes_[id];
    if (n.level != kTerminalLevel) {
      stack.push_back(n.hi);
      stack.push_back(n.lo);
    }
  }
  clear_cache();
  std::size_t freed = 0;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (marked[i] || n.level == kFreeLevel) continue;
    if (n.level == kTerminalLevel) {
      terminals_.erase(std::bit_cast<std::uint64_t>(n.value));
    } else {
      unique_.erase(UniqueKey{n.level, n.hi, n.lo});
    }
    n.level = kFreeLevel;
    free_.push_back(i);
    ++freed;
  }
  return freed;
}

}  // namespace symqp
