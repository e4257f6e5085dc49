#pragma once

// Algebraic decision diagrams: reduced, ordered, hash-consed graphs that
// represent functions {0,1}^n -> R. All nodes live in an AddManager; user code
// holds reference-counted Add handles.

#include <absl/container/flat_hash_map.h>

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "symqp/error.hpp"

namespace symqp {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// Position of a Boolean variable in the manager's (fixed) order.
struct VarId {
  std::uint32_t index = 0;
  auto operator<=>(const VarId&) const = default;
};

enum class BinaryOp : std::uint8_t { Plus, Minus, Times, Min, Max, Divide };

class AddManager;

/// Handle to a canonical node. Equal functions over the same manager compare
/// equal as handles. Copies keep the node alive across collect_garbage().
class Add {
 public:
  Add() = default;
  Add(const Add& o);
  Add(Add&& o) noexcept;
  Add& operator=(const Add& o);
  Add& operator=(Add&& o) noexcept;
  ~Add();

  bool valid() const { return mgr_ != nullptr; }
  NodeId id() const { return id_; }
  AddManager* manager() const { return mgr_; }

  bool operator==(const Add& o) const { return mgr_ == o.mgr_ && id_ == o.id_; }

 private:
  friend class AddManager;
  Add(AddManager* m, NodeId id);
  void release();

  AddManager* mgr_ = nullptr;
  NodeId id_ = kNoNode;
};

/// Key of the shared operation cache. `op` is one of the CacheTag values or a
/// tag reserved by a client module (>= kClientTagBase).
struct CacheKey {
  std::uint32_t op = 0;
  NodeId a = 0;
  NodeId b = 0;
  std::uint32_t c = 0;

  bool operator==(const CacheKey&) const = default;
  template <typename H>
  friend H AbslHashValue(H h, const CacheKey& k) {
    return H::combine(std::move(h), k.op, k.a, k.b, k.c);
  }
};

inline constexpr std::uint32_t kClientTagBase = 64;

inline std::size_t mix_words(std::uint64_t x, std::uint64_t y) {
  x ^= y * 0x9E3779B97F4A7C15ull + (x << 6) + (x >> 2);
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDull;
  x ^= x >> 33;
  x *= 0xC4CEB9FE1A85EC53ull;
  return static_cast<std::size_t>(x ^ (x >> 33));
}

struct CacheKeyHash {
  std::size_t operator()(const CacheKey& k) const {
    return mix_words((std::uint64_t{k.op} << 32) | k.a, (std::uint64_t{k.b} << 32) | k.c);
  }
};

class AddManager {
 public:
  struct Node {
    double value = 0.0;       // terminals only
    std::uint32_t level = 0;  // variable index, kTerminalLevel for terminals
    NodeId hi = kNoNode;
    NodeId lo = kNoNode;
  };
  static constexpr std::uint32_t kTerminalLevel = std::numeric_limits<std::uint32_t>::max();

  explicit AddManager(std::size_t num_vars = 0);
  AddManager(const AddManager&) = delete;
  AddManager& operator=(const AddManager&) = delete;
  ~AddManager();

  // ---- variables -------------------------------------------------------
  /// Appends a variable at the bottom of the order.
  VarId new_var(std::string name = {});
  /// Returns the variable registered under `name`, creating it if absent.
  VarId named_var(const std::string& name);
  std::optional<VarId> find_var(std::string_view name) const;
  std::size_t var_count() const { return var_names_.size(); }
  const std::string& var_name(VarId v) const;

  // ---- construction ----------------------------------------------------
  Add terminal(double v);
  Add zero() { return terminal(0.0); }
  Add one() { return terminal(1.0); }
  /// Projection function of `x`: 1 where x = 1, 0 elsewhere.
  Add var(VarId x);
  /// x ? hi : lo for an arbitrary position of x relative to the children.
  Add ite_var(VarId x, const Add& hi, const Add& lo);
  /// cond must be 0/1 valued.
  Add ite(const Add& cond, const Add& g, const Add& h);

  // ---- operations ------------------------------------------------------
  Add apply(BinaryOp op, const Add& f, const Add& g);
  /// k * f + g in one pass; equal to apply(Plus, apply(Times, k, f), g).
  Add axpy(double k, const Add& f, const Add& g);
  /// Pointwise combination with an arbitrary function (memoized per call).
  Add apply(const std::function<double(double, double)>& fn, const Add& f, const Add& g);
  /// Applies `fn` to every terminal (memoized per call).
  Add map(const Add& f, const std::function<double(double)>& fn);
  Add cofactor(const Add& f, VarId x, bool bit);
  Add restrict(const Add& f, std::span<const std::pair<VarId, bool>> lits);
  /// Sum over all assignments of `vars` (variables absent from f count twice).
  Add sum_abstract(const Add& f, std::span<const VarId> vars);
  Add max_abstract(const Add& f, std::span<const VarId> vars);
  /// Substitutes variables: every occurrence of `from` is replaced by `to`.
  Add permute(const Add& f, std::span<const std::pair<VarId, VarId>> mapping);

  double eval(const Add& f, std::span<const std::pair<VarId, bool>> assignment) const;
  /// `bits[v]` is the value of variable v; entries < 0 mean unassigned.
  double eval_dense(const Add& f, std::span<const std::int8_t> bits) const;

  // ---- inspection ------------------------------------------------------
  bool is_terminal(const Add& f) const { return node(f.id()).level == kTerminalLevel; }
  double value(const Add& f) const;
  VarId top_var(const Add& f) const;
  Add high(const Add& f);
  Add low(const Add& f);
  std::size_t node_count(const Add& f) const;
  std::size_t node_count(std::span<const Add> roots) const;
  std::vector<VarId> support(const Add& f) const;
  double min_value(const Add& f) const;
  double max_value(const Add& f) const;

  /// One node per line, children before parents, local ids starting at 0.
  std::string dump(const Add& f) const;
  Add load(std::string_view text);

  // ---- cache and memory ------------------------------------------------
  void clear_cache();
  /// 0 means unbounded; otherwise least-recently-used entries are evicted.
  void set_cache_capacity(std::size_t capacity);
  std::size_t cache_capacity() const { return cache_capacity_; }
  std::size_t cache_size() const;
  void set_cache_enabled(bool enabled) { cache_enabled_ = enabled; }
  bool cache_enabled() const { return cache_enabled_; }

  /// Frees every node unreachable from a live Add handle. Clears the cache.
  std::size_t collect_garbage();
  std::size_t live_nodes() const { return nodes_.size() - free_.size(); }

  /// Interns a sorted variable list; the id is stable for the manager's life.
  std::uint32_t intern_varset(std::span<const VarId> vars);
  std::span<const std::uint32_t> varset_levels(std::uint32_t id) const;

  // ---- low-level interface for recursive operations ---------------------
  // NodeIds are not reference counted: they are valid only until the next
  // collect_garbage(), which must not run while a recursion is in progress.
  const Node& node(NodeId id) const { return nodes_[id]; }
  bool terminal_id(NodeId id) const { return nodes_[id].level == kTerminalLevel; }
  NodeId make_terminal(double v);
  NodeId make_node(std::uint32_t level, NodeId hi, NodeId lo);
  NodeId apply_id(BinaryOp op, NodeId f, NodeId g);
  /// `k` is a terminal id.
  NodeId axpy_id(NodeId k, NodeId f, NodeId g);
  NodeId ite_id(NodeId c, NodeId g, NodeId h);
  NodeId scale_id(NodeId f, double k) { return apply_id(BinaryOp::Times, f, make_terminal(k)); }
  std::optional<NodeId> cache_find(const CacheKey& key);
  void cache_insert(const CacheKey& key, NodeId result);
  Add wrap(NodeId id) { return Add(this, id); }
  NodeId zero_id() const { return zero_; }
  NodeId one_id() const { return one_; }

 private:
  friend class Add;

  struct UniqueKey {
    std::uint32_t level;
    NodeId hi;
    NodeId lo;
    bool operator==(const UniqueKey&) const = default;
    template <typename H>
    friend H AbslHashValue(H h, const UniqueKey& k) {
      return H::combine(std::move(h), k.level, k.hi, k.lo);
    }
  };
  struct UniqueKeyHash {
    std::size_t operator()(const UniqueKey& k) const {
      return mix_words(k.level, (std::uint64_t{k.hi} << 32) | k.lo);
    }
  };

  void ref(NodeId id) { ++refs_[id]; }
  void deref(NodeId id) { --refs_[id]; }
  NodeId alloc(const Node& n);
  void check_owner(const Add& f) const;

  NodeId cofactor_rec(NodeId f, std::uint32_t level, bool bit);
  NodeId abstract_rec(NodeId f, std::uint32_t set, std::size_t pos, bool sum);
  NodeId permute_rec(NodeId f, const std::vector<std::uint32_t>& target,
                     absl::flat_hash_map<NodeId, NodeId>& memo);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> refs_;
  std::vector<NodeId> free_;
  absl::flat_hash_map<UniqueKey, NodeId, UniqueKeyHash> unique_;
  absl::flat_hash_map<std::uint64_t, NodeId> terminals_;

  bool cache_enabled_ = true;
  std::size_t cache_capacity_ = 0;
  absl::flat_hash_map<CacheKey, NodeId, CacheKeyHash> cache_;
  // LRU bookkeeping, used only when cache_capacity_ > 0.
  std::list<std::pair<CacheKey, NodeId>> lru_;
  absl::flat_hash_map<CacheKey, std::list<std::pair<CacheKey, NodeId>>::iterator, CacheKeyHash> lru_index_;

  std::vector<std::string> var_names_;
  absl::flat_hash_map<std::string, VarId> var_by_name_;
  std::vector<std::vector<std::uint32_t>> varsets_;
  absl::flat_hash_map<std::vector<std::uint32_t>, std::uint32_t> varset_index_;

  NodeId zero_ = kNoNode;
  NodeId one_ = kNoNode;
};

}  // namespace symqp

template <>
struct std::hash<symqp::Add> {
  std::size_t operator()(const symqp::Add& a) const noexcept {
    return std::hash<std::uint64_t>{}((reinterpret_cast<std::uintptr_t>(a.manager()) << 32) ^ a.id());
  }
};
