#include "symqp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "symqp/error.hpp"

namespace symqp {

namespace {

int bit_of(std::uint64_t s, int n, int i) { return static_cast<int>((s >> (n - 1 - i)) & 1u); }

double kernel_p(const FactoredMdp& mdp, std::uint64_t s, int a, int i) {
  const int n = mdp.state_bits;
  const int prev = i > mdp.replica_bits ? bit_of(s, n, i - 1) : 1;
  return mdp.kernel[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)].p[bit_of(s, n, i)][prev];
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string outcome(double p, int i) {
  const std::string t = "t[" + std::to_string(i) + "]";
  if (p == 1.0) return "[" + t + "]";
  if (p == 0.0) return "[!" + t + "]";
  return "(" + num(p) + " * [" + t + "] + " + num(1.0 - p) + " * [!" + t + "])";
}

// Coefficient factor P(t_i | s, a) as a modeling-language expression.
std::string bit_factor(const BitKernel& k, int i, bool chained) {
  const std::string si = "s[" + std::to_string(i) + "]";
  const std::string sp = "s[" + std::to_string(i - 1) + "]";
  std::vector<std::string> parts;
  for (int b = 1; b >= 0; --b) {
    const std::string gs = b ? si : "!" + si;
    if (!chained || k.p[b][0] == k.p[b][1]) {
      parts.push_back("[" + gs + "] * " + outcome(k.p[b][1], i));
    } else {
      parts.push_back("[" + gs + " & " + sp + "] * " + outcome(k.p[b][1], i));
      parts.push_back("[" + gs + " & !" + sp + "] * " + outcome(k.p[b][0], i));
    }
  }
  std::string out = "(";
  for (std::size_t j = 0; j < parts.size(); ++j) out += (j ? " + " : "") + parts[j];
  return out + ")";
}

}  // namespace

FactoredMdp make_factory_mdp(const MdpParams& p) {
  if (p.state_bits < 1 || p.state_bits > 24) throw InvalidArgument("state_bits must lie in [1, 24]");
  if (p.actions < 1 || p.actions > 64) throw InvalidArgument("actions must lie in [1, 64]");
  std::mt19937_64 rng(p.seed);
  auto pick = [&rng](std::initializer_list<double> vals) {
    std::uniform_int_distribution<std::size_t> d(0, vals.size() - 1);
    return *(vals.begin() + d(rng));
  };
  FactoredMdp mdp;
  mdp.state_bits = p.state_bits;
  mdp.actions = p.actions;
  mdp.gamma = p.gamma;
  for (int i = 0; i < p.state_bits; ++i) mdp.reward_weights.push_back(pick({0.25, 0.5, 1.0, 2.0}));
  mdp.kernel.assign(static_cast<std::size_t>(p.actions), std::vector<BitKernel>(static_cast<std::size_t>(p.state_bits)));
  for (int a = 0; a < p.actions; ++a)
    for (int i = 0; i < p.state_bits; ++i) {
      BitKernel& k = mdp.kernel[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)];
      if (i % p.actions != a) continue;
      const double keep = pick({0.875, 0.75});
      const double ready = pick({0.75, 0.875});
      const double blocked = pick({0.25, 0.125});
      k.p[1][0] = k.p[1][1] = keep;
      k.p[0][1] = ready;
      k.p[0][0] = i == 0 ? ready : blocked;
    }
  if (p.replica_bits < 0 || p.state_bits + p.replica_bits > 24) throw InvalidArgument("replica_bits must lie in [0, 24 - state_bits]");
  const auto r = static_cast<std::size_t>(p.replica_bits);
  mdp.state_bits += p.replica_bits;
  mdp.replica_bits = p.replica_bits;
  mdp.reward_weights.insert(mdp.reward_weights.begin(), r, 0.0);
  for (auto& row : mdp.kernel) row.insert(row.begin(), r, BitKernel{});
  validate(mdp);
  return mdp;
}

void validate(const FactoredMdp& mdp) {
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) throw InvalidArgument("discount must lie in (0, 1)");
  if (mdp.state_bits < 1) throw InvalidArgument("at least one state bit is required");
  if (mdp.replica_bits < 0 || mdp.replica_bits >= mdp.state_bits)
    throw InvalidArgument("replica_bits must leave at least one working bit");
  if (mdp.actions < 1 || mdp.kernel.size() != static_cast<std::size_t>(mdp.actions))
    throw InvalidArgument("one kernel row per action is required");
  if (mdp.reward_weights.size() != static_cast<std::size_t>(mdp.state_bits))
    throw InvalidArgument("one reward weight per state bit is required");
  for (const auto& row : mdp.kernel) {
    if (row.size() != static_cast<std::size_t>(mdp.state_bits)) throw InvalidArgument("one kernel per state bit");
    for (const auto& k : row)
      for (const auto& pr : k.p)
        for (double v : pr)
          if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("transition probabilities must lie in [0, 1]");
  }
}

double reward(const FactoredMdp& mdp, std::uint64_t s) {
  double r = mdp.reward_base;
  for (int i = 0; i < mdp.state_bits; ++i)
    if (bit_of(s, mdp.state_bits, i)) r += mdp.reward_weights[static_cast<std::size_t>(i)];
  return r;
}

double transition_prob(const FactoredMdp& mdp, std::uint64_t s, int a, std::uint64_t t) {
  double p = 1.0;
  for (int i = 0; i < mdp.state_bits; ++i) {
    const double q = kernel_p(mdp, s, a, i);
    p *= bit_of(t, mdp.state_bits, i) ? q : 1.0 - q;
  }
  return p;
}

std::string mdp_source(const FactoredMdp& mdp) {
  validate(mdp);
  const int n = mdp.state_bits;
  std::ostringstream os;
  os << "# factored MDP: " << n << " state bits, " << mdp.actions << " actions, discount " << num(mdp.gamma) << "\n";
  os << "var s[" << n << "];\nvar t[" << n << "];\n";
  os << "minimize sum{s : true} v(s);\n";
  std::string rew = num(mdp.reward_base);
  for (int i = 0; i < n; ++i)
    if (mdp.reward_weights[static_cast<std::size_t>(i)] != 0.0)
      rew += " + " + num(mdp.reward_weights[static_cast<std::size_t>(i)]) + " * [s[" + std::to_string(i) + "]]";
  for (int a = 0; a < mdp.actions; ++a) {
    os << "# action " << a << "\n";
    os << "constraint {s : true}: v(s) - sum{t : true} " << num(mdp.gamma);
    for (int i = 0; i < n; ++i) os << "\n    * " << bit_factor(mdp.kernel[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)], i, i > mdp.replica_bits);
    os << "\n    * v(t) >= " << rew << ";\n";
  }
  return os.str();
}

Foqp gen_mdp_lp(const FactoredMdp& mdp) { return parse(mdp_source(mdp)); }

std::vector<double> value_iteration(const FactoredMdp& mdp, double tol, int max_sweeps) {
  validate(mdp);
  const int n = mdp.state_bits;
  const std::uint64_t states = std::uint64_t{1} << n;
  struct Succ {
    std::uint64_t t;
    double p;
  };
  // successor lists, flattened per (s, a)
  std::vector<std::size_t> start;
  std::vector<Succ> succ;
  for (std::uint64_t s = 0; s < states; ++s)
    for (int a = 0; a < mdp.actions; ++a) {
      start.push_back(succ.size());
      std::vector<Succ> cur{{0, 1.0}};
      for (int i = 0; i < n; ++i) {
        const double q = kernel_p(mdp, s, a, i);
        const std::uint64_t bit = std::uint64_t{1} << (n - 1 - i);
        std::vector<Succ> next;
        for (const auto& c : cur) {
          if (q > 0.0) next.push_back({c.t | bit, c.p * q});
          if (q < 1.0) next.push_back({c.t, c.p * (1.0 - q)});
        }
        cur.swap(next);
      }
      succ.insert(succ.end(), cur.begin(), cur.end());
    }
  start.push_back(succ.size());

  std::vector<double> rew(states), v(states, 0.0), next(states);
  for (std::uint64_t s = 0; s < states; ++s) rew[s] = reward(mdp, s);
  const double stop = tol * (1.0 - mdp.gamma) / mdp.gamma;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::uint64_t s = 0; s < states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.actions; ++a) {
        const std::size_t row = s * static_cast<std::uint64_t>(mdp.actions) + static_cast<std::uint64_t>(a);
        double e = 0.0;
        for (std::size_t k = start[row]; k < start[row + 1]; ++k) e += succ[k].p * v[succ[k].t];
        best = std::max(best, e);
      }
      next[s] = rew[s] + mdp.gamma * best;
      change = std::max(change, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (change <= stop) break;
  }
  return v;
}

}  // namespace symqp
