#pragma once

// Factored MDPs and their value-function linear programs.
//
//   minimize sum_s v(s)  s.t.  v(s) - gamma sum_t P(t | s, a) v(t) >= rew(s)  for all s, a
//
// Transitions factor over state bits: bit i of the successor depends on bit i
// and bit i-1 of the current state and on the action.

#include <cstdint>
#include <string>
#include <vector>

#include "symqp/foqp.hpp"

namespace symqp {

/// P(t_i = 1 | s_i, s_{i-1}) as p[s_i][s_{i-1}]. Bit 0 reads p[s_0][1].
struct BitKernel {
  double p[2][2] = {{0.0, 0.0}, {1.0, 1.0}};
};

struct FactoredMdp {
  int state_bits = 0;
  int actions = 1;
  double gamma = 0.9;
  std::vector<std::vector<BitKernel>> kernel;  // [action][bit]
  double reward_base = 0.0;
  std::vector<double> reward_weights;  // rew(s) = base + sum_i w_i s_i
  /// Leading bits that never change and carry no reward; bit replica_bits
  /// reads p[s][1] like bit 0. The LP is then block diagonal with
  /// 2^replica_bits identical blocks.
  int replica_bits = 0;
};

/// Parameters of the factory-like family: action j works on the bits i with
/// i mod actions == j; worked bits succeed with a probability that depends on
/// the preceding bit and may be lost again; other bits persist.
struct MdpParams {
  int state_bits = 8;
  int actions = 4;
  double gamma = 0.9;
  std::uint64_t seed = 1;
  /// Prepended frozen bits; state_bits counts the working bits only.
  int replica_bits = 0;
};

FactoredMdp make_factory_mdp(const MdpParams& p);

/// Throws InvalidArgument for gamma outside (0,1), probabilities outside [0,1]
/// or inconsistent table sizes.
void validate(const FactoredMdp& mdp);

/// Bit i of a state is (s >> (n - 1 - i)) & 1, matching the modeling language.
double reward(const FactoredMdp& mdp, std::uint64_t s);
double transition_prob(const FactoredMdp& mdp, std::uint64_t s, int a, std::uint64_t t);

/// Modeling-language source of the value LP, one constraint block per action.
std::string mdp_source(const FactoredMdp& mdp);
Foqp gen_mdp_lp(const FactoredMdp& mdp);

/// Dense value iteration over explicit successor lists; stops when the sup-norm
/// change falls below tol * (1 - gamma) / gamma.
std::vector<double> value_iteration(const FactoredMdp& mdp, double tol = 1e-10, int max_sweeps = 1'000'000);

}  // namespace symqp
