#pragma once

// Abstract syntax and parser for first-order logical quadratic programs.
//
// A program declares Boolean bit vectors (`var x[3];`) or finite-domain
// variables (`var z : D;`), optional predicates with a closed-world fact base,
// an objective and a list of constraint blocks. The decision function is
// always called `v`; its arguments index the columns of the standard form.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace symqp {

struct SourcePos {
  int line = 0;
  int column = 0;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

enum class FormulaKind {
  True,
  False,
  Bit,      // var[bit]
  Not,
  And,
  Or,
  EqVars,   // var == var2
  EqConst,  // var == constant
  Atom,     // pred(args...)
  Prop,     // ground atom of an open predicate, kept as a proposition
  Exists,   // exists var [in domain]: lhs
  Forall,
};

struct Formula {
  FormulaKind kind = FormulaKind::True;
  std::string var;
  std::string var2;
  int bit = 0;
  std::uint64_t constant = 0;
  std::string pred;
  std::vector<std::string> args;
  std::string domain;  // quantifiers over a fresh name: its domain
  FormulaPtr lhs;
  FormulaPtr rhs;
  SourcePos pos;
};

FormulaPtr f_true();
FormulaPtr f_false();
FormulaPtr f_bit(std::string var, int bit);
FormulaPtr f_not(FormulaPtr a);
FormulaPtr f_and(FormulaPtr a, FormulaPtr b);
FormulaPtr f_or(FormulaPtr a, FormulaPtr b);
FormulaPtr f_eq_vars(std::string a, std::string b);
FormulaPtr f_eq_const(std::string var, std::uint64_t value);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { Number, Add, Sub, Mul, Neg, Indicator };

struct Expr {
  ExprKind kind = ExprKind::Number;
  double value = 0.0;
  FormulaPtr guard;
  ExprPtr lhs;
  ExprPtr rhs;
};

ExprPtr e_num(double v);
ExprPtr e_add(ExprPtr a, ExprPtr b);
ExprPtr e_sub(ExprPtr a, ExprPtr b);
ExprPtr e_mul(ExprPtr a, ExprPtr b);
ExprPtr e_neg(ExprPtr a);
ExprPtr e_ind(FormulaPtr g);

/// sum{bound : guard} coef * v(target). An empty bound list is a single term
/// whose target is a row variable.
struct LinearTerm {
  std::vector<std::string> bound;
  FormulaPtr guard;
  ExprPtr coef;
  std::string target;
  SourcePos pos;
};

/// sum{bound : guard} coef * v(left) * v(right); denotes 1/2 v^T Q v with Q the
/// symmetrized coefficient.
struct QuadTerm {
  std::vector<std::string> bound;
  FormulaPtr guard;
  ExprPtr coef;
  std::string left;
  std::string right;
  SourcePos pos;
};

enum class Sense { Ge, Le, Eq };

struct ConstraintBlock {
  std::vector<std::string> rows;
  FormulaPtr row_guard;
  std::vector<LinearTerm> body;
  Sense sense = Sense::Ge;
  ExprPtr rhs;
  SourcePos pos;
};

struct VarDecl {
  std::string name;
  int width = 1;
  std::optional<std::string> domain;
};

struct DomainDecl {
  std::string name;
  std::vector<std::string> constants;
};

struct PredDecl {
  std::string name;
  std::vector<std::string> arg_domains;
};

struct Fact {
  std::string pred;
  std::vector<std::string> args;
  auto operator<=>(const Fact&) const = default;
};

struct Foqp {
  std::vector<DomainDecl> domains;
  std::vector<VarDecl> vars;
  std::vector<PredDecl> preds;
  std::set<Fact> facts;
  std::vector<LinearTerm> objective;
  std::vector<QuadTerm> quadratic;
  std::vector<ConstraintBlock> constraints;

  const VarDecl* find_var(std::string_view name) const;
  const DomainDecl* find_domain(std::string_view name) const;
  const PredDecl* find_pred(std::string_view name) const;
  /// Index of `constant` in the domain, or nullopt.
  std::optional<std::uint64_t> constant_index(const DomainDecl& d, std::string_view constant) const;
  /// Width in bits of the decision-function argument.
  int column_width() const;
};

/// Declaration a (possibly primed) variable name refers to: x'' -> x.
std::string_view base_name(std::string_view name);

Foqp parse(std::string_view source);

/// Eliminates quantifiers and predicate atoms. Atoms of predicates in `open`
/// become propositions; all other atoms are decided by the fact base.
Foqp propositionalize(const Foqp& f, const std::set<std::string>& open = {});

bool quantifier_free(const Foqp& f);

std::string to_string(const FormulaPtr& f);

}  // namespace symqp
