#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "symqp/error.hpp"
#include "symqp/foqp.hpp"

namespace symqp {

// ---- constructors ---------------------------------------------------------

namespace {

FormulaPtr make(Formula f) { return std::make_shared<const Formula>(std::move(f)); }

ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

int bits_for_size(std::size_t n) {
  int w = 0;
  while ((std::size_t{1} << w) < n) ++w;
  return w;
}

}  // namespace

FormulaPtr f_true() {
  static const FormulaPtr t = make(Formula{.kind = FormulaKind::True});
  return t;
}

FormulaPtr f_false() {
  static const FormulaPtr f = make(Formula{.kind = FormulaKind::False});
  return f;
}

FormulaPtr f_bit(std::string var, int bit) {
  return make(Formula{.kind = FormulaKind::Bit, .var = std::move(var), .bit = bit});
}

FormulaPtr f_not(FormulaPtr a) {
  if (a->kind == FormulaKind::True) return f_false();
  if (a->kind == FormulaKind::False) return f_true();
  return make(Formula{.kind = FormulaKind::Not, .lhs = std::move(a)});
}

FormulaPtr f_and(FormulaPtr a, FormulaPtr b) {
  if (a->kind == FormulaKind::False || b->kind == FormulaKind::False) return f_false();
  if (a->kind == FormulaKind::True) return b;
  if (b->kind == FormulaKind::True) return a;
  return make(Formula{.kind = FormulaKind::And, .lhs = std::move(a), .rhs = std::move(b)});
}

FormulaPtr f_or(FormulaPtr a, FormulaPtr b) {
  if (a->kind == FormulaKind::True || b->kind == FormulaKind::True) return f_true();
  if (a->kind == FormulaKind::False) return b;
  if (b->kind == FormulaKind::False) return a;
  return make(Formula{.kind = FormulaKind::Or, .lhs = std::move(a), .rhs = std::move(b)});
}

FormulaPtr f_eq_vars(std::string a, std::string b) {
  return make(Formula{.kind = FormulaKind::EqVars, .var = std::move(a), .var2 = std::move(b)});
}

FormulaPtr f_eq_const(std::string var, std::uint64_t value) {
  return make(Formula{.kind = FormulaKind::EqConst, .var = std::move(var), .constant = value});
}

ExprPtr e_num(double v) { return make(Expr{.kind = ExprKind::Number, .value = v}); }
ExprPtr e_add(ExprPtr a, ExprPtr b) { return make(Expr{.kind = ExprKind::Add, .lhs = a, .rhs = b}); }
ExprPtr e_sub(ExprPtr a, ExprPtr b) { return make(Expr{.kind = ExprKind::Sub, .lhs = a, .rhs = b}); }
ExprPtr e_mul(ExprPtr a, ExprPtr b) { return make(Expr{.kind = ExprKind::Mul, .lhs = a, .rhs = b}); }
ExprPtr e_neg(ExprPtr a) { return make(Expr{.kind = ExprKind::Neg, .lhs = a}); }
ExprPtr e_ind(FormulaPtr g) { return make(Expr{.kind = ExprKind::Indicator, .guard = std::move(g)}); }

// ---- Foqp lookups ---------------------------------------------------------

std::string_view base_name(std::string_view name) {
  while (!name.empty() && name.back() == '\'') name.remove_suffix(1);
  return name;
}

const VarDecl* Foqp::find_var(std::string_view name) const {
  const auto base = base_name(name);
  for (const auto& v : vars)
    if (v.name == base) return &v;
  return nullptr;
}

const DomainDecl* Foqp::find_domain(std::string_view name) const {
  for (const auto& d : domains)
    if (d.name == name) return &d;
  return nullptr;
}

const PredDecl* Foqp::find_pred(std::string_view name) const {
  for (const auto& p : preds)
    if (p.name == name) return &p;
  return nullptr;
}

std::optional<std::uint64_t> Foqp::constant_index(const DomainDecl& d, std::string_view constant) const {
  for (std::size_t i = 0; i < d.constants.size(); ++i)
    if (d.constants[i] == constant) return i;
  return std::nullopt;
}

int Foqp::column_width() const {
  auto width_of = [&](const std::string& name) {
    const VarDecl* d = find_var(name);
    return d ? d->width : 0;
  };
  for (const auto& t : objective) return width_of(t.target);
  for (const auto& q : quadratic) return width_of(q.left);
  for (const auto& c : constraints)
    for (const auto& t : c.body) return width_of(t.target);
  return 0;
}

std::string to_string(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True:
      return "true";
    case FormulaKind::False:
      return "false";
    case FormulaKind::Bit:
      return f->var + "[" + std::to_string(f->bit) + "]";
    case FormulaKind::Not:
      return "!" + to_string(f->lhs);
    case FormulaKind::And:
      return "(" + to_string(f->lhs) + " & " + to_string(f->rhs) + ")";
    case FormulaKind::Or:
      return "(" + to_string(f->lhs) + " | " + to_string(f->rhs) + ")";
    case FormulaKind::EqVars:
      return f->var + " == " + f->var2;
    case FormulaKind::EqConst:
      return f->var + " == " + std::to_string(f->constant);
    case FormulaKind::Atom:
    case FormulaKind::Prop: {
      std::string s = f->pred + "(";
      for (std::size_t i = 0; i < f->args.size(); ++i) s += (i ? "," : "") + f->args[i];
      return s + ")";
    }
    case FormulaKind::Exists:
    case FormulaKind::Forall:
      return std::string(f->kind == FormulaKind::Exists ? "exists " : "forall ") + f->var +
             (f->domain.empty() ? "" : " in " + f->domain) + ": " + to_string(f->lhs);
  }
  return {};
}

// ---- lexer ----------------------------------------------------------------

namespace {

enum class Tok { Ident, Number, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  SourcePos pos;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.pos = {line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      while (j < src.size() && src[j] == '\'') ++j;
      t.kind = Tok::Ident;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(src.data() + i, src.data() + src.size(), v);
      if (ec != std::errc()) throw ParseError(line, col, "malformed number");
      const std::size_t len = static_cast<std::size_t>(ptr - (src.data() + i));
      t.kind = Tok::Number;
      t.number = v;
      t.text = std::string(src.substr(i, len));
      advance(len);
    } else {
      static const char* two[] = {"==", ">=", "<=", "!="};
      t.kind = Tok::Punct;
      bool matched = false;
      for (const char* p : two) {
        if (src.substr(i, 2) == p) {
          t.text = p;
          advance(2);
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (std::string_view("{}()[];,:&|!+-*=").find(c) == std::string_view::npos)
          throw ParseError(line, col, std::string("unexpected character '") + c + "'");
        t.text = std::string(1, c);
        advance(1);
      }
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.pos = {line, col};
  out.push_back(end);
  return out;
}

// ---- parser ---------------------------------------------------------------

struct Summand {
  std::vector<std::string> bound;
  bool has_sum = false;
  FormulaPtr guard;
  ExprPtr coef;
  std::vector<std::string> targets;
  SourcePos pos;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(lex(src)) {}

  Foqp run() {
    while (peek().kind != Tok::End) statement();
    return std::move(out_);
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  bool is_punct(std::string_view p, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Punct && peek(ahead).text == p;
  }
  bool is_word(std::string_view w) const { return peek().kind == Tok::Ident && peek().text == w; }

  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw ParseError(t.pos.line, t.pos.column, msg);
  }

  std::string describe(const Token& t) const {
    if (t.kind == Tok::End) return "end of input";
    return "'" + t.text + "'";
  }

  void expect(std::string_view p) {
    if (!is_punct(p)) fail(peek(), "expected '" + std::string(p) + "', found " + describe(peek()));
    next();
  }

  std::string ident(const char* what) {
    if (peek().kind != Tok::Ident) fail(peek(), std::string("expected ") + what + ", found " + describe(peek()));
    return next().text;
  }

  // Domain constants may be identifiers or integers.
  std::string constant_name() {
    const Token& t = peek();
    if (t.kind == Tok::Ident || t.kind == Tok::Number) return next().text;
    fail(t, "expected a constant, found " + describe(t));
  }

  std::uint64_t integer(const char* what) {
    const Token& t = peek();
    if (t.kind != Tok::Number || t.number < 0 || t.number != static_cast<double>(static_cast<std::uint64_t>(t.number)))
      fail(t, std::string("expected ") + what);
    next();
    return static_cast<std::uint64_t>(t.number);
  }

  void statement() {
    const Token& t = peek();
    if (t.kind != Tok::Ident) fail(t, "expected a declaration, found " + describe(t));
    if (t.text == "domain") return domain_decl();
    if (t.text == "var") return var_decl();
    if (t.text == "pred") return pred_decl();
    if (t.text == "fact") return fact_decl();
    if (t.text == "minimize") return objective();
    if (t.text == "constraint") return constraint();
    fail(t, "unknown statement " + describe(t));
  }

  void domain_decl() {
    next();
    DomainDecl d;
    const Token& name = peek();
    d.name = ident("domain name");
    if (out_.find_domain(d.name)) fail(name, "domain '" + d.name + "' declared twice");
    expect("=");
    expect("{");
    do {
      const Token& ct = peek();
      std::string c = constant_name();
      if (std::find(d.constants.begin(), d.constants.end(), c) != d.constants.end())
        fail(ct, "constant '" + c + "' repeated");
      d.constants.push_back(std::move(c));
    } while (is_punct(",") && (next(), true));
    expect("}");
    expect(";");
    out_.domains.push_back(std::move(d));
  }

  void var_decl() {
    next();
    const Token& name = peek();
    VarDecl v;
    v.name = ident("variable name");
    if (v.name != base_name(v.name)) fail(name, "declared names cannot end in a prime");
    if (v.name == "v") fail(name, "'v' is reserved for the decision function");
    if (out_.find_var(v.name)) fail(name, "variable '" + v.name + "' declared twice");
    if (is_punct("[")) {
      next();
      const Token& wt = peek();
      const std::uint64_t w = integer("a bit width");
      if (w > 62) fail(wt, "bit width too large");
      v.width = static_cast<int>(w);
      expect("]");
    } else if (is_punct(":")) {
      next();
      const Token& dt = peek();
      std::string dom = ident("domain name");
      const DomainDecl* d = out_.find_domain(dom);
      if (!d) fail(dt, "unknown domain '" + dom + "'");
      v.width = bits_for_size(d->constants.size());
      v.domain = dom;
    }
    expect(";");
    out_.vars.push_back(std::move(v));
  }

  void pred_decl() {
    next();
    const Token& name = peek();
    PredDecl p;
    p.name = ident("predicate name");
    if (out_.find_pred(p.name)) fail(name, "predicate '" + p.name + "' declared twice");
    expect("(");
    do {
      const Token& dt = peek();
      std::string dom = ident("domain name");
      if (!out_.find_domain(dom)) fail(dt, "unknown domain '" + dom + "'");
      p.arg_domains.push_back(std::move(dom));
    } while (is_punct(",") && (next(), true));
    expect(")");
    expect(";");
    out_.preds.push_back(std::move(p));
  }

  void fact_decl() {
    next();
    const Token& name = peek();
    Fact f;
    f.pred = ident("predicate name");
    const PredDecl* p = out_.find_pred(f.pred);
    if (!p) fail(name, "unknown predicate '" + f.pred + "'");
    expect("(");
    do {
      const Token& at = peek();
      std::string c = constant_name();
      const std::size_t k = f.args.size();
      if (k >= p->arg_domains.size()) fail(at, "too many arguments for '" + f.pred + "'");
      if (!out_.constant_index(*out_.find_domain(p->arg_domains[k]), c))
        fail(at, "'" + c + "' is not a constant of domain '" + p->arg_domains[k] + "'");
      f.args.push_back(std::move(c));
    } while (is_punct(",") && (next(), true));
    if (f.args.size() != p->arg_domains.size()) fail(name, "arity mismatch for '" + f.pred + "'");
    expect(")");
    expect(";");
    out_.facts.insert(std::move(f));
  }

  std::vector<std::string> name_list() {
    std::vector<std::string> names;
    do {
      names.push_back(ident("variable name"));
    } while (is_punct(",") && (next(), true));
    return names;
  }

  // ---- guards -------------------------------------------------------------

  FormulaPtr guard() { return guard_or(); }

  FormulaPtr guard_or() {
    FormulaPtr lhs = guard_and();
    while (is_punct("|")) {
      const Token& op = next();
      if (!starts_guard()) fail(op, "expected an operand after '|'");
      lhs = make(Formula{.kind = FormulaKind::Or, .lhs = lhs, .rhs = guard_and(), .pos = op.pos});
    }
    return lhs;
  }

  FormulaPtr guard_and() {
    FormulaPtr lhs = guard_unary();
    while (is_punct("&")) {
      const Token& op = next();
      if (!starts_guard()) fail(op, "expected an operand after '&'");
      lhs = make(Formula{.kind = FormulaKind::And, .lhs = lhs, .rhs = guard_unary(), .pos = op.pos});
    }
    return lhs;
  }

  bool starts_guard() const {
    const Token& t = peek();
    return t.kind == Tok::Ident || is_punct("!") || is_punct("(");
  }

  FormulaPtr guard_unary() {
    if (is_punct("!")) {
      const Token& op = next();
      if (!starts_guard()) fail(op, "expected an operand after '!'");
      return make(Formula{.kind = FormulaKind::Not, .lhs = guard_unary(), .pos = op.pos});
    }
    return guard_primary();
  }

  FormulaPtr guard_primary() {
    const Token& t = peek();
    if (is_punct("(")) {
      next();
      FormulaPtr g = guard();
      expect(")");
      return g;
    }
    if (t.kind != Tok::Ident) fail(t, "expected a formula, found " + describe(t));
    if (t.text == "true") {
      next();
      return make(Formula{.kind = FormulaKind::True, .pos = t.pos});
    }
    if (t.text == "false") {
      next();
      return make(Formula{.kind = FormulaKind::False, .pos = t.pos});
    }
    if (t.text == "exists" || t.text == "forall") {
      next();
      Formula q{.kind = t.text == "exists" ? FormulaKind::Exists : FormulaKind::Forall, .pos = t.pos};
      q.var = ident("quantified variable");
      if (is_word("in")) {
        next();
        q.domain = ident("domain name");
      }
      expect(":");
      q.lhs = guard();
      return make(std::move(q));
    }
    const std::string name = next().text;
    if (is_punct("(")) {
      next();
      Formula a{.kind = FormulaKind::Atom, .pred = name, .pos = t.pos};
      if (!is_punct(")")) {
        do {
          a.args.push_back(constant_name());
        } while (is_punct(",") && (next(), true));
      }
      expect(")");
      return make(std::move(a));
    }
    if (is_punct("[")) {
      next();
      const std::uint64_t b = integer("a bit index");
      expect("]");
      return make(Formula{.kind = FormulaKind::Bit, .var = name, .bit = static_cast<int>(b), .pos = t.pos});
    }
    if (is_punct("==") || is_punct("!=")) {
      const bool negate = next().text == "!=";
      Formula e{.kind = FormulaKind::EqVars, .var = name, .pos = t.pos};
      const Token& r = peek();
      if (r.kind == Tok::Number) {
        e.kind = FormulaKind::EqConst;
        e.constant = integer("a constant");
      } else {
        // Resolved later: a variable or a domain constant.
        e.var2 = ident("a variable or constant");
      }
      FormulaPtr f = make(std::move(e));
      return negate ? make(Formula{.kind = FormulaKind::Not, .lhs = f, .pos = t.pos}) : f;
    }
    return make(Formula{.kind = FormulaKind::Bit, .var = name, .bit = -1, .pos = t.pos});
  }

  // ---- expressions --------------------------------------------------------

  ExprPtr coef_expr() {
    ExprPtr lhs = coef_term();
    while (is_punct("+") || is_punct("-")) {
      const bool plus = next().text == "+";
      ExprPtr rhs = coef_term();
      lhs = plus ? e_add(lhs, rhs) : e_sub(lhs, rhs);
    }
    return lhs;
  }

  ExprPtr coef_term() {
    ExprPtr lhs = coef_factor();
    while (is_punct("*")) {
      next();
      lhs = e_mul(lhs, coef_factor());
    }
    return lhs;
  }

  ExprPtr coef_factor() {
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      next();
      return e_num(t.number);
    }
    if (is_punct("-")) {
      next();
      return e_neg(coef_factor());
    }
    if (is_punct("(")) {
      next();
      ExprPtr e = coef_expr();
      expect(")");
      return e;
    }
    if (is_punct("[")) {
      next();
      FormulaPtr g = guard();
      expect("]");
      return e_ind(g);
    }
    if (t.kind == Tok::Ident && t.text == "v") fail(t, "the decision function cannot appear here");
    fail(t, "expected a number, '[' or '(', found " + describe(t));
  }

  // ---- summands -----------------------------------------------------------

  Summand summand(bool negate) {
    Summand s;
    s.pos = peek().pos;
    if (is_word("sum")) {
      next();
      s.has_sum = true;
      expect("{");
      s.bound = name_list();
      if (is_punct(":")) {
        next();
        s.guard = guard();
      } else {
        s.guard = f_true();
      }
      expect("}");
    } else {
      s.guard = f_true();
    }
    ExprPtr coef;
    auto push_coef = [&](ExprPtr e) { coef = coef ? e_mul(coef, e) : e; };
    do {
      const Token& t = peek();
      if (t.kind == Tok::Ident && t.text == "v") {
        next();
        expect("(");
        s.targets.push_back(ident("variable name"));
        expect(")");
      } else {
        push_coef(coef_factor());
      }
    } while (is_punct("*") && (next(), true));
    if (!coef) coef = e_num(1.0);
    s.coef = negate ? e_neg(coef) : coef;
    return s;
  }

  std::vector<Summand> summands() {
    std::vector<Summand> out;
    bool negate = false;
    if (is_punct("-") || is_punct("+")) negate = next().text == "-";
    out.push_back(summand(negate));
    while (is_punct("+") || is_punct("-")) {
      negate = next().text == "-";
      out.push_back(summand(negate));
    }
    return out;
  }

  void objective() {
    const Token& kw = next();
    if (!out_.objective.empty() || !out_.quadratic.empty()) fail(kw, "more than one objective");
    for (Summand& s : summands()) {
      if (s.targets.size() == 1) {
        if (!s.has_sum) throw ParseError(s.pos.line, s.pos.column, "objective terms must be sums over a variable");
        out_.objective.push_back(LinearTerm{s.bound, s.guard, s.coef, s.targets[0], s.pos});
      } else if (s.targets.size() == 2) {
        if (!s.has_sum) throw ParseError(s.pos.line, s.pos.column, "objective terms must be sums over a variable");
        out_.quadratic.push_back(QuadTerm{s.bound, s.guard, s.coef, s.targets[0], s.targets[1], s.pos});
      } else {
        throw ParseError(s.pos.line, s.pos.column,
                         s.targets.empty() ? "constant objective terms are not supported"
                                           : "terms of degree above two are not supported");
      }
    }
    expect(";");
  }

  void constraint() {
    const Token& kw = next();
    ConstraintBlock c;
    c.pos = kw.pos;
    c.row_guard = f_true();
    if (is_punct("{")) {
      next();
      c.rows = name_list();
      if (is_punct(":")) {
        next();
        c.row_guard = guard();
      }
      expect("}");
    }
    expect(":");
    for (Summand& s : summands()) {
      if (s.targets.size() != 1)
        throw ParseError(s.pos.line, s.pos.column,
                         s.targets.empty() ? "constant terms belong on the right-hand side"
                                           : "constraint bodies must be linear");
      c.body.push_back(LinearTerm{s.has_sum ? s.bound : std::vector<std::string>{}, s.guard, s.coef,
                                  s.targets[0], s.pos});
    }
    const Token& st = peek();
    if (is_punct(">=")) {
      c.sense = Sense::Ge;
    } else if (is_punct("<=")) {
      c.sense = Sense::Le;
    } else if (is_punct("=") || is_punct("==")) {
      c.sense = Sense::Eq;
    } else {
      fail(st, "expected '>=', '<=' or '=', found " + describe(st));
    }
    next();
    c.rhs = coef_expr();
    expect(";");
    out_.constraints.push_back(std::move(c));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Foqp out_;
};

// ---- semantic checks ------------------------------------------------------

struct VarType {
  int width = 1;
  const DomainDecl* domain = nullptr;
};

using Scope = std::map<std::string, VarType>;

class Checker {
 public:
  explicit Checker(Foqp& f) : f_(f) {}

  void run() {
    int width = -1;
    auto check_target = [&](const std::string& name, const Scope& scope, SourcePos pos) {
      auto it = scope.find(name);
      if (it == scope.end()) throw ParseError(pos.line, pos.column, "v(" + name + "): '" + name + "' is not bound here");
      if (width < 0) width = it->second.width;
      if (it->second.width != width)
        throw ParseError(pos.line, pos.column, "v(" + name + "): argument width differs from other uses of v");
    };
    for (auto& t : f_.objective) {
      Scope s = bind(t.bound, {}, t.pos);
      t.guard = formula(t.guard, s);
      t.coef = expr(t.coef, s);
      check_target(t.target, s, t.pos);
    }
    for (auto& q : f_.quadratic) {
      Scope s = bind(q.bound, {}, q.pos);
      q.guard = formula(q.guard, s);
      q.coef = expr(q.coef, s);
      check_target(q.left, s, q.pos);
      check_target(q.right, s, q.pos);
      if (q.left == q.right) throw ParseError(q.pos.line, q.pos.column, "quadratic terms need two distinct variables");
    }
    for (auto& c : f_.constraints) {
      Scope rows = bind(c.rows, {}, c.pos);
      c.row_guard = formula(c.row_guard, rows);
      c.rhs = expr(c.rhs, rows);
      for (auto& t : c.body) {
        Scope s = bind(t.bound, rows, t.pos);
        t.guard = formula(t.guard, s);
        t.coef = expr(t.coef, s);
        check_target(t.target, s, t.pos);
      }
    }
  }

 private:
  [[noreturn]] static void fail(SourcePos p, const std::string& msg) { throw ParseError(p.line, p.column, msg); }

  VarType type_of_decl(const std::string& name, SourcePos pos) const {
    const VarDecl* d = f_.find_var(name);
    if (!d) fail(pos, "unknown variable '" + name + "'");
    return VarType{d->width, d->domain ? f_.find_domain(*d->domain) : nullptr};
  }

  Scope bind(const std::vector<std::string>& names, Scope scope, SourcePos pos) const {
    for (const auto& n : names) {
      if (scope.contains(n)) fail(pos, "variable '" + n + "' bound twice");
      scope[n] = type_of_decl(n, pos);
    }
    return scope;
  }

  ExprPtr expr(const ExprPtr& e, const Scope& s) const {
    switch (e->kind) {
      case ExprKind::Number:
        return e;
      case ExprKind::Indicator: {
        FormulaPtr g = formula(e->guard, s);
        return g == e->guard ? e : e_ind(g);
      }
      case ExprKind::Neg: {
        ExprPtr a = expr(e->lhs, s);
        return a == e->lhs ? e : e_neg(a);
      }
      default: {
        ExprPtr a = expr(e->lhs, s), b = expr(e->rhs, s);
        if (a == e->lhs && b == e->rhs) return e;
        return make(Expr{.kind = e->kind, .lhs = a, .rhs = b});
      }
    }
  }

  // Validates names and resolves `x == name` into EqVars or EqConst.
  FormulaPtr formula(const FormulaPtr& f, const Scope& s) const {
    auto lookup = [&](const std::string& name) -> const VarType& {
      auto it = s.find(name);
      if (it == s.end()) fail(f->pos, "'" + name + "' is not bound here");
      return it->second;
    };
    switch (f->kind) {
      case FormulaKind::True:
      case FormulaKind::False:
      case FormulaKind::Prop:
        return f;
      case FormulaKind::Bit: {
        const VarType& t = lookup(f->var);
        if (f->bit < 0) {
          if (t.width != 1) fail(f->pos, "'" + f->var + "' has " + std::to_string(t.width) + " bits; select one with []");
          Formula g = *f;
          g.bit = 0;
          return make(std::move(g));
        }
        if (f->bit >= t.width) fail(f->pos, "bit index out of range for '" + f->var + "'");
        return f;
      }
      case FormulaKind::Not: {
        FormulaPtr a = formula(f->lhs, s);
        if (a == f->lhs) return f;
        Formula g = *f;
        g.lhs = a;
        return make(std::move(g));
      }
      case FormulaKind::And:
      case FormulaKind::Or: {
        FormulaPtr a = formula(f->lhs, s), b = formula(f->rhs, s);
        if (a == f->lhs && b == f->rhs) return f;
        Formula g = *f;
        g.lhs = a;
        g.rhs = b;
        return make(std::move(g));
      }
      case FormulaKind::EqConst: {
        const VarType& t = lookup(f->var);
        const std::uint64_t limit = t.domain ? t.domain->constants.size() : (std::uint64_t{1} << t.width);
        if (f->constant >= limit) fail(f->pos, "constant out of range for '" + f->var + "'");
        return f;
      }
      case FormulaKind::EqVars: {
        const VarType& t = lookup(f->var);
        if (auto it = s.find(f->var2); it != s.end()) {
          if (it->second.width != t.width) fail(f->pos, "comparing variables of different widths");
          return f;
        }
        if (!t.domain) fail(f->pos, "'" + f->var2 + "' is not bound here");
        auto idx = f_.constant_index(*t.domain, f->var2);
        if (!idx) fail(f->pos, "'" + f->var2 + "' is not a constant of domain '" + t.domain->name + "'");
        Formula g = *f;
        g.kind = FormulaKind::EqConst;
        g.var2.clear();
        g.constant = *idx;
        return make(std::move(g));
      }
      case FormulaKind::Atom: {
        const PredDecl* p = f_.find_pred(f->pred);
        if (!p) fail(f->pos, "unknown predicate '" + f->pred + "'");
        if (p->arg_domains.size() != f->args.size()) fail(f->pos, "arity mismatch for '" + f->pred + "'");
        for (std::size_t i = 0; i < f->args.size(); ++i) {
          const DomainDecl* d = f_.find_domain(p->arg_domains[i]);
          if (auto it = s.find(f->args[i]); it != s.end()) {
            if (it->second.domain != d)
              fail(f->pos, "argument '" + f->args[i] + "' of '" + f->pred + "' is not of domain '" + d->name + "'");
          } else if (!f_.constant_index(*d, f->args[i])) {
            fail(f->pos, "'" + f->args[i] + "' is neither bound nor a constant of '" + d->name + "'");
          }
        }
        return f;
      }
      case FormulaKind::Exists:
      case FormulaKind::Forall: {
        if (s.contains(f->var)) fail(f->pos, "quantified variable '" + f->var + "' shadows another binding");
        Scope inner = s;
        Formula g = *f;
        if (!f->domain.empty()) {
          const DomainDecl* d = f_.find_domain(f->domain);
          if (!d) fail(f->pos, "unknown domain '" + f->domain + "'");
          inner[f->var] = VarType{bits_for_size(d->constants.size()), d};
        } else if (f_.find_var(f->var)) {
          inner[f->var] = type_of_decl(f->var, f->pos);
        } else if (f_.domains.size() == 1) {
          g.domain = f_.domains.front().name;
          inner[f->var] = VarType{bits_for_size(f_.domains.front().constants.size()), &f_.domains.front()};
        } else {
          fail(f->pos, "unbounded quantifier: '" + f->var + "' has no declared domain");
        }
        g.lhs = formula(f->lhs, inner);
        if (g.lhs == f->lhs && g.domain == f->domain) return f;
        return make(std::move(g));
      }
    }
    return f;
  }

  Foqp& f_;
};

}  // namespace

Foqp parse(std::string_view source) {
  Foqp f = Parser(source).run();
  Checker(f).run();
  return f;
}

// ---- propositionalization -------------------------------------------------

namespace {

// Quantifier elimination and atom grounding. Variables are substituted by
// constant values (domain indices or bit-vector values).
class Grounder {
 public:
  Grounder(const Foqp& f, const std::set<std::string>& open) : f_(f), open_(open) {}

  FormulaPtr run(const FormulaPtr& g) {
    std::map<std::string, std::uint64_t> env;
    return rec(g, env);
  }

  ExprPtr run(const ExprPtr& e) {
    switch (e->kind) {
      case ExprKind::Number:
        return e;
      case ExprKind::Indicator: {
        FormulaPtr g = run(e->guard);
        return g == e->guard ? e : e_ind(g);
      }
      case ExprKind::Neg: {
        ExprPtr a = run(e->lhs);
        return a == e->lhs ? e : e_neg(a);
      }
      default: {
        ExprPtr a = run(e->lhs), b = run(e->rhs);
        if (a == e->lhs && b == e->rhs) return e;
        return make(Expr{.kind = e->kind, .lhs = a, .rhs = b});
      }
    }
  }

 private:
  struct QuantType {
    int width;
    const DomainDecl* domain;
  };

  QuantType quant_type(const Formula& q) const {
    if (!q.domain.empty()) {
      const DomainDecl* d = f_.find_domain(q.domain);
      if (!d) throw InvalidArgument("unknown domain '" + q.domain + "'");
      return {bits_for_size(d->constants.size()), d};
    }
    const VarDecl* v = f_.find_var(q.var);
    if (!v) throw InvalidArgument("unbounded quantifier: '" + q.var + "' has no declared domain");
    return {v->width, v->domain ? f_.find_domain(*v->domain) : nullptr};
  }

  FormulaPtr rec(const FormulaPtr& g, std::map<std::string, std::uint64_t>& env) {
    switch (g->kind) {
      case FormulaKind::True:
      case FormulaKind::False:
      case FormulaKind::Prop:
        return g;
      case FormulaKind::Bit: {
        auto it = env.find(g->var);
        if (it == env.end()) return g;
        const VarDecl* d = f_.find_var(g->var);
        const int width = d && !quantified_fresh(g->var) ? d->width : widths_.at(g->var);
        return ((it->second >> (width - 1 - g->bit)) & 1u) ? f_true() : f_false();
      }
      case FormulaKind::Not: {
        FormulaPtr a = rec(g->lhs, env);
        if (a == g->lhs) return g;
        return f_not(a);
      }
      case FormulaKind::And:
      case FormulaKind::Or: {
        FormulaPtr a = rec(g->lhs, env), b = rec(g->rhs, env);
        if (a == g->lhs && b == g->rhs) return g;
        return g->kind == FormulaKind::And ? f_and(a, b) : f_or(a, b);
      }
      case FormulaKind::EqConst: {
        auto it = env.find(g->var);
        if (it == env.end()) return g;
        return it->second == g->constant ? f_true() : f_false();
      }
      case FormulaKind::EqVars: {
        auto a = env.find(g->var), b = env.find(g->var2);
        if (a == env.end() && b == env.end()) return g;
        if (a != env.end() && b != env.end()) return a->second == b->second ? f_true() : f_false();
        if (a != env.end()) return f_eq_const(g->var2, a->second);
        return f_eq_const(g->var, b->second);
      }
      case FormulaKind::Atom:
        return atom(*g, env);
      case FormulaKind::Exists:
      case FormulaKind::Forall: {
        const QuantType t = quant_type(*g);
        const std::uint64_t count = t.domain ? t.domain->constants.size() : (std::uint64_t{1} << t.width);
        if (count > (std::uint64_t{1} << 20)) throw InvalidArgument("quantifier range too large");
        const bool fresh = !g->domain.empty();
        if (fresh) {
          fresh_.insert(g->var);
          widths_[g->var] = t.width;
        }
        const bool exists = g->kind == FormulaKind::Exists;
        FormulaPtr acc = exists ? f_false() : f_true();
        for (std::uint64_t c = 0; c < count; ++c) {
          env[g->var] = c;
          FormulaPtr body = rec(g->lhs, env);
          acc = exists ? f_or(acc, body) : f_and(acc, body);
          if (acc->kind == (exists ? FormulaKind::True : FormulaKind::False)) break;
        }
        env.erase(g->var);
        if (fresh) {
          fresh_.erase(g->var);
          widths_.erase(g->var);
        }
        return acc;
      }
    }
    return g;
  }

  bool quantified_fresh(const std::string& name) const { return fresh_.contains(name); }

  // P(t1..tk): arguments bound in env or constants are fixed; the remaining
  // variable arguments range over the facts that match the fixed ones.
  FormulaPtr atom(const Formula& g, const std::map<std::string, std::uint64_t>& env) {
    const PredDecl* p = f_.find_pred(g.pred);
    if (!p) throw InvalidArgument("unknown predicate '" + g.pred + "'");
    const std::size_t k = g.args.size();
    std::vector<std::optional<std::uint64_t>> fixed(k);
    std::vector<const DomainDecl*> doms(k);
    for (std::size_t i = 0; i < k; ++i) {
      doms[i] = f_.find_domain(p->arg_domains[i]);
      if (auto it = env.find(g.args[i]); it != env.end()) {
        fixed[i] = it->second;
      } else if (!is_variable(g.args[i])) {
        fixed[i] = f_.constant_index(*doms[i], g.args[i]);
        if (!fixed[i]) throw InvalidArgument("'" + g.args[i] + "' is not a constant of '" + doms[i]->name + "'");
      }
    }
    const bool open = open_.contains(g.pred);
    if (open) {
      // Enumerate all tuples of the free arguments and guard each open
      // proposition with the equalities that select it.
      FormulaPtr acc = f_false();
      std::vector<std::uint64_t> cur(k);
      std::function<void(std::size_t, FormulaPtr)> walk = [&](std::size_t i, FormulaPtr cond) {
        if (i == k) {
          Formula prop{.kind = FormulaKind::Prop, .pred = g.pred};
          for (std::size_t j = 0; j < k; ++j) prop.args.push_back(doms[j]->constants[cur[j]]);
          acc = f_or(acc, f_and(cond, make(std::move(prop))));
          return;
        }
        if (fixed[i]) {
          cur[i] = *fixed[i];
          walk(i + 1, cond);
          return;
        }
        for (std::uint64_t c = 0; c < doms[i]->constants.size(); ++c) {
          cur[i] = c;
          walk(i + 1, f_and(cond, f_eq_const(g.args[i], c)));
        }
      };
      walk(0, f_true());
      return acc;
    }
    FormulaPtr acc = f_false();
    for (const Fact& fact : f_.facts) {
      if (fact.pred != g.pred) continue;
      FormulaPtr conj = f_true();
      std::map<std::string, std::uint64_t> seen;
      for (std::size_t i = 0; i < k && conj->kind != FormulaKind::False; ++i) {
        const std::uint64_t c = *f_.constant_index(*doms[i], fact.args[i]);
        if (fixed[i]) {
          if (*fixed[i] != c) conj = f_false();
        } else if (auto it = seen.find(g.args[i]); it != seen.end()) {
          if (it->second != c) conj = f_false();
        } else {
          seen[g.args[i]] = c;
          conj = f_and(conj, f_eq_const(g.args[i], c));
        }
      }
      acc = f_or(acc, conj);
    }
    return acc;
  }

  bool is_variable(const std::string& name) const {
    return f_.find_var(name) != nullptr || fresh_.contains(name);
  }

  const Foqp& f_;
  const std::set<std::string>& open_;
  std::set<std::string> fresh_;
  std::map<std::string, int> widths_;
};

bool has_quantifier(const FormulaPtr& g) {
  switch (g->kind) {
    case FormulaKind::Atom:
    case FormulaKind::Exists:
    case FormulaKind::Forall:
      return true;
    case FormulaKind::Not:
      return has_quantifier(g->lhs);
    case FormulaKind::And:
    case FormulaKind::Or:
      return has_quantifier(g->lhs) || has_quantifier(g->rhs);
    default:
      return false;
  }
}

bool has_quantifier(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Number:
      return false;
    case ExprKind::Indicator:
      return has_quantifier(e->guard);
    case ExprKind::Neg:
      return has_quantifier(e->lhs);
    default:
      return has_quantifier(e->lhs) || has_quantifier(e->rhs);
  }
}

}  // namespace

Foqp propositionalize(const Foqp& f, const std::set<std::string>& open) {
  Foqp out = f;
  Grounder g(f, open);
  for (auto& t : out.objective) {
    t.guard = g.run(t.guard);
    t.coef = g.run(t.coef);
  }
  for (auto& q : out.quadratic) {
    q.guard = g.run(q.guard);
    q.coef = g.run(q.coef);
  }
  for (auto& c : out.constraints) {
    c.row_guard = g.run(c.row_guard);
    c.rhs = g.run(c.rhs);
    for (auto& t : c.body) {
      t.guard = g.run(t.guard);
      t.coef = g.run(t.coef);
    }
  }
  return out;
}

bool quantifier_free(const Foqp& f) {
  for (const auto& t : f.objective)
    if (has_quantifier(t.guard) || has_quantifier(t.coef)) return false;
  for (const auto& q : f.quadratic)
    if (has_quantifier(q.guard) || has_quantifier(q.coef)) return false;
  for (const auto& c : f.constraints) {
    if (has_quantifier(c.row_guard) || has_quantifier(c.rhs)) return false;
    for (const auto& t : c.body)
      if (has_quantifier(t.guard) || has_quantifier(t.coef)) return false;
  }
  return true;
}

}  // namespace symqp
