#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "random_programs.hpp"
#include "symqp/error.hpp"
#include "symqp/foqp.hpp"
#include "symqp/ground.hpp"
#include "symqp/qp.hpp"

using namespace symqp;

namespace {

const char* kXy = R"(
# minimize v(x) + v(!x) subject to two constraint blocks
var x;
var y;
minimize sum{x : true} v(x);
constraint {y : true}: sum{x : x | y} v(x) >= 1;
constraint {y : true}: v(y) >= 0;
)";

const char* kFriends = R"(
domain D = {a, b, c};
pred Friends(D, D);
fact Friends(b, a);
fact Friends(b, c);
var x : D;
var z : D;
minimize sum{x : exists z: Friends(z, x)} v(x);
)";

Eigen::MatrixXd dense(const MatF& a) { return mat_to_dense(a); }
Eigen::VectorXd dense(const VecF& v) { return to_eigen(v); }

}  // namespace

TEST_CASE("worked example compiles to its canonical form") {
  Foqp f = parse(kXy);
  CHECK(f.constraints.size() == 2);
  AddManager m;
  QpStandard qp = compile(f, m);
  Eigen::MatrixXd a(4, 2);
  a << 0, 1, 1, 1, 1, 0, 0, 1;
  CHECK(dense(qp.A) == a);
  CHECK(dense(qp.b) == Eigen::Vector4d(1, 1, 0, 0));
  CHECK(dense(qp.c) == Eigen::Vector2d(1, 1));
  QpStats s = stats(qp);
  CHECK(s.vars == 2);
  CHECK(s.constraints == 4);
  CHECK(s.nnz_a == 5);
  CHECK(qp.q_zero());

  GroundProgram g = ground(f);
  CHECK(g.A == a);
  CHECK(g.b == Eigen::Vector4d(1, 1, 0, 0));
  GroundQp gq = ground_qp(qp);
  CHECK(gq.A.nonZeros() == 5);
  CHECK(Eigen::MatrixXd(gq.A) == a);
}

TEST_CASE("objective-only program") {
  Foqp f = parse("var x[2];\nminimize sum{x : x[0]} 3 * v(x);\n");
  CHECK(f.constraints.empty());
  AddManager m;
  QpStandard qp = compile(f, m);
  CHECK(m.is_terminal(qp.A.fun));
  CHECK(qp.A.fun == m.zero());
  CHECK(dense(qp.c) == Eigen::Vector4d(0, 0, 3, 3));
  CHECK(dense(qp.col_mask) == Eigen::Vector4d(0, 0, 1, 1));
  CHECK_FALSE(qp.has_rows());
}

TEST_CASE("syntax errors carry positions") {
  try {
    parse("var x;\nvar y;\nminimize sum{x : true} v(x);\nconstraint {y : x |}: sum{x : true} v(x) >= 1;\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(e.column() == 19);
  }
  CHECK_THROWS_AS(parse("var x;\nminimize sum{x : q} v(x);"), ParseError);
  CHECK_THROWS_AS(parse("var x;\nminimize sum{x : true} v(w);"), ParseError);
  CHECK_THROWS_AS(parse("domain D = {a};\npred P(D);\nvar x : D;\nminimize sum{x : P(x, x)} v(x);"), ParseError);
  CHECK_THROWS_AS(parse("var x;\nminimize sum{x : true} v(x)"), ParseError);
  CHECK_THROWS_AS(parse("var x[2];\nminimize sum{x : x} v(x);"), ParseError);
  CHECK_THROWS_AS(parse("var x;\nvar x;"), ParseError);
  CHECK_THROWS_AS(parse("var x; var y[2];\nminimize sum{x : true} v(x) + sum{y : true} v(y);"), ParseError);
}

TEST_CASE("quantifiers follow the formal semantics") {
  Foqp f = parse(kFriends);
  CHECK_FALSE(quantifier_free(f));
  Foqp p = propositionalize(f);
  CHECK(quantifier_free(p));
  AddManager m;
  QpStandard qp = compile(p, m);
  // x ranges over {a, b, c}; some z is a friend of a and of c
  CHECK(dense(qp.c) == Eigen::Vector4d(1, 0, 1, 0));
  GroundProgram g = ground(f);
  CHECK(g.c == Eigen::Vector4d(1, 0, 1, 0));
  AddManager m2;
  CHECK(dense(compile(f, m2).c) == Eigen::Vector4d(1, 0, 1, 0));
}

TEST_CASE("propositionalize leaves quantifier-free programs unchanged") {
  Foqp f = parse(kXy);
  Foqp p = propositionalize(f);
  CHECK(p.objective[0].guard == f.objective[0].guard);
  CHECK(p.constraints[0].body[0].guard == f.constraints[0].body[0].guard);
  CHECK(p.constraints[1].row_guard == f.constraints[1].row_guard);
}

TEST_CASE("universal over an open predicate") {
  Foqp f = parse("domain D = {0, 1};\npred P(D);\nvar x;\nminimize sum{x : forall w: P(w)} v(x);\n");
  Foqp p = propositionalize(f, {"P"});
  CHECK(to_string(p.objective[0].guard) == "(P(0) & P(1))");
  AddManager m;
  CHECK_THROWS_AS(compile(p, m), UnsupportedStructure);
  // closed world: no facts, so the guard is false
  CHECK(propositionalize(f).objective[0].guard->kind == FormulaKind::False);
}

TEST_CASE("unbounded quantifier is rejected") {
  CHECK_THROWS_AS(parse("domain D = {a};\ndomain E = {b};\nvar x;\nminimize sum{x : exists w: x} v(x);"), ParseError);
  CHECK_NOTHROW(parse("domain D = {a};\ndomain E = {b};\nvar x;\nminimize sum{x : exists w in E: x} v(x);"));
}

TEST_CASE("compile equals ground on random programs") {
  oracle::ProgramGen gen(99);
  for (int i = 0; i < 60; ++i) {
    const std::string src = gen.next();
    CAPTURE(src);
    Foqp f = parse(src);
    AddManager m;
    QpStandard qp = compile(f, m);
    GroundProgram g = ground(f);
    CHECK(dense(qp.A) == g.A);
    CHECK(dense(qp.b) == g.b);
    CHECK(dense(qp.c) == g.c);
    CHECK(dense(qp.Q) == g.Q);
    CHECK(dense(qp.row_mask) == g.row_mask);
    CHECK(dense(qp.ge_mask) == g.ge_mask);
    CHECK(dense(qp.col_mask) == g.col_mask);

    // masked rows and columns are structurally zero
    Eigen::MatrixXd a = g.A;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      if (g.row_mask(r) == 0.0) CHECK(a.row(r).isZero(0.0));
    for (Eigen::Index j = 0; j < g.c.size(); ++j)
      if (g.col_mask(j) == 0.0) CHECK(g.c(j) == 0.0);
    CHECK(g.Q == g.Q.transpose());

    // deterministic compilation
    QpStandard again = compile(parse(src), m);
    CHECK(again.A.fun == qp.A.fun);
    CHECK(again.Q.fun == qp.Q.fun);
    CHECK(again.col_mask.fun == qp.col_mask.fun);

    GroundQp gq = ground_qp(qp);
    CHECK(Eigen::MatrixXd(gq.A) == g.A);
    CHECK(static_cast<std::uint64_t>(gq.A.nonZeros()) == stats(qp).nnz_a);
  }
}

TEST_CASE("ground budget") {
  Foqp f = parse("var x[8];\nvar y[10];\nminimize sum{x : true} v(x);\nconstraint {y : true}: sum{x : true} v(x) >= 1;");
  CHECK_THROWS_AS(ground(f, 12), InvalidArgument);
}

TEST_CASE("coordinate format round trip") {
  AddManager m;
  QpStandard qp = compile(parse(kXy), m);
  GroundQp g = ground_qp(qp);
  std::stringstream ss;
  write_coordinate(ss, g.A);
  SparseMatrix back = read_coordinate(ss);
  CHECK(Eigen::MatrixXd(back) == Eigen::MatrixXd(g.A));
  std::stringstream bad("2 2 1\n5 0 1\n");
  CHECK_THROWS_AS(read_coordinate(bad), DimensionError);
}

TEST_CASE("structure dump") {
  AddManager m;
  QpStandard qp = compile(parse(kXy), m);
  const std::string js = structure_json(qp);
  CHECK(js.find("\"nnz_A\": 5") != std::string::npos);
  CHECK(js.find("\"active_rows\": 4") != std::string::npos);
}
