#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "symqp/bpdn.hpp"
#include "symqp/error.hpp"
#include "symqp/ground.hpp"
#include "symqp/ipm.hpp"

using namespace symqp;

namespace {

double rel_l2(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace

TEST_CASE("instance invariants") {
  for (RowSelection sel : {RowSelection::Leading, RowSelection::Random}) {
    BpdnInstance inst = make_bpdn({.log_n = 7, .log_m = 5, .k = 6, .seed = 3, .selection = sel});
    CHECK(inst.sparsity() == 6);
    CHECK(inst.rows.size() == 32);
    for (std::size_t j = 0; j < inst.rows.size(); ++j) {
      double v = 0.0;
      for (std::uint64_t i = 0; i < inst.n(); ++i) {
        const double w = (std::popcount(inst.rows[j] & i) & 1) ? -1.0 : 1.0;
        v += w * inst.x_true[i];
      }
      CHECK(std::abs(v - inst.b[j]) <= 1e-12);
    }
  }
  BpdnInstance lead = make_bpdn({.log_n = 6, .log_m = 3, .k = 2, .selection = RowSelection::Leading});
  for (std::size_t j = 0; j < 8; ++j) CHECK(lead.rows[j] == j);
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS(make_bpdn({.log_n = 6, .log_m = 6}), InvalidArgument);
  CHECK_THROWS_AS(make_bpdn({.log_n = 6, .log_m = 2, .k = 5}), InvalidArgument);
  CHECK_THROWS_AS(make_bpdn({.log_n = 6, .log_m = 3, .k = 2, .tau = 0.0}), InvalidArgument);
  CHECK_THROWS_AS(make_bpdn({.log_n = 0, .log_m = 0}), InvalidArgument);
}

TEST_CASE("zero sparsity gives the zero signal") {
  BpdnInstance inst = make_bpdn({.log_n = 6, .log_m = 4, .k = 0, .tau = 0.5});
  AddManager m;
  const SolveReport rep = ipm_solve(bpdn_qp(inst, m));
  REQUIRE(rep.status == SolveStatus::Optimal);
  for (double v : bpdn_signal(inst, rep.x)) CHECK(std::abs(v) <= 1e-6);
}

TEST_CASE("Walsh factor matches the fast transform at n = 4096") {
  BpdnInstance inst = make_bpdn({.log_n = 12, .log_m = 10, .k = 5});
  AddManager m;
  const QpStandard qp = bpdn_qp(inst, m);
  REQUIRE(qp.q_factor.has_value());
  oracle::Rng rng(11);
  std::vector<double> v = oracle::random_vector(rng, inst.n());
  std::vector<double> z(2 * inst.n(), 0.0);
  std::copy(v.begin(), v.end(), z.begin());
  const std::vector<double> got = vec_to_dense(matvec(qp.q_factor->F, vec_from_dense(m, qp.col_bits, z)));
  oracle::fwht(v);
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(got[i] - v[i]));
  CHECK(worst <= 1e-10);
}

TEST_CASE("symbolic, ground and proximal-gradient solutions agree") {
  for (RowSelection sel : {RowSelection::Leading, RowSelection::Random}) {
    BpdnInstance inst = make_bpdn({.log_n = 7, .log_m = 5, .k = 4, .tau = 0.5, .seed = 5, .selection = sel});
    const oracle::IstaResult ref = oracle::ista_walsh(inst.rows, inst.b, inst.n(), inst.tau);
    AddManager m;
    const QpStandard qp = bpdn_qp(inst, m);
    const SolveReport rep = ipm_solve(qp);
    REQUIRE(rep.status == SolveStatus::Optimal);
    const std::vector<double> x = bpdn_signal(inst, rep.x);
    CHECK(bpdn_objective(inst, x) == doctest::Approx(ref.objective).epsilon(1e-3));
    CHECK(rep.objective + bpdn_offset(inst) == doctest::Approx(ref.objective).epsilon(1e-3));
    const SolveReport grep = ground_ipm_solve(ground_qp(qp));
    REQUIRE(grep.status == SolveStatus::Optimal);
    CHECK(grep.objective == doctest::Approx(rep.objective).epsilon(1e-4));
  }
}

TEST_CASE("random rows recover a sparse signal") {
  BpdnInstance inst = make_bpdn({.log_n = 9, .log_m = 7, .k = 8, .tau = 0.01, .seed = 2});
  AddManager m;
  const SolveReport rep = ipm_solve(bpdn_qp(inst, m));
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(rel_l2(bpdn_signal(inst, rep.x), inst.x_true) <= 1e-2);
}

TEST_CASE("file round trip") {
  BpdnInstance inst = make_bpdn({.log_n = 6, .log_m = 4, .k = 3, .tau = 0.25, .seed = 9});
  std::stringstream ss;
  write_bpdn(ss, inst);
  const BpdnInstance back = read_bpdn(ss);
  CHECK(back.rows == inst.rows);
  CHECK(back.b == inst.b);
  CHECK(back.x_true == inst.x_true);
  CHECK(back.tau == inst.tau);
  std::stringstream bad("{\"format\": \"other\"}");
  CHECK_THROWS_AS(read_bpdn(bad), InvalidArgument);
}
