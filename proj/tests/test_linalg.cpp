#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "symqp/error.hpp"
#include "symqp/linalg.hpp"

using namespace symqp;

namespace {

struct Layout {
  std::vector<VarId> rows, cols;
};

// Interleaved row/column bits r0 c0 r1 c1 ...; extra bits of the longer side
// follow.
Layout interleaved(AddManager& m, std::size_t nr, std::size_t nc) {
  Layout l;
  for (std::size_t i = 0; i < std::max(nr, nc); ++i) {
    if (i < nr) l.rows.push_back(m.new_var("r" + std::to_string(i)));
    if (i < nc) l.cols.push_back(m.new_var("c" + std::to_string(i)));
  }
  return l;
}

int bits_for(Eigen::Index n) {
  int b = 0;
  while ((Eigen::Index{1} << b) < n) ++b;
  return b;
}

}  // namespace

TEST_CASE("vector round trip and padding") {
  AddManager m;
  auto bits = named_bits(m, "i", 3);
  std::vector<double> v{1, 2, 3, 4, 5};
  VecF f = vec_from_dense(m, bits, v);
  CHECK(f.length == 5);
  CHECK(f.padded_length() == 8);
  CHECK(vec_to_dense(f) == v);
  CHECK(vec_at(f, 6) == 0.0);
  CHECK(vec_at(f, 3) == 4.0);
  CHECK(element_sum(f) == 15.0);
  std::vector<double> too_long(9, 1.0);
  CHECK_THROWS_AS(vec_from_dense(m, bits, too_long), DimensionError);
}

TEST_CASE("matrix round trip") {
  oracle::Rng rng(1);
  AddManager m;
  auto l = interleaved(m, 3, 3);
  Eigen::MatrixXd a = oracle::random_dense(rng, 8, 8);
  MatF f = mat_from_dense(m, l.rows, l.cols, a);
  CHECK(mat_to_dense(f) == a);
  Eigen::MatrixXd odd = oracle::random_dense(rng, 5, 7);
  CHECK(mat_to_dense(mat_from_dense(m, l.rows, l.cols, odd)) == odd);
  MatF z = mat_from_dense(m, l.rows, l.cols, Eigen::MatrixXd::Zero(8, 8));
  CHECK(m.node_count(z.fun) == 1);
}

TEST_CASE("identity, walsh and row extraction") {
  AddManager m;
  auto l = interleaved(m, 3, 3);
  MatF id = identity(m, l.rows, l.cols);
  CHECK(mat_to_dense(id) == Eigen::MatrixXd::Identity(8, 8));
  // pinned: one node per bit pair test plus two terminals
  CHECK(m.node_count(id.fun) == 3 * 3 + 2);
  std::vector<double> v{1, -2, 3, 0.5, 0, 7, -1, 2};
  VecF vf = vec_from_dense(m, l.cols, v);
  CHECK(vec_to_dense(matvec(id, vf)) == v);
  CHECK(vec_to_dense(matvec_t(id, vec_from_dense(m, l.rows, v))) == v);
  for (std::uint64_t i = 0; i < 8; ++i) {
    auto row = vec_to_dense(row_extract(id, i));
    for (std::uint64_t j = 0; j < 8; ++j) CHECK(row[j] == (i == j ? 1.0 : 0.0));
  }

  AddManager w;
  MatF w0 = walsh(w, {}, {});
  CHECK(mat_to_dense(w0) == Eigen::MatrixXd::Constant(1, 1, 1.0));
  auto l1 = interleaved(w, 2, 2);
  std::span<const VarId> r1(l1.rows.data(), 1), c1(l1.cols.data(), 1);
  Eigen::MatrixXd want1(2, 2);
  want1 << 1, 1, 1, -1;
  CHECK(mat_to_dense(walsh(w, r1, c1)) == want1);
  std::vector<double> e0{1, 0};
  CHECK(vec_to_dense(matvec(walsh(w, r1, c1), vec_from_dense(w, c1, e0))) == std::vector<double>{1, 1});
  CHECK(vec_to_dense(row_extract(walsh(w, l1.rows, l1.cols), 0)) == std::vector<double>{1, 1, 1, 1});
  CHECK_THROWS_AS(row_extract(id, 8), DimensionError);
}

TEST_CASE("matvec and matvec_t agree with dense products") {
  oracle::Rng rng(2);
  std::uniform_int_distribution<int> dim(1, 64);
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index r = dim(rng), c = dim(rng);
    AddManager m;
    auto l = interleaved(m, bits_for(r), bits_for(c));
    Eigen::MatrixXd a = oracle::random_dense(rng, r, c, trial % 2 ? 0.3 : 1.0);
    MatF af = mat_from_dense(m, l.rows, l.cols, a);
    auto x = oracle::random_vector(rng, static_cast<std::size_t>(c));
    auto y = oracle::random_vector(rng, static_cast<std::size_t>(r));
    auto ax = vec_to_dense(matvec(af, vec_from_dense(m, l.cols, x)));
    auto aty = vec_to_dense(matvec_t(af, vec_from_dense(m, l.rows, y)));
    CHECK(oracle::rel_err(oracle::as_eigen(ax), a * oracle::as_eigen(x)) <= 1e-12);
    CHECK(oracle::rel_err(oracle::as_eigen(aty), a.transpose() * oracle::as_eigen(y)) <= 1e-12);
  }
}

TEST_CASE("matvec_t on unit vectors returns rows") {
  oracle::Rng rng(21);
  AddManager m;
  auto l = interleaved(m, 4, 4);
  Eigen::MatrixXd a = oracle::random_dense(rng, 16, 16);
  MatF af = mat_from_dense(m, l.rows, l.cols, a);
  for (std::uint64_t i = 0; i < 16; ++i) {
    auto row = oracle::as_eigen(vec_to_dense(matvec_t(af, unit_vec(m, l.rows, i))));
    CHECK((row - a.row(static_cast<Eigen::Index>(i)).transpose()).norm() == 0.0);
    auto extracted = oracle::as_eigen(vec_to_dense(row_extract(af, i)));
    CHECK((extracted - a.row(static_cast<Eigen::Index>(i)).transpose()).norm() == 0.0);
  }
}

TEST_CASE("matvec renames vectors over other bits") {
  oracle::Rng rng(22);
  AddManager m;
  auto l = interleaved(m, 3, 3);
  auto other = named_bits(m, "o", 3);
  Eigen::MatrixXd a = oracle::random_dense(rng, 8, 8);
  MatF af = mat_from_dense(m, l.rows, l.cols, a);
  auto x = oracle::random_vector(rng, 8);
  auto got = vec_to_dense(matvec(af, vec_from_dense(m, other, x)));
  CHECK(oracle::rel_err(oracle::as_eigen(got), a * oracle::as_eigen(x)) <= 1e-12);
  auto short_bits = named_bits(m, "s", 2);
  CHECK_THROWS_AS(matvec(af, zero_vec(m, short_bits)), DimensionError);
}

TEST_CASE("linearity of matvec") {
  oracle::Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    AddManager m;
    auto l = interleaved(m, 5, 5);
    Eigen::MatrixXd a = oracle::random_dense(rng, 32, 32, 0.4);
    MatF af = mat_from_dense(m, l.rows, l.cols, a);
    VecF u = vec_from_dense(m, l.cols, oracle::random_vector(rng, 32));
    VecF v = vec_from_dense(m, l.cols, oracle::random_vector(rng, 32));
    const double al = 0.75, be = -1.5;
    auto lhs = oracle::as_eigen(vec_to_dense(matvec(af, axpy(al, u, scalar_mul(be, v)))));
    auto rhs = oracle::as_eigen(vec_to_dense(axpy(al, matvec(af, u), scalar_mul(be, matvec(af, v)))));
    CHECK(oracle::rel_err(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("termwise operations") {
  oracle::Rng rng(41);
  AddManager m;
  auto bits = named_bits(m, "i", 4);
  VecF v = vec_from_dense(m, bits, oracle::random_vector(rng, 16));
  VecF z = zero_vec(m, bits);
  CHECK(vec_add(v, z).fun == v.fun);
  CHECK(scalar_mul(1.0, v).fun == v.fun);
  VecF d = vec_sub(v, v);
  CHECK(d.fun == m.zero());
  CHECK(m.node_count(d.fun) == 1);
  CHECK(map_elements([](double x) { return x; }, v).fun == v.fun);
  std::vector<double> p{1, 2, 4, 8};
  auto b2 = named_bits(m, "j", 2);
  CHECK(vec_to_dense(map_elements([](double x) { return 1.0 / x; }, vec_from_dense(m, b2, p))) ==
        std::vector<double>{1, 0.5, 0.25, 0.125});
  VecF sq = map_elements([](double x) { return x * x; }, v);
  CHECK(element_sum(sq) == doctest::Approx(norm2_sq(v)).epsilon(1e-14));
  CHECK(dot(v, z) == 0.0);
  auto other = named_bits(m, "k", 4);
  CHECK_THROWS_AS(vec_add(v, zero_vec(m, other)), DimensionError);
  std::vector<double> tf{3, 4};
  auto b1 = named_bits(m, "q", 1);
  CHECK(norm2(vec_from_dense(m, b1, tf)) == 5.0);
  CHECK(element_sum(constant_vec(m, named_bits(m, "c", 3), 1.0)) == 8.0);
  CHECK(element_sum(z) == 0.0);
}

TEST_CASE("reductions agree with dense oracle") {
  oracle::Rng rng(51);
  for (int trial = 0; trial < 30; ++trial) {
    AddManager m;
    const int n = 1 + trial % 10;
    auto bits = named_bits(m, "i", n);
    auto a = oracle::random_vector(rng, std::size_t{1} << n);
    auto b = oracle::random_vector(rng, std::size_t{1} << n);
    VecF u = vec_from_dense(m, bits, a);
    VecF v = vec_from_dense(m, bits, b);
    const auto ea = oracle::as_eigen(a), eb = oracle::as_eigen(b);
    CHECK(std::abs(dot(u, v) - ea.dot(eb)) <= 1e-12 * std::max(1.0, ea.norm() * eb.norm()));
    CHECK(std::abs(element_sum(u) - ea.sum()) <= 1e-12 * std::max(1.0, ea.lpNorm<1>()));
    CHECK(std::abs(norm2(u) - ea.norm()) <= 1e-12 * ea.norm());
    CHECK(norm_inf(u) == ea.lpNorm<Eigen::Infinity>());
    // dot is the element sum of the Hadamard product, bit for bit
    CHECK(dot(u, v) == element_sum(vec_hadamard(u, v)));
  }
}

TEST_CASE("fused combinations and dot products") {
  oracle::Rng rng(57);
  for (int trial = 0; trial < 20; ++trial) {
    AddManager m;
    const int n = 1 + trial % 8;
    const std::size_t len = std::size_t{1} << n;
    auto bits = named_bits(m, "i", n);
    std::vector<VecF> vs;
    std::vector<Eigen::VectorXd> dense;
    std::vector<double> k;
    for (int j = 0; j < 1 + trial % 6; ++j) {
      // a mix of structured and unstructured operands
      auto raw = j % 3 == 2 ? std::vector<double>(len, 0.5 * j) : oracle::random_vector(rng, len);
      if (j % 3 == 1) raw[rng() % len] = 0.0;
      vs.push_back(vec_from_dense(m, bits, raw));
      dense.push_back(oracle::as_eigen(raw));
      k.push_back(static_cast<double>(rng() % 7) - 3.0);
    }
    Eigen::VectorXd want = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(len));
    double scale = 1.0;
    for (std::size_t j = 0; j < vs.size(); ++j) {
      want += k[j] * dense[j];
      scale += std::abs(k[j]) * dense[j].lpNorm<Eigen::Infinity>();
    }
    const Eigen::VectorXd got = oracle::as_eigen(vec_to_dense(lincomb(k, vs)));
    CHECK((got - want).lpNorm<Eigen::Infinity>() <= 1e-12 * scale);

    const auto x = oracle::random_vector(rng, len);
    const auto d = dots(vec_from_dense(m, bits, x), vs);
    REQUIRE(d.size() == vs.size());
    const auto ex = oracle::as_eigen(x);
    for (std::size_t j = 0; j < vs.size(); ++j)
      CHECK(std::abs(d[j] - ex.dot(dense[j])) <= 1e-12 * std::max(1.0, ex.norm() * dense[j].norm()));
  }
  AddManager m;
  auto bits = named_bits(m, "i", 3);
  VecF u = constant_vec(m, bits, 2.0);
  CHECK(lincomb(std::vector<double>{1.0, -1.0}, std::vector<VecF>{u, u}).fun == m.zero());
  CHECK_THROWS_AS(lincomb(std::vector<double>{1.0}, std::vector<VecF>{u, u}), DimensionError);
  CHECK(dots(u, {}).empty());
}

TEST_CASE("diagonal helpers") {
  AddManager m;
  auto bits = named_bits(m, "i", 1);
  std::vector<double> d{2, 4};
  DiagF df{vec_from_dense(m, bits, d)};
  CHECK(vec_to_dense(diag_reciprocal(df).diag) == std::vector<double>{0.5, 0.25});
  CHECK(diag_reciprocal(diag_reciprocal(df)).diag.fun == df.diag.fun);
  std::vector<double> v{3, -1};
  VecF vf = vec_from_dense(m, bits, v);
  CHECK(diag_apply(DiagF{constant_vec(m, bits, 1.0)}, vf).fun == vf.fun);
  std::vector<double> with_zero{1, 0};
  CHECK_THROWS_AS(diag_reciprocal(DiagF{vec_from_dense(m, bits, with_zero)}), SingularError);
}

TEST_CASE("walsh is compact and matches the fast transform") {
  std::vector<std::size_t> counts;
  for (int n = 1; n <= 14; ++n) {
    AddManager m;
    auto l = interleaved(m, n, n);
    counts.push_back(m.node_count(walsh(m, l.rows, l.cols).fun));
  }
  for (std::size_t i = 1; i < counts.size(); ++i) CHECK(counts[i] - counts[i - 1] == counts[1] - counts[0]);

  oracle::Rng rng(61);
  for (int n : {1, 3, 6, 9, 12}) {
    AddManager m;
    auto l = interleaved(m, n, n);
    MatF w = walsh(m, l.rows, l.cols);
    auto v = oracle::random_vector(rng, std::size_t{1} << n);
    auto want = v;
    oracle::fwht(want);
    auto got = vec_to_dense(matvec(w, vec_from_dense(m, l.cols, v)));
    CHECK(oracle::rel_err(oracle::as_eigen(got), oracle::as_eigen(want)) <= 1e-12);
    auto got_t = vec_to_dense(matvec_t(w, vec_from_dense(m, l.rows, v)));
    CHECK(oracle::rel_err(oracle::as_eigen(got_t), oracle::as_eigen(got)) <= 1e-12);
  }
}

TEST_CASE("cache neutrality of matvec") {
  oracle::Rng rng(71);
  AddManager m;
  auto l = interleaved(m, 4, 4);
  MatF af = mat_from_dense(m, l.rows, l.cols, oracle::random_dense(rng, 16, 16, 0.5));
  VecF x = vec_from_dense(m, l.cols, oracle::random_vector(rng, 16));
  VecF with_cache = matvec(af, x);
  m.clear_cache();
  m.set_cache_enabled(false);
  CHECK(matvec(af, x).fun == with_cache.fun);
}

TEST_CASE("matmat naive block product") {
  oracle::Rng rng(81);
  AddManager m;
  auto l = interleaved(m, 3, 3);
  auto k = named_bits(m, "k", 3);
  Eigen::MatrixXd a = oracle::random_dense(rng, 8, 8), b = oracle::random_dense(rng, 8, 8);
  MatF af = mat_from_dense(m, l.rows, l.cols, a);
  MatF bf = mat_from_dense(m, l.cols, k, b);
  Eigen::MatrixXd got = mat_to_dense(matmat(af, bf));
  CHECK((got - a * b).norm() <= 1e-12 * (a * b).norm());
}

TEST_CASE("dense text format") {
  Eigen::MatrixXd a(2, 3);
  a << 1, 2.5, -3, 0, 1e-20, 7;
  std::stringstream ss;
  write_dense(ss, a);
  CHECK(read_dense(ss) == a);
  std::stringstream bad("1 2\n3\n");
  CHECK_THROWS_AS(read_dense(bad), DimensionError);
}
