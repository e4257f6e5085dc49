// Acceptance run: one line per criterion, nonzero exit if any fails.
//
//   acceptance            all criteria
//   acceptance 3 7        selected criteria

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qp_fixtures.hpp"
#include "random_programs.hpp"
#include "symqp/bpdn.hpp"
#include "symqp/foqp.hpp"
#include "symqp/ground.hpp"
#include "symqp/ipm.hpp"
#include "symqp/linalg.hpp"
#include "symqp/mdp.hpp"
#include "symqp/qp.hpp"

using namespace symqp;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel_vec(const std::vector<double>& got, const Eigen::VectorXd& want) {
  return oracle::rel_err(oracle::as_eigen(got), want);
}

double rel_scalar(double got, double want, double scale) {
  return std::abs(got - want) / std::max({std::abs(want), scale, 1e-300});
}

std::vector<VarId> interleave(AddManager& m, int nr, int nc, std::vector<VarId>& cols) {
  std::vector<VarId> rows;
  for (int i = 0; i < std::max(nr, nc); ++i) {
    if (i < nr) rows.push_back(m.new_var("r" + std::to_string(i)));
    if (i < nc) cols.push_back(m.new_var("c" + std::to_string(i)));
  }
  return rows;
}

Eigen::MatrixXd dense(const MatF& a) { return mat_to_dense(a); }
Eigen::VectorXd dense(const VecF& v) { return to_eigen(v); }

// ---- 1 ------------------------------------------------------------------------

Outcome canonical_form() {
  Outcome out;
  const Foqp f = parse(R"(
var x;
var y;
minimize sum{x : true} v(x);
constraint {y : true}: sum{x : x | y} v(x) >= 1;
constraint {y : true}: v(y) >= 0;
)");
  AddManager m;
  const QpStandard qp = compile(f, m);
  Eigen::MatrixXd a(4, 2);
  a << 0, 1, 1, 1, 1, 0, 0, 1;
  out.require(dense(qp.A) == a, "A differs");
  out.require(dense(qp.b) == Eigen::Vector4d(1, 1, 0, 0), "b differs");
  out.require(dense(qp.c) == Eigen::Vector2d(1, 1), "c differs");
  if (out.ok) out.detail = "A, b, c exact";
  return out;
}

// ---- 2 ------------------------------------------------------------------------

Outcome compile_ground_identity() {
  Outcome out;
  oracle::ProgramGen gen(2024);
  int n = 0;
  for (; n < 200 && out.ok; ++n) {
    const std::string src = gen.next();
    const Foqp f = parse(src);
    AddManager m;
    const QpStandard qp = compile(f, m);
    const GroundProgram g = ground(f);
    const bool same = dense(qp.A) == g.A && dense(qp.b) == g.b && dense(qp.c) == g.c && dense(qp.Q) == g.Q &&
                      dense(qp.row_mask) == g.row_mask && dense(qp.ge_mask) == g.ge_mask &&
                      dense(qp.col_mask) == g.col_mask;
    out.require(same, "program " + std::to_string(n) + " differs:\n" + src);
  }
  if (out.ok) out.detail = std::to_string(n) + " programs identical";
  return out;
}

// ---- 3 ------------------------------------------------------------------------

Outcome algebra_oracles() {
  Outcome out;
  oracle::Rng rng(303);
  std::uniform_int_distribution<int> dim(1, 64);
  double worst = 0.0;
  auto note = [&](double e, const char* what, int trial) {
    worst = std::max(worst, e);
    out.require(e <= 1e-12, std::string(what) + " error " + fmt("%.3g", e) + " on instance " + std::to_string(trial));
  };
  const auto w = [](double v) { return v * v - 0.5 * v + 1.0; };
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index r = dim(rng), c = dim(rng);
    AddManager m;
    std::vector<VarId> cb;
    const std::vector<VarId> rb = interleave(m, fixture::bits_for(r), fixture::bits_for(c), cb);
    const Eigen::MatrixXd a = oracle::random_dense(rng, r, c, trial % 3 == 0 ? 0.2 : 1.0);
    const auto x = oracle::random_vector(rng, static_cast<std::size_t>(c));
    const auto y = oracle::random_vector(rng, static_cast<std::size_t>(r));
    const auto z = oracle::random_vector(rng, static_cast<std::size_t>(r));
    const MatF af = mat_from_dense(m, rb, cb, a);
    const VecF xf = vec_from_dense(m, cb, x), yf = vec_from_dense(m, rb, y), zf = vec_from_dense(m, rb, z);
    const Eigen::VectorXd ex = oracle::as_eigen(x), ey = oracle::as_eigen(y), ez = oracle::as_eigen(z);

    note(rel_vec(vec_to_dense(matvec(af, xf)), a * ex), "matvec", trial);
    note(rel_vec(vec_to_dense(matvec_t(af, yf)), a.transpose() * ey), "matvec_t", trial);
    note(rel_scalar(dot(yf, zf), ey.dot(ez), ey.norm() * ez.norm()), "dot", trial);
    note(rel_scalar(element_sum(yf), ey.sum(), ey.lpNorm<1>()), "element_sum", trial);
    note(rel_scalar(norm2(yf), ey.norm(), 0.0), "norm2", trial);
    note(rel_scalar(norm_inf(yf), ey.lpNorm<Eigen::Infinity>(), 0.0), "norm_inf", trial);
    Eigen::VectorXd wy = ey.unaryExpr(w);
    std::vector<double> mapped = vec_to_dense(map_elements(w, yf));
    mapped.resize(static_cast<std::size_t>(r));
    note(rel_vec(mapped, wy), "map_elements", trial);
  }
  if (out.ok) out.detail = "500 instances, worst relative error " + fmt("%.3g", worst);
  return out;
}

// ---- 4 ------------------------------------------------------------------------

Outcome walsh_compactness() {
  Outcome out;
  std::vector<double> ns, counts;
  for (int n = 1; n <= 14; ++n) {
    AddManager m;
    std::vector<VarId> cb;
    const std::vector<VarId> rb = interleave(m, n, n, cb);
    ns.push_back(n);
    counts.push_back(static_cast<double>(m.node_count(walsh(m, rb, cb).fun)));
  }
  const double k = static_cast<double>(ns.size());
  const double sx = std::accumulate(ns.begin(), ns.end(), 0.0), sy = std::accumulate(counts.begin(), counts.end(), 0.0);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    sxx += ns[i] * ns[i];
    sxy += ns[i] * counts[i];
  }
  const double a = (k * sxy - sx * sy) / (k * sxx - sx * sx), b = (sy - a * sx) / k;
  double resid = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) resid = std::max(resid, counts[i] - (a * ns[i] + b));
  out.require(resid <= 0.5, "node counts leave the linear fit by " + fmt("%.3g", resid));

  AddManager m;
  std::vector<VarId> cb;
  const std::vector<VarId> rb = interleave(m, 12, 12, cb);
  const MatF wf = walsh(m, rb, cb);
  oracle::Rng rng(404);
  const auto v = oracle::random_vector(rng, 4096);
  auto want = v;
  oracle::fwht(want);
  const auto got = vec_to_dense(matvec(wf, vec_from_dense(m, cb, v)));
  double err = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
  out.require(err <= 1e-10, "transform error " + fmt("%.3g", err));
  if (out.ok)
    out.detail = "nodes = " + fmt("%.4g", a) + " n + " + fmt("%.4g", b) + " (max excess " + fmt("%.2g", resid) +
                 "), n=4096 transform error " + fmt("%.2g", err);
  return out;
}

// ---- 5 ------------------------------------------------------------------------

Outcome newton_residuals() {
  Outcome out;
  oracle::Rng rng(505);
  std::uniform_int_distribution<int> cols_d(2, 64);
  const double red = SolveOptions{}.cg_reduction;
  double worst = 0.0;
  long iterations = 0;
  for (int trial = 0; trial < 50 && out.ok; ++trial) {
    const int cols = cols_d(rng);
    const int rows = std::uniform_int_distribution<int>(1, std::min(cols, 32))(rng);
    const auto p = oracle::random_feasible_qp(rng, rows, cols, Eigen::Index{1} << fixture::bits_for(rows),
                                              Eigen::Index{1} << fixture::bits_for(cols),
                                              trial % 2 ? oracle::QKind::Diagonal : oracle::QKind::Zero, false,
                                              trial % 5 == 0 ? 1.0 : 0.5);
    AddManager m;
    const QpStandard qp = fixture::to_qp(m, p);
    SolveOptions o;
    o.observer = [&](const IterationView& v) {
      const double e = fixture::newton_residual(p, v);
      worst = std::max(worst, e);
      ++iterations;
      out.require(e <= 10 * red, "program " + std::to_string(trial) + " iteration " + std::to_string(v.iteration) +
                                     " residual " + fmt("%.3g", e));
    };
    ipm_solve(qp, o);
  }
  if (out.ok)
    out.detail = "50 programs, " + std::to_string(iterations) + " directions, worst " + fmt("%.3g", worst) +
                 " <= " + fmt("%.3g", 10 * red);
  return out;
}

// ---- 6 ------------------------------------------------------------------------

Outcome solver_convergence() {
  Outcome out;
  struct Fixture {
    std::string name;
    std::function<QpStandard(AddManager&)> build;
  };
  std::vector<Fixture> fx;
  oracle::Rng rng(606);
  const std::vector<std::tuple<int, int, int, int, oracle::QKind, bool>> shapes{
      {3, 6, 4, 8, oracle::QKind::Zero, false},     {4, 5, 4, 8, oracle::QKind::Diagonal, false},
      {12, 20, 16, 32, oracle::QKind::Zero, false}, {24, 14, 32, 16, oracle::QKind::Diagonal, false},
      {4, 4, 4, 4, oracle::QKind::Dense, true},     {12, 16, 16, 16, oracle::QKind::Dense, true},
      {0, 6, 1, 8, oracle::QKind::Dense, false},    {0, 30, 1, 32, oracle::QKind::Diagonal, false},
  };
  for (std::size_t i = 0; i < shapes.size(); ++i)
    for (int rep = 0; rep < 3; ++rep) {
      const auto [r, c, pr, pc, q, diag] = shapes[i];
      const auto p = oracle::random_feasible_qp(rng, r, c, pr, pc, q, diag);
      fx.push_back({"random-" + std::to_string(i) + "." + std::to_string(rep),
                    [p](AddManager& m) { return fixture::to_qp(m, p); }});
    }
  const std::vector<std::pair<std::string, std::string>> sources{
      {"xy", R"(
var x;
var y;
minimize sum{x : true} v(x);
constraint {y : true}: sum{x : x | y} v(x) >= 1;
constraint {y : true}: v(y) >= 0;
)"},
      {"capacity", R"(
var x;
var y;
minimize sum{x : true} -1 * v(x);
constraint {y : true}: sum{x : x == y} v(x) <= 1;
constraint : sum{x : true} v(x) <= 1.5;
)"},
      {"friends", R"(
domain D = {a, b, c};
pred Friends(D, D);
fact Friends(b, a);
fact Friends(b, c);
var x : D;
var z : D;
minimize sum{x : exists z: Friends(z, x)} v(x) + sum{x, x' : x == x'} 0.5 * v(x) * v(x');
constraint {x : true}: v(x) >= 1;
)"},
  };
  for (const auto& [name, src] : sources)
    fx.push_back({name, [src](AddManager& m) { return compile(parse(src), m); }});
  fx.push_back({"mdp-6", [](AddManager& m) {
                  return compile(gen_mdp_lp(make_factory_mdp({.state_bits = 6, .seed = 3})), m);
                }});
  fx.push_back({"bpdn-7", [](AddManager& m) {
                  return bpdn_qp(make_bpdn({.log_n = 7, .log_m = 5, .k = 4, .tau = 0.5, .seed = 5}), m);
                }});

  double worst_res = 0.0, worst_obj = 0.0;
  for (const auto& f : fx) {
    if (!out.ok) break;
    AddManager m;
    const QpStandard qp = f.build(m);
    const SolveReport s = ipm_solve(qp);
    const SolveReport g = ground_ipm_solve(ground_qp(qp));
    worst_res = std::max(worst_res, s.final_residual);
    const double e = rel_scalar(s.objective, g.objective, 1.0);
    worst_obj = std::max(worst_obj, e);
    out.require(s.converged() && s.final_residual <= 1e-5,
                f.name + ": symbolic " + to_string(s.status) + " residual " + fmt("%.3g", s.final_residual));
    out.require(g.converged(), f.name + ": ground " + std::string(to_string(g.status)));
    out.require(e <= 1e-4, f.name + ": objectives " + fmt("%.10g", s.objective) + " vs " + fmt("%.10g", g.objective));
  }
  if (out.ok)
    out.detail = std::to_string(fx.size()) + " fixtures, worst residual " + fmt("%.3g", worst_res) +
                 ", worst objective gap " + fmt("%.3g", worst_obj);
  return out;
}

// ---- 7 ------------------------------------------------------------------------

Outcome mdp_correctness() {
  Outcome out;
  std::ostringstream detail;
  for (int bits : {8, 10, 12}) {
    const FactoredMdp mdp = make_factory_mdp({.state_bits = bits, .actions = 4, .gamma = 0.9, .seed = 11});
    const std::vector<double> vi = value_iteration(mdp);
    AddManager m;
    const QpStandard qp = compile(gen_mdp_lp(mdp), m);
    const SolveReport r = ipm_solve(qp);
    double diff = 0.0, scale = 0.0;
    for (std::size_t s = 0; s < vi.size(); ++s) {
      diff = std::max(diff, std::abs(r.x[s] - vi[s]));
      scale = std::max(scale, std::abs(vi[s]));
    }
    const double rel = diff / scale;
    out.require(r.converged(), std::to_string(bits) + " bits: " + to_string(r.status));
    out.require(rel <= 1e-4, std::to_string(bits) + " bits: relative error " + fmt("%.3g", rel));
    detail << bits << " bits " << fmt("%.2g", rel) << " in " << fmt("%.1f", r.time_solve) << "s; ";
  }
  if (out.ok) out.detail = detail.str();
  return out;
}

// ---- 8 ------------------------------------------------------------------------

Outcome representation_scaling() {
  Outcome out;
  SolveOptions o;
  o.precond_k = 0;
  o.max_iterations = 4;
  o.ground_direct = false;
  std::vector<std::uint64_t> nnz;
  std::vector<std::size_t> nodes;
  std::vector<double> sym, gnd;
  for (int r = 0; r <= 4; ++r) {
    AddManager m;
    const QpStandard qp = compile(gen_mdp_lp(make_factory_mdp({.state_bits = 10, .seed = 1, .replica_bits = r})), m);
    const QpStats st = stats(qp);
    nnz.push_back(st.nnz_a);
    nodes.push_back(st.add_nodes_a);
    const SolveReport s = ipm_solve(qp, o);
    const SolveReport g = ground_ipm_solve(ground_qp(qp), o);
    sym.push_back(s.time_products / static_cast<double>(std::max(1L, s.products)));
    gnd.push_back(g.time_products / static_cast<double>(std::max(1L, g.products)));
  }
  std::ostringstream detail;
  detail << "nnz " << nnz.front() << ".." << nnz.back() << ", nodes " << nodes.front() << ".." << nodes.back()
         << "; growth per doubling symbolic/ground:";
  for (std::size_t i = 1; i < nnz.size(); ++i) {
    out.require(nnz[i] == 2 * nnz[i - 1], "nnz does not double at step " + std::to_string(i));
    const double dn = std::abs(static_cast<double>(nodes[i]) - static_cast<double>(nodes[0])) /
                      static_cast<double>(nodes[0]);
    out.require(dn <= 0.05, "node count moves " + fmt("%.3g", dn) + " at step " + std::to_string(i));
    const double rs = sym[i] / sym[i - 1], rg = gnd[i] / gnd[i - 1];
    detail << ' ' << fmt("%.2f", rs) << '/' << fmt("%.2f", rg);
    out.require(rs <= 1.3, "symbolic product time grows " + fmt("%.3g", rs) + "x at step " + std::to_string(i));
    out.require(rg >= 1.7, "ground product time grows " + fmt("%.3g", rg) + "x at step " + std::to_string(i));
  }
  out.detail = (out.ok ? "" : out.detail + "; ") + detail.str();
  return out;
}

// ---- 9 ------------------------------------------------------------------------

Outcome bpdn_recovery() {
  Outcome out;
  const BpdnInstance inst = make_bpdn({.log_n = 12, .log_m = 10, .k = 50, .tau = 1.0, .seed = 1});
  const oracle::IstaResult ref = oracle::ista_walsh(inst.rows, inst.b, inst.n(), inst.tau);
  AddManager m;
  const SolveReport r = ipm_solve(bpdn_qp(inst, m));
  out.require(r.converged(), std::string("solver ") + to_string(r.status));
  const std::vector<double> x = bpdn_signal(inst, r.x);
  double num = 0.0, den = 0.0, dref = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - inst.x_true[i]) * (x[i] - inst.x_true[i]);
    dref += (x[i] - ref.x[i]) * (x[i] - ref.x[i]);
    den += inst.x_true[i] * inst.x_true[i];
    peak = std::max(peak, std::abs(inst.x_true[i]));
  }
  int wrong = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if ((std::abs(x[i]) > 1e-3 * peak) != (inst.x_true[i] != 0.0)) ++wrong;
  const double rel = std::sqrt(num / den), rel_ref = std::sqrt(dref / den);
  out.require(wrong == 0, std::to_string(wrong) + " support entries misclassified");
  out.require(rel <= 1e-2, "relative error " + fmt("%.3g", rel));
  out.require(rel_ref <= 1e-2, "distance to the proximal-gradient solution " + fmt("%.3g", rel_ref));
  const std::string d = "relative error " + fmt("%.3g", rel) + ", distance to FISTA " + fmt("%.3g", rel_ref) +
                        ", solve " + fmt("%.1f", r.time_solve) + "s";
  out.detail = out.ok ? d : out.detail + "; " + d;
  return out;
}

// ---- 10 -----------------------------------------------------------------------

Outcome ill_conditioning() {
  Outcome out;
  oracle::Rng rng(5);
  const auto p = oracle::degenerate_lp(rng, 64, 128, 16, 64, 128);
  AddManager m;
  const QpStandard qp = fixture::to_qp(m, p);
  auto run = [&](bool regularize, int k) {
    SolveOptions o;
    o.tolerance = 1e-9;
    o.regularize = regularize;
    o.precond_k = k;
    o.normal_space = NormalSpace::Rows;
    return ipm_solve(qp, o);
  };
  const SolveReport bare = run(false, 0), plain = run(true, 0), pre = run(true, 50);
  out.require(bare.cg_cap_hits > 0, "unregularized CG never reached its cap");
  out.require(pre.converged(), std::string("preconditioned solve ") + to_string(pre.status));
  out.require(2 * pre.cg_total <= plain.cg_total, "CG " + std::to_string(pre.cg_total) + " preconditioned vs " +
                                                      std::to_string(plain.cg_total) + " plain");
  const std::string d = "cap hits without regularization " + std::to_string(bare.cg_cap_hits) + "; CG " +
                        std::to_string(plain.cg_total) + " plain vs " + std::to_string(pre.cg_total) + " with k=50";
  out.detail = out.ok ? d : out.detail + "; " + d;
  return out;
}

struct Criterion {
  int id;
  const char* name;
  double budget;  // seconds
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "canonical form of the worked example", 1, canonical_form},
    {2, "compile equals ground on 200 random programs", 30, compile_ground_identity},
    {3, "diagram algebra against dense brute force", 60, algebra_oracles},
    {4, "Walsh diagram size and transform", 30, walsh_compactness},
    {5, "Newton system residuals", 120, newton_residuals},
    {6, "solver convergence on all fixtures", 300, solver_convergence},
    {7, "MDP values against value iteration", 300, mdp_correctness},
    {8, "representation scaling", 600, representation_scaling},
    {9, "BPDN recovery at n = 4096", 600, bpdn_recovery},
    {10, "regularization and partial Cholesky", 300, ill_conditioning},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> pick;
  for (int i = 1; i < argc; ++i) pick.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const Criterion& c : kCriteria) {
    if (!pick.empty() && std::find(pick.begin(), pick.end(), c.id) == pick.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (t > c.budget) {
      o.detail += (o.detail.empty() ? "" : "; ") + std::string("over the time limit");
      o.ok = false;
    }
    std::printf("[%s] %2d %s: %s (%.1fs of %.0fs)\n", o.ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), t,
                c.budget);
    std::fflush(stdout);
    failed += o.ok ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
