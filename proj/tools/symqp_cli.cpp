#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "symqp/bpdn.hpp"
#include "symqp/error.hpp"
#include "symqp/foqp.hpp"
#include "symqp/ground.hpp"
#include "symqp/ipm.hpp"
#include "symqp/mdp.hpp"
#include "symqp/qp.hpp"

using namespace symqp;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;

constexpr const char* kHeader =
    "name\t#vars\t#constr\tnnz(A)\t|ADD|\ttime_symbolic\ttime_ground\tmatvec_symbolic\tmatvec_ground";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool looks_like_json(const std::string& text) {
  for (char c : text) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
    return c == '{';
  }
  return false;
}

// A loaded model: either modeling-language source or a BPDN instance.
struct Model {
  std::string name;
  std::optional<BpdnInstance> bpdn;
  std::optional<Foqp> program;
};

Model load_model(const std::string& path) {
  Model m;
  m.name = path.substr(path.find_last_of('/') + 1);
  const std::string text = read_file(path);
  if (looks_like_json(text)) {
    std::istringstream in(text);
    m.bpdn = read_bpdn(in);
  } else {
    m.program = parse(text);
  }
  return m;
}

QpStandard build(const Model& model, AddManager& m) {
  return model.bpdn ? bpdn_qp(*model.bpdn, m) : compile(*model.program, m);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::size_t matrix_nodes(const QpStats& s) { return s.add_nodes_a + s.add_nodes_q; }

std::string stats_row(const std::string& name, const QpStats& s) {
  return name + "\t" + std::to_string(s.vars) + "\t" + std::to_string(s.constraints) + "\t" +
         std::to_string(s.nnz_a) + "\t" + std::to_string(matrix_nodes(s));
}

double per_product(const SolveReport& r) { return r.products > 0 ? r.time_products / r.products : 0.0; }

void write_solution(const std::string& path, const std::vector<double>& x) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out.precision(17);
  for (std::size_t i = 0; i < x.size(); ++i) out << i << ' ' << x[i] << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

SolveOptions options_from(const std::vector<std::string>& opts) {
  SolveOptions o;
  for (const auto& kv : opts) set_option(o, kv);
  return o;
}

// ---- subcommands ------------------------------------------------------------

struct SolveArgs {
  std::string model;
  bool ground = false;
  std::vector<std::string> opts;
  std::string solution;
  std::string report;
};

void run_solve(const SolveArgs& a) {
  const Model model = load_model(a.model);
  const SolveOptions o = options_from(a.opts);
  AddManager m;
  const auto t0 = std::chrono::steady_clock::now();
  const QpStandard qp = build(model, m);
  const double t_compile = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  SolveReport rep = a.ground ? ground_ipm_solve(ground_qp(qp), o) : ipm_solve(qp, o);
  rep.time_compile = t_compile;
  std::string text = std::string("solver=") + (a.ground ? "ground" : "symbolic") + "\n" + to_text(rep);
  std::vector<double> x = rep.x;
  if (model.bpdn) {
    x = bpdn_signal(*model.bpdn, rep.x);
    text += "bpdn_objective=" + fmt(bpdn_objective(*model.bpdn, x)) + "\n";
  }
  write_text(a.report, text);
  if (!a.solution.empty()) write_solution(a.solution, x);
  if (!rep.converged()) throw SolverFailure(std::string("solver stopped: ") + to_string(rep.status));
}

void run_stats(const std::string& path) {
  const Model model = load_model(path);
  AddManager m;
  const QpStats s = stats(build(model, m));
  std::cout << kHeader << '\n' << stats_row(model.name, s) << "\t-\t-\t-\t-\n";
}

void run_gen_mdp(const MdpParams& p, const std::string& out) { write_text(out, mdp_source(make_factory_mdp(p))); }

void run_gen_bpdn(const BpdnParams& p, const std::string& out) {
  std::ostringstream ss;
  write_bpdn(ss, make_bpdn(p));
  write_text(out, ss.str());
}

struct BenchArgs {
  std::string family;
  std::vector<int> sizes;
  std::vector<std::string> opts;
  std::uint64_t seed = 1;
  int max_iterations = 0;
};

void bench_row(const std::string& name, const QpStandard& qp, const SolveOptions& o) {
  const QpStats s = stats(qp);
  const SolveReport sym = ipm_solve(qp, o);
  const SolveReport gnd = ground_ipm_solve(ground_qp(qp), o);
  std::cout << stats_row(name, s) << '\t' << fmt(sym.time_solve) << '\t' << fmt(gnd.time_solve) << '\t'
            << fmt(per_product(sym)) << '\t' << fmt(per_product(gnd)) << std::endl;
}

void run_bench(const BenchArgs& a) {
  SolveOptions o = options_from(a.opts);
  if (a.max_iterations > 0) o.max_iterations = a.max_iterations;
  std::cout << kHeader << std::endl;
  if (a.family == "mdp") {
    for (int bits : a.sizes.empty() ? std::vector<int>{6, 8, 10} : a.sizes) {
      AddManager m;
      const QpStandard qp = compile(gen_mdp_lp(make_factory_mdp({.state_bits = bits, .seed = a.seed})), m);
      bench_row("mdp-" + std::to_string(bits), qp, o);
    }
  } else if (a.family == "scaling") {
    // block-repetitive LPs: nnz(A) doubles per replica bit, the diagram barely grows
    o.precond_k = 0;
    if (a.max_iterations <= 0) o.max_iterations = 4;
    for (int r : a.sizes.empty() ? std::vector<int>{0, 1, 2, 3, 4} : a.sizes) {
      AddManager m;
      const MdpParams p{.state_bits = 10, .seed = a.seed, .replica_bits = r};
      const QpStandard qp = compile(gen_mdp_lp(make_factory_mdp(p)), m);
      bench_row("scaling-" + std::to_string(r), qp, o);
    }
  } else if (a.family == "bpdn") {
    for (int log_n : a.sizes.empty() ? std::vector<int>{8, 10, 12} : a.sizes) {
      const int log_m = log_n - 2;
      const int k = std::min(50, 1 << (log_m - 3));
      AddManager m;
      const QpStandard qp = bpdn_qp(make_bpdn({.log_n = log_n, .log_m = log_m, .k = k, .seed = a.seed}), m);
      bench_row("bpdn-" + std::to_string(log_n), qp, o);
    }
  } else {
    throw UsageError("unknown family '" + a.family + "' (mdp, scaling, bpdn)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic interior point solver for logical quadratic programs"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Compile and solve a model file");
  s->add_option("model", solve.model, "Modeling-language source or BPDN instance (JSON)")->required();
  s->add_flag("--ground", solve.ground, "Solve the enumerated sparse program instead");
  s->add_option("--opt", solve.opts, "Solver setting key=value (repeatable)");
  s->add_option("--solution", solve.solution, "Write 'index value' lines of the solution");
  s->add_option("--report", solve.report, "Write the report here instead of stdout");

  std::string stats_model;
  auto* st = app.add_subcommand("stats", "Compile only and print problem statistics");
  st->add_option("model", stats_model, "Model file")->required();

  MdpParams mdp;
  std::string mdp_out;
  auto* gm = app.add_subcommand("gen-mdp", "Write the value LP of a factory-like MDP");
  gm->add_option("--bits", mdp.state_bits, "Working state bits")->capture_default_str();
  gm->add_option("--actions", mdp.actions, "Number of actions")->capture_default_str();
  gm->add_option("--gamma", mdp.gamma, "Discount factor")->capture_default_str();
  gm->add_option("--seed", mdp.seed, "Random seed")->capture_default_str();
  gm->add_option("--replicas", mdp.replica_bits, "Frozen leading bits")->capture_default_str();
  gm->add_option("-o,--output", mdp_out, "Output file (default stdout)");

  BpdnParams bp;
  std::string bp_out, selection = "random";
  auto* gb = app.add_subcommand("gen-bpdn", "Write a Walsh-matrix BPDN instance");
  gb->add_option("--log-n", bp.log_n, "log2 of the signal length")->capture_default_str();
  gb->add_option("--log-m", bp.log_m, "log2 of the measurement count")->capture_default_str();
  gb->add_option("-k,--sparsity", bp.k, "Nonzeros of the true signal")->capture_default_str();
  gb->add_option("--tau", bp.tau, "Weight of the l1 term")->capture_default_str();
  gb->add_option("--seed", bp.seed, "Random seed")->capture_default_str();
  gb->add_option("--rows", selection, "Row selection: random or leading")->capture_default_str();
  gb->add_option("--noise", bp.noise, "Measurement noise standard deviation")->capture_default_str();
  gb->add_option("-o,--output", bp_out, "Output file (default stdout)");

  BenchArgs bench;
  auto* bn = app.add_subcommand("bench", "Symbolic versus ground solves on a generated family");
  bn->add_option("family", bench.family, "mdp, scaling or bpdn")->required();
  bn->add_option("--sizes", bench.sizes, "Sizes: state bits, replica bits or log2 n");
  bn->add_option("--opt", bench.opts, "Solver setting key=value (repeatable)");
  bn->add_option("--seed", bench.seed, "Random seed")->capture_default_str();
  bn->add_option("--max-iterations", bench.max_iterations, "Cap on outer iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) run_solve(solve);
    else if (*st) run_stats(stats_model);
    else if (*gm) run_gen_mdp(mdp, mdp_out);
    else if (*gb) {
      bp.selection = parse_row_selection(selection);
      run_gen_bpdn(bp, bp_out);
    } else if (*bn) run_bench(bench);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SolverFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const Error& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
  return 0;
}
