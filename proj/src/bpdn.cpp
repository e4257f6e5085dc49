#include "symqp/bpdn.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "symqp/error.hpp"

namespace symqp {

const char* to_string(RowSelection s) { return s == RowSelection::Leading ? "leading" : "random"; }

RowSelection parse_row_selection(const std::string& s) {
  if (s == "leading") return RowSelection::Leading;
  if (s == "random") return RowSelection::Random;
  throw InvalidArgument("row selection must be 'leading' or 'random', got '" + s + "'");
}

std::size_t BpdnInstance::sparsity() const {
  return static_cast<std::size_t>(std::count_if(x_true.begin(), x_true.end(), [](double v) { return v != 0.0; }));
}

double walsh_entry(std::uint64_t r, std::uint64_t c) { return std::popcount(r & c) % 2 ? -1.0 : 1.0; }

namespace {

void check_sizes(int log_n, int log_m) {
  if (log_n < 1 || log_n > 24) throw InvalidArgument("log2 of the signal length must lie in [1, 24]");
  if (log_m < 0 || log_m >= log_n) throw InvalidArgument("measurement count must be a smaller power of two");
}

std::vector<double> measure(const BpdnInstance& inst, const std::vector<double>& x) {
  std::vector<std::uint64_t> support;
  for (std::uint64_t i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) support.push_back(i);
  std::vector<double> out(inst.rows.size(), 0.0);
  for (std::size_t j = 0; j < inst.rows.size(); ++j)
    for (std::uint64_t i : support) out[j] += walsh_entry(inst.rows[j], i) * x[i];
  return out;
}

}  // namespace

BpdnInstance make_bpdn(const BpdnParams& p) {
  check_sizes(p.log_n, p.log_m);
  if (p.k < 0 || static_cast<std::uint64_t>(p.k) > (std::uint64_t{1} << p.log_m))
    throw InvalidArgument("sparsity must lie in [0, m]");
  if (!(p.tau > 0.0)) throw InvalidArgument("weight tau must be positive");
  if (p.noise < 0.0) throw InvalidArgument("noise level must be nonnegative");
  BpdnInstance inst;
  inst.log_n = p.log_n;
  inst.log_m = p.log_m;
  inst.tau = p.tau;
  inst.selection = p.selection;
  const std::uint64_t n = inst.n(), m = inst.m();
  std::mt19937_64 rng(p.seed);
  std::vector<std::uint64_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  if (p.selection == RowSelection::Leading) {
    inst.rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  } else {
    std::shuffle(perm.begin(), perm.end(), rng);
    inst.rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(inst.rows.begin(), inst.rows.end());
  }

  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  inst.x_true.assign(n, 0.0);
  for (int i = 0; i < p.k; ++i) {
    double v = 0.0;
    while (v == 0.0) v = gauss(rng);
    inst.x_true[perm[static_cast<std::size_t>(i)]] = v;
  }
  inst.b = measure(inst, inst.x_true);
  if (p.noise > 0.0)
    for (double& v : inst.b) v += p.noise * gauss(rng);
  return inst;
}

void validate(const BpdnInstance& inst) {
  check_sizes(inst.log_n, inst.log_m);
  if (!(inst.tau > 0.0)) throw InvalidArgument("weight tau must be positive");
  if (inst.rows.size() != inst.m() || inst.b.size() != inst.m())
    throw DimensionError("one selected row and one observation per measurement");
  if (inst.x_true.size() != inst.n()) throw DimensionError("true signal has the wrong length");
  for (std::size_t j = 0; j < inst.rows.size(); ++j) {
    if (inst.rows[j] >= inst.n()) throw InvalidArgument("selected row out of range");
    if (j > 0 && inst.rows[j] <= inst.rows[j - 1]) throw InvalidArgument("selected rows must increase");
  }
  if (inst.selection == RowSelection::Leading && inst.rows.back() != inst.m() - 1)
    throw InvalidArgument("leading selection must take the first m rows");
}

QpStandard bpdn_qp(const BpdnInstance& inst, AddManager& m) {
  validate(inst);
  const int p = inst.log_n;
  const VarId split = m.named_var("bp_h");
  const VarId split_p = m.named_var("bp_hp");
  std::vector<VarId> rbits, cbits, cpbits;
  for (int i = 0; i < p; ++i) {
    rbits.push_back(m.named_var("bp_r" + std::to_string(i)));
    cbits.push_back(m.named_var("bp_c" + std::to_string(i)));
    cpbits.push_back(m.named_var("bp_cp" + std::to_string(i)));
  }
  std::vector<VarId> cols{split};
  cols.insert(cols.end(), cbits.begin(), cbits.end());
  std::vector<VarId> colps{split_p};
  colps.insert(colps.end(), cpbits.begin(), cpbits.end());

  const MatF w = walsh(m, rbits, cbits);
  MatF f{m.apply(BinaryOp::Times, w.fun, m.ite_var(split, m.terminal(-1.0), m.one())), rbits, cols, inst.n(),
         2 * inst.n()};

  VecF mask;
  if (inst.selection == RowSelection::Leading) {
    Add ind = m.one();
    for (int i = 0; i < inst.log_n - inst.log_m; ++i)
      ind = m.apply(BinaryOp::Times, ind, m.ite_var(rbits[static_cast<std::size_t>(i)], m.zero(), m.one()));
    mask = VecF{ind, rbits, inst.n()};
  } else {
    std::vector<double> ind(inst.n(), 0.0);
    for (std::uint64_t r : inst.rows) ind[r] = 1.0;
    mask = vec_from_dense(m, rbits, ind);
  }
  std::vector<double> scattered(inst.n(), 0.0);
  for (std::size_t j = 0; j < inst.rows.size(); ++j) scattered[inst.rows[j]] = inst.b[j];
  const VecF bhat = vec_from_dense(m, rbits, scattered);

  VecF c = axpy(-1.0, matvec_t(f, bhat), constant_vec(m, cols, inst.tau));
  const VecF zero_rows = zero_vec(m, rbits);
  MatF a{m.zero(), rbits, cols, inst.n(), 2 * inst.n()};
  MatF q{m.zero(), cols, colps, 2 * inst.n(), 2 * inst.n()};
  QpStandard qp = make_qp(m, std::move(a), zero_rows, std::move(c), std::move(q), zero_rows, zero_rows,
                          constant_vec(m, cols, 1.0), colps);
  qp.q_factor = QuadFactor{std::move(f), std::move(mask)};
  return qp;
}

std::vector<double> bpdn_signal(const BpdnInstance& inst, const std::vector<double>& z) {
  const std::uint64_t n = inst.n();
  if (z.size() != 2 * n) throw DimensionError("split solution must have length 2n");
  std::vector<double> x(n);
  for (std::uint64_t i = 0; i < n; ++i) x[i] = z[i] - z[n + i];
  return x;
}

double bpdn_objective(const BpdnInstance& inst, const std::vector<double>& x) {
  if (x.size() != inst.n()) throw DimensionError("signal has the wrong length");
  const std::vector<double> ax = measure(inst, x);
  double fit = 0.0, l1 = 0.0;
  for (std::size_t j = 0; j < ax.size(); ++j) fit += (ax[j] - inst.b[j]) * (ax[j] - inst.b[j]);
  for (double v : x) l1 += std::abs(v);
  return inst.tau * l1 + 0.5 * fit;
}

double bpdn_offset(const BpdnInstance& inst) {
  double s = 0.0;
  for (double v : inst.b) s += v * v;
  return 0.5 * s;
}

void write_bpdn(std::ostream& os, const BpdnInstance& inst) {
  validate(inst);
  nlohmann::json j;
  j["format"] = "symqp-bpdn";
  j["log_n"] = inst.log_n;
  j["log_m"] = inst.log_m;
  j["tau"] = inst.tau;
  j["selection"] = to_string(inst.selection);
  j["rows"] = inst.rows;
  nlohmann::json support = nlohmann::json::array();
  for (std::uint64_t i = 0; i < inst.x_true.size(); ++i)
    if (inst.x_true[i] != 0.0) support.push_back({i, inst.x_true[i]});
  j["support"] = support;
  j["b"] = inst.b;
  os << j.dump(1) << "\n";
}

BpdnInstance read_bpdn(std::istream& is) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
    if (j.value("format", "") != "symqp-bpdn") throw InvalidArgument("not a BPDN instance file");
    BpdnInstance inst;
    inst.log_n = j.at("log_n").get<int>();
    inst.log_m = j.at("log_m").get<int>();
    check_sizes(inst.log_n, inst.log_m);
    inst.tau = j.at("tau").get<double>();
    inst.selection = parse_row_selection(j.at("selection").get<std::string>());
    inst.rows = j.at("rows").get<std::vector<std::uint64_t>>();
    inst.b = j.at("b").get<std::vector<double>>();
    inst.x_true.assign(inst.n(), 0.0);
    for (const auto& e : j.at("support")) {
      const auto i = e.at(0).get<std::uint64_t>();
      if (i >= inst.n()) throw InvalidArgument("support index out of range");
      inst.x_true[i] = e.at(1).get<double>();
    }
    validate(inst);
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed BPDN file: ") + e.what());
  }
}

}  // namespace symqp
