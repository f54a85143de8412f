#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dcapep/dcapep.hpp"
#include "dcapep/experiments.hpp"

namespace fs = std::filesystem;
using namespace dcapep;
using experiments::num;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kConfig = 2;

struct ConfigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_modulus(const std::string& s) {
  if (s == "inf" || s == "infinity" || s == "Inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigFailure("bad number '" + s + "'");
  }
}

ClassParams class_of(double mu, const std::string& L) {
  const double l = parse_modulus(L);
  try {
    return ClassParams(mu, std::isinf(l) ? Smoothness::infinite() : Smoothness(l));
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    const auto a = cur.find_first_not_of(" \t\r");
    const auto b = cur.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : cur.substr(a, b - a + 1));
  }
  return out;
}

unsigned resolve_seed(unsigned flag, bool flag_given) {
  if (const char* env = std::getenv("DCAPEP_SEED")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0') return static_cast<unsigned>(v);
  }
  return flag_given ? flag : 42u;
}

// Output sink: a file under --out, or stdout.
struct Sink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  Sink(const std::string& out_dir, const std::string& name) {
    if (out_dir.empty()) return;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const fs::path p = fs::path(out_dir) / name;
    file.open(p);
    if (!file) throw ConfigFailure("cannot write '" + p.string() + "'");
    os = &file;
  }
  std::ostream& operator*() { return *os; }
};

struct PepFlags {
  std::string kind = "gradient_gap";
  int N = 1;
  double mu1 = 0.0, mu2 = 0.0;
  std::string L1 = "1", L2 = "inf";
  double eta = 1.0;
  double delta = 1.0;
  double tol = 1e-8;

  void add(CLI::App* app) {
    app->add_option("--kind", kind, "gradient_gap|model_decrease|pl_onestep (or P3, A2, P33)");
    app->add_option("--N", N, "iterations");
    app->add_option("--mu1", mu1, "strong convexity of f1");
    app->add_option("--L1", L1, "smoothness of f1 (number or inf)");
    app->add_option("--mu2", mu2, "strong convexity of f2");
    app->add_option("--L2", L2, "smoothness of f2 (number or inf)");
    app->add_option("--eta", eta, "PL modulus (pl_onestep)");
    app->add_option("--delta", delta, "f(x1) - f_star");
    app->add_option("--tol", tol, "solver tolerance");
  }
  pep::PepSpec spec() const {
    pep::PepSpec s;
    try {
      s.kind = pep::kind_from_string(kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigFailure(e.what());
    }
    s.params1 = class_of(mu1, L1);
    s.params2 = class_of(mu2, L2);
    s.N = s.kind == pep::PepKind::pl_onestep ? 1 : N;
    s.Delta = delta;
    s.eta = eta;
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigFailure(e.what());
    }
    return s;
  }
};

// ------------------------------------------------------------ run

int cmd_run(const std::string& cfg, const std::string& rule_name, double eps, int max_iter,
            const std::string& out) {
  config::LoadedInstance li = [&] {
    try {
      return config::from_file(cfg);
    } catch (const config::ConfigError& e) {
      throw ConfigFailure(e.what());
    }
  }();
  StopRule rule;
  if (rule_name == "gap") rule.kind = StopKind::gradient_gap;
  else if (rule_name == "T") rule.kind = StopKind::model_decrease;
  else throw ConfigFailure("--rule must be gap or T");
  rule.epsilon = eps;
  rule.max_iter = max_iter;
  try {
    rule.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
  const Trace tr = run(li.instance, li.start, rule);
  Sink sink(out, "trace.csv");
  write_trace_csv(*sink, tr);
  std::cerr << "instance=" << li.instance.name() << " iterations=" << tr.N_performed
            << " stop=" << to_string(tr.stop_reason) << '\n';
  return tr.stop_reason == StopReason::oracle_failure ? kFail : kOk;
}

// ------------------------------------------------------------ bound

int cmd_bound(const std::string& theorem, const PepFlags& f, const std::string& out) {
  BoundRequest r;
  try {
    r.theorem = theorem_from_string(theorem);
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
  r.params1 = class_of(f.mu1, f.L1);
  r.params2 = class_of(f.mu2, f.L2);
  r.N = f.N;
  r.Delta = f.delta;
  r.eta = f.eta;
  BoundResult res;
  try {
    res = evaluate_bound(r);
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
  Sink sink(out, "bound.csv");
  *sink << "theorem,mu1,L1,mu2,L2,N,Delta,eta,bound,case";
  for (const auto& [k, v] : res.constants) *sink << ',' << k;
  *sink << '\n'
        << theorem << ',' << num(r.params1.mu) << ',' << num(r.params1.L.as_double()) << ',' << num(r.params2.mu)
        << ',' << num(r.params2.L.as_double()) << ',' << r.N << ',' << num(r.Delta) << ',' << num(r.eta) << ','
        << num(res.value) << ',' << res.case_taken;
  for (const auto& [k, v] : res.constants) *sink << ',' << num(v);
  *sink << '\n';
  return kOk;
}

// ------------------------------------------------------------ pep

int cmd_pep(const std::string& action, const PepFlags& f, const std::string& out) {
  const pep::PepSpec s = f.spec();
  const pep::PepProblem P = pep::build(s);
  if (action == "build") {
    Sink sink(out, "pep_rows.txt");
    *sink << "kind=" << pep::to_string(s.kind) << " N=" << s.N << " gram_dim=" << P.gram_dim
          << " scalars=" << P.scalar_names.size() << " rows=" << P.constraints.size() << '\n';
    for (const auto& [fam, n] : pep::family_counts(P)) *sink << "  " << fam << ": " << n << '\n';
    for (const auto& c : P.constraints) *sink << c.name << (c.sense == pep::Sense::eq ? " =" : " <=") << '\n';
    for (const auto& n : P.notes) *sink << "note: " << n << '\n';
    return kOk;
  }
  if (action == "export") {
    Sink sink(out, "pep.dat-s");
    *sink << pep::export_sdpa(P);
    return kOk;
  }
  if (action == "solve") {
    const pep::PepSolution sol = pep::solve(P, f.tol);
    double bound = std::numeric_limits<double>::quiet_NaN();
    try {
      bound = experiments::closed_form_for(s);
    } catch (const std::exception&) {
    }
    Sink sink(out, "pep_solution.txt");
    *sink << "status=" << sdp::to_string(sol.status) << '\n'
          << "objective=" << num(sol.objective_value) << '\n'
          << "dual_objective=" << num(sol.dual_value) << '\n'
          << "closed_form_bound=" << num(bound) << '\n'
          << "iterations=" << sol.iterations << " pinf=" << num(sol.pinf) << " dinf=" << num(sol.dinf)
          << " relgap=" << num(sol.relgap) << '\n';
    for (std::size_t i = 0; i < P.constraints.size(); ++i) {
      if (i < sol.duals.size() && std::abs(sol.duals[i]) > 1e-9) {
        *sink << "dual " << P.constraints[i].name << ' ' << num(sol.duals[i]) << '\n';
      }
    }
    return sol.ok() ? kOk : kFail;
  }
  throw ConfigFailure("pep action must be build, solve or export");
}

// ------------------------------------------------------------ certify

std::vector<certify::CertParams> read_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFailure("cannot open grid '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  std::vector<certify::CertParams> grid;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line, ',');
    if (header.empty()) {
      header = cells;
      continue;
    }
    if (cells.size() != header.size()) throw ConfigFailure("grid row has wrong number of cells: " + line);
    double mu1 = 0, mu2 = 0, eta = 1, delta = 1;
    std::string L1 = "inf", L2 = "inf";
    int N = 1;
    for (std::size_t i = 0; i < header.size(); ++i) {
      const auto& h = header[i];
      const auto& c = cells[i];
      if (h == "mu1") mu1 = parse_modulus(c);
      else if (h == "mu2") mu2 = parse_modulus(c);
      else if (h == "L1") L1 = c;
      else if (h == "L2") L2 = c;
      else if (h == "N") N = static_cast<int>(parse_modulus(c));
      else if (h == "eta") eta = parse_modulus(c);
      else if (h == "Delta" || h == "delta") delta = parse_modulus(c);
      else throw ConfigFailure("unknown grid column '" + h + "'");
    }
    certify::CertParams p;
    p.p1 = class_of(mu1, L1);
    p.p2 = class_of(mu2, L2);
    p.N = N;
    p.eta = eta;
    p.Delta = delta;
    grid.push_back(p);
  }
  return grid;
}

int cmd_certify(const std::string& theorem, const std::string& grid_path, int samples, unsigned seed,
                const std::string& variant_name, const std::string& out) {
  certify::CertCase cc;
  try {
    cc = certify::case_from_string(theorem);
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
  if (samples < 1) throw ConfigFailure("--samples must be >= 1");
  std::vector<certify::Variant> variants;
  if (variant_name == "printed") variants = {certify::Variant::printed};
  else if (variant_name == "repaired") variants = {certify::Variant::repaired};
  else if (variant_name == "both") variants = {certify::Variant::printed, certify::Variant::repaired};
  else throw ConfigFailure("--variant must be printed, repaired or both");
  const auto grid = grid_path.empty() ? certify::documented_grid(cc) : read_grid_file(grid_path);

  Sink csv(out, "certify.csv");
  *csv << "case,variant,params,identity_max_residual,identity_ok,sign_violations,bound_factor\n";
  bool all_ok = true;
  for (auto v : variants) {
    double worst = 0.0;
    int id_fail = 0, sign_fail = 0;
    for (const auto& p : grid) {
      certify::Certificate c;
      try {
        c = certify::multipliers_for(cc, p, v);
      } catch (const certify::CaseMismatch& e) {
        throw ConfigFailure(std::string("grid point outside case: ") + certify::describe(p) + ": " + e.what());
      }
      const auto id = certify::verify_identity(c, samples, seed);
      const auto sv = certify::sign_violations(c);
      worst = std::max(worst, id.max_scaled_residual);
      id_fail += id.ok ? 0 : 1;
      sign_fail += sv.empty() ? 0 : 1;
      *csv << certify::to_string(cc) << ',' << certify::to_string(v) << ",\"" << certify::describe(p) << "\","
           << num(id.max_scaled_residual) << ',' << (id.ok ? "true" : "false") << ',' << sv.size() << ','
           << num(c.bound_factor) << '\n';
      for (const auto& s : sv) std::cerr << "sign violation " << s.name << '=' << num(s.value) << " at " << certify::describe(p) << '\n';
    }
    const bool ok = id_fail == 0 && sign_fail == 0;
    std::cout << "case=" << certify::to_string(cc) << " variant=" << certify::to_string(v) << " points=" << grid.size()
              << " samples=" << samples << " seed=" << seed << " max_scaled_residual=" << num(worst)
              << " identity_failures=" << id_fail << " sign_failures=" << sign_fail << " result=" << (ok ? "PASS" : "FAIL")
              << '\n';
    // The printed multipliers of a case with a repair are expected to fail.
    const bool expected_fail = v == certify::Variant::printed && certify::has_repair(cc);
    if (!ok && !expected_fail) all_ok = false;
    if (variants.size() == 1 && !ok) all_ok = false;
  }
  return all_ok ? kOk : kFail;
}

// ------------------------------------------------------------ tightness

int cmd_tightness(double L1, int N) {
  experiments::TightnessReport r;
  try {
    r = experiments::tightness(L1, N);
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
  std::cout << "L1=" << num(L1) << " N=" << N << " observed_min_gap=" << num(r.observed) << " bound=" << num(r.bound)
            << " diff=" << num(r.diff) << '\n';
  return std::abs(r.diff) > 1e-9 ? kFail : kOk;
}

// ------------------------------------------------------------ counterexample

int cmd_counterexample(int iters, const std::string& out) {
  if (iters < 1) throw ConfigFailure("--iters must be >= 1");
  const auto rows = experiments::counterexample(iters);
  Sink sink(out, "counterexample.csv");
  *sink << "N,min_gap,min_T,bound_T\n";
  bool ok = true;
  for (const auto& r : rows) {
    *sink << r.N << ',' << num(r.min_gap) << ',' << num(r.min_T) << ',' << num(r.bound) << '\n';
    if (!(r.min_T <= r.bound + 1e-12) || std::abs(r.min_gap - 1.0) > 1e-12) ok = false;
  }
  return ok ? kOk : kFail;
}

// ------------------------------------------------------------ sweep

std::vector<std::string> list_or(const std::string& s) { return split(s, ','); }

int cmd_sweep(const PepFlags& f, const std::string& grid_path, const std::string& L1s, const std::string& L2s,
              const std::string& mu1s, const std::string& mu2s, const std::string& Ns, const std::string& etas,
              unsigned seed, const std::string& out) {
  std::vector<pep::PepSpec> specs;
  pep::PepKind kind;
  try {
    kind = pep::kind_from_string(f.kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
  auto make = [&](double mu1, const std::string& L1, double mu2, const std::string& L2, int N, double eta) {
    pep::PepSpec s;
    s.kind = kind;
    s.params1 = class_of(mu1, L1);
    s.params2 = class_of(mu2, L2);
    s.N = kind == pep::PepKind::pl_onestep ? 1 : N;
    s.Delta = f.delta;
    s.eta = eta;
    if (s.N > 10) throw ConfigFailure("sweep points need N <= 10");
    return s;
  };
  if (!grid_path.empty()) {
    for (const auto& p : read_grid_file(grid_path)) {
      pep::PepSpec s;
      s.kind = kind;
      s.params1 = p.p1;
      s.params2 = p.p2;
      s.N = kind == pep::PepKind::pl_onestep ? 1 : p.N;
      s.Delta = p.Delta;
      s.eta = p.eta;
      if (s.N > 10) throw ConfigFailure("sweep points need N <= 10");
      specs.push_back(s);
    }
  } else {
    for (const auto& L1 : list_or(L1s))
      for (const auto& L2 : list_or(L2s))
        for (const auto& m1 : list_or(mu1s))
          for (const auto& m2 : list_or(mu2s))
            for (const auto& n : list_or(Ns))
              for (const auto& e : list_or(etas))
                specs.push_back(make(parse_modulus(m1), L1, parse_modulus(m2), L2,
                                     static_cast<int>(parse_modulus(n)), parse_modulus(e)));
  }
  Sink sink(out, "sweep.csv");
  *sink << experiments::sweep_header() << '\n';
  bool ok = true;
  for (const auto& s : specs) {
    const auto row = experiments::sweep_row(s, f.tol, seed);
    experiments::write_sweep_row(*sink, row);
    if (row.status == "ok" && !(row.pep_value <= row.closed_form + 1e-6 * std::max(1.0, row.closed_form))) ok = false;
    if (row.certificate_ok == "false") ok = false;
  }
  return ok ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DCA worst-case analysis: runs, closed-form bounds, PEPs and certificates"};
  app.require_subcommand(1);
  std::string out;
  app.add_option("--out", out, "directory for output files (default: stdout)");
  unsigned seed = 42;
  auto* seed_opt = app.add_option("--seed", seed, "random seed (DCAPEP_SEED overrides)");

  auto* run_cmd = app.add_subcommand("run", "run DCA on an instance config");
  std::string cfg, rule = "gap";
  double eps = 1e-8;
  int max_iter = 100;
  run_cmd->add_option("--config", cfg, "instance JSON")->required();
  run_cmd->add_option("--rule", rule, "gap or T");
  run_cmd->add_option("--eps", eps, "termination tolerance");
  run_cmd->add_option("--max-iter", max_iter, "iteration cap");

  auto* bound_cmd = app.add_subcommand("bound", "evaluate a closed-form bound");
  std::string theorem = "thm31_i";
  PepFlags bf;
  bound_cmd->add_option("--theorem", theorem, "thm31_i|thm31_ii|cor31_i|cor31_ii|cor31_iii|prop31_i|prop31_ii|thm41|cor41|thm51");
  bf.add(bound_cmd);

  auto* pep_cmd = app.add_subcommand("pep", "build, solve or export a PEP");
  std::string action;
  PepFlags pf;
  pep_cmd->add_option("action", action, "build|solve|export")->required();
  pf.add(pep_cmd);

  auto* cert_cmd = app.add_subcommand("certify", "verify a proof certificate");
  std::string cert_case, grid, variant = "both";
  int samples = 200;
  cert_cmd->add_option("--theorem", cert_case, "certificate case")->required();
  cert_cmd->add_option("--grid", grid, "CSV grid (columns among mu1,L1,mu2,L2,N,eta,Delta)");
  cert_cmd->add_option("--samples", samples, "identity samples");
  auto* cert_seed = cert_cmd->add_option("--seed", seed, "random seed");
  cert_cmd->add_option("--variant", variant, "printed|repaired|both");

  auto* tight_cmd = app.add_subcommand("tightness", "reproduce the worst-case example");
  double tL1 = 8.0;
  int tN = 3;
  tight_cmd->add_option("--L1", tL1, "smoothness of f1");
  tight_cmd->add_option("--N", tN, "iterations");

  auto* ce_cmd = app.add_subcommand("counterexample", "gap vs model decrease on the nonsmooth example");
  int iters = 30;
  ce_cmd->add_option("--iters", iters, "iterations");

  auto* sweep_cmd = app.add_subcommand("sweep", "bound vs PEP vs empirical over a grid");
  PepFlags sf;
  std::string sgrid, sL1 = "1", sL2 = "inf", smu1 = "0", smu2 = "0", sN = "1", seta = "1";
  sweep_cmd->add_option("--kind", sf.kind, "PEP kind");
  sweep_cmd->add_option("--grid", sgrid, "CSV grid file; otherwise the product of the lists below");
  sweep_cmd->add_option("--L1", sL1, "comma list");
  sweep_cmd->add_option("--L2", sL2, "comma list");
  sweep_cmd->add_option("--mu1", smu1, "comma list");
  sweep_cmd->add_option("--mu2", smu2, "comma list");
  sweep_cmd->add_option("--N", sN, "comma list");
  sweep_cmd->add_option("--eta", seta, "comma list");
  sweep_cmd->add_option("--delta", sf.delta, "f(x1) - f_star");
  sweep_cmd->add_option("--tol", sf.tol, "solver tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  const unsigned s = resolve_seed(seed, seed_opt->count() > 0 || cert_seed->count() > 0);

  try {
    if (*run_cmd) return cmd_run(cfg, rule, eps, max_iter, out);
    if (*bound_cmd) return cmd_bound(theorem, bf, out);
    if (*pep_cmd) return cmd_pep(action, pf, out);
    if (*cert_cmd) return cmd_certify(cert_case, grid, samples, s, variant, out);
    if (*tight_cmd) return cmd_tightness(tL1, tN);
    if (*ce_cmd) return cmd_counterexample(iters, out);
    if (*sweep_cmd) return cmd_sweep(sf, sgrid, sL1, sL2, smu1, smu2, sN, seta, s, out);
  } catch (const ConfigFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kFail;
  }
  return kConfig;
}
