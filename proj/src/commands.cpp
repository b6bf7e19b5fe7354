#include "noether/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "noether/calcvar.hpp"
#include "noether/config.hpp"
#include "noether/discovery.hpp"
#include "noether/io.hpp"
#include "noether/noether.hpp"
#include "noether/pmp.hpp"

namespace noether::cli {
namespace {

using nlohmann::json;

/// Configuration or input problem detected after the config parsed.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json columns_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(vector_json(m.col(c)));
  return out;
}

json residuals_json(const ResidualReport& r) {
  return {{"dynamics_res", r.dynamics_res},
          {"adjoint_res", r.adjoint_res},
          {"stationarity_res", r.stationarity_res},
          {"maximality_ok", r.maximality_ok},
          {"worst_k", r.worst_k}};
}

json extremal_json(const Extremal& e) {
  return {{"first", e.first()},
          {"psi0", e.psi0},
          {"x", columns_json(e.trajectory.x)},
          {"u", columns_json(e.trajectory.u)},
          {"psi", columns_json(e.psi)}};
}

json invariance_json(const InvarianceReport& r) {
  json params = json::array();
  for (const auto& p : r.parameters) {
    json entry{{"lagrangian_residual_deriv", p.lagrangian_residual_deriv},
               {"worst_trajectory", p.worst_trajectory},
               {"worst_k", p.worst_k}};
    if (p.dynamics_residual_deriv.size() > 0) entry["dynamics_residual_deriv"] = vector_json(p.dynamics_residual_deriv);
    params.push_back(std::move(entry));
  }
  return {{"tol", r.tol}, {"max_abs", r.max_abs}, {"pass", r.pass}, {"parameters", std::move(params)}};
}

json conservation_json(const ConservationReport& r) {
  json params = json::array();
  for (const auto& p : r.parameters) {
    params.push_back({{"values", p.values}, {"drift", p.drift}, {"tol", p.tol}, {"pass", p.pass}});
  }
  json out{{"first_k", r.first_k}, {"last_k", r.last_k}, {"pass", r.pass}, {"parameters", std::move(params)}};
  if (!r.note.empty()) out["note"] = r.note;
  return out;
}

json solve_json(const ProblemSpec& p, const SolveResult& s) {
  json out{{"converged", s.converged},
           {"branch", s.extremal.normal() ? "normal" : "abnormal"},
           {"abnormal_fallback_engaged", s.abnormal_fallback_engaged},
           {"iterations", s.iterations},
           {"condition_estimate", s.condition_estimate},
           {"message", s.message},
           {"residuals", residuals_json(s.report)},
           {"extremal", extremal_json(s.extremal)}};
  out["singular_iteration"] = s.singular_iteration ? json(*s.singular_iteration) : json(nullptr);
  try {
    out["cost"] = cost(p, s.extremal.trajectory);
  } catch (const DomainError&) {
    out["cost"] = nullptr;
  }
  return out;
}

std::uint64_t seed_of(const CommandOptions& o) { return o.seed.value_or(kDefaultSampleSeed); }

SolveResult solve_or_throw(const ProblemSpec& p, const ConfigDocument& doc, std::ostream& err) {
  if (!p.terminal_fixed()) throw UsageError("the solver needs every x_end coordinate fixed");
  SolveResult s = solve_extremal(p, doc.solver);
  if (!s.converged) err << "solver did not converge: " << s.message << "\n";
  return s;
}

/// Sequence of the variational problem: from --extremal or by solving.
struct SequenceSource {
  StateSequence sequence;
  std::optional<SolveResult> solve;
};

SequenceSource variational_sequence(const CommandOptions& o, const ConfigDocument& doc, std::ostream& err) {
  SequenceSource src;
  if (o.extremal) {
    src.sequence = sequence_from_csv(read_csv_file(*o.extremal), doc.n);
    return src;
  }
  const ProblemSpec p = problem_spec(doc);
  src.solve = solve_or_throw(p, doc, err);
  src.sequence = sequence_from_oc(src.solve->extremal.trajectory, doc.n, doc.m);
  return src;
}

int status_exit(bool converged, bool pass) {
  if (!converged) return kExitNoConvergence;
  return pass ? kExitOk : kExitCheckFailed;
}

int cmd_solve(const CommandOptions& o, const ConfigDocument& doc, json& report, std::ostream& err) {
  const ProblemSpec p = problem_spec(doc);
  const SolveResult s = solve_or_throw(p, doc, err);
  report["solve"] = solve_json(p, s);
  report["maximality"] = [&] {
    const MaximalityReport m = maximality_check(p, s.extremal, doc.solver);
    return json{{"ok", m.ok},
                {"worst_stationarity", m.worst_stationarity},
                {"worst_k", m.worst_k},
                {"grid_checked", m.grid_checked},
                {"grid_excess", m.grid_excess}};
  }();
  std::optional<StateSequence> seq;
  if (doc.kind != ProblemKind::Control) {
    seq = sequence_from_oc(s.extremal.trajectory, doc.n, doc.m);
    report["sequence"] = {{"first", seq->first}, {"x", columns_json(seq->x)}};
  }
  if (o.write_extremal) {
    std::ofstream file(*o.write_extremal);
    if (!file) throw UsageError("cannot write '" + *o.write_extremal + "'");
    if (seq) {
      write_sequence_csv(file, *seq);
    } else {
      write_extremal_csv(file, s.extremal);
    }
  }
  return s.converged ? kExitOk : kExitNoConvergence;
}

int cmd_check(const CommandOptions& o, const ConfigDocument& doc, json& report) {
  const double tol = o.tol.value_or(doc.check_tol.value_or(1e-9));
  const SymmetryFamily fam = symmetry_family(doc);
  InvarianceReport r;
  switch (doc.kind) {
    case ProblemKind::Control: {
      const ProblemSpec p = problem_spec(doc);
      r = check_quasi_invariance(p, fam, sample_trajectories(p, doc.samples, seed_of(o)), tol);
      break;
    }
    case ProblemKind::FirstOrder:
      r = check_quasi_invariance(cv_problem(doc), fam,
                                 sample_sequences(doc.horizon, doc.n, 1, doc.samples, seed_of(o)), tol);
      break;
    case ProblemKind::HigherOrder:
      r = check_quasi_invariance(ho_problem(doc), fam,
                                 sample_sequences(doc.horizon, doc.n, doc.m, doc.samples, seed_of(o)), tol);
      break;
  }
  report["samples"] = doc.samples;
  report["seed"] = seed_of(o);
  report["invariance"] = invariance_json(r);
  return r.pass ? kExitOk : kExitCheckFailed;
}

int cmd_noether(const CommandOptions& o, const ConfigDocument& doc, json& report, std::ostream& err) {
  const double rel_tol = o.tol.value_or(1e-8);
  const SymmetryFamily fam = symmetry_family(doc);
  if (doc.kind == ProblemKind::Control) {
    const ProblemSpec p = problem_spec(doc);
    std::optional<SolveResult> s;
    Extremal e;
    if (o.extremal) {
      const CsvTable table = read_csv_file(*o.extremal);
      e = extremal_from_csv(table, doc.n, doc.r);
      check_shape(p, e.trajectory);
      report["source"] = "file";
    } else {
      s = solve_or_throw(p, doc, err);
      e = s->extremal;
      report["source"] = "solver";
      report["solve"] = solve_json(p, *s);
    }
    const ConservationReport c = conservation_report(fam, e, rel_tol);
    report["conservation"] = conservation_json(c);
    return status_exit(!s || s->converged, c.pass);
  }

  const SequenceSource src = variational_sequence(o, doc, err);
  report["source"] = src.solve ? "solver" : "file";
  const StateSequence& seq = src.sequence;
  ConservationReport c;
  if (doc.kind == ProblemKind::FirstOrder) {
    const CVProblem cv = cv_problem(doc);
    c.first_k = seq.first + 1;
    c.last_k = seq.last() - 1;
    for (int i = 0; i < fam.rho(); ++i) {
      std::vector<double> values;
      for (int k = c.first_k; k <= c.last_k; ++k) values.push_back(cv_noether_integral(cv, fam, seq, k, i));
      c.parameters.push_back(summarize_sequence(std::move(values), rel_tol));
    }
  } else {
    const HOProblem ho = ho_problem(doc);
    c.first_k = seq.first;
    c.last_k = seq.last() - 2 * doc.m + 1;
    for (int i = 0; i < fam.rho(); ++i) {
      std::vector<double> values;
      for (int k = c.first_k; k <= c.last_k; ++k) values.push_back(ho_noether_integral(ho, fam, seq, k, i));
      c.parameters.push_back(summarize_sequence(std::move(values), rel_tol));
    }
  }
  c.pass = std::all_of(c.parameters.begin(), c.parameters.end(), [](const auto& p) { return p.pass; });
  report["conservation"] = conservation_json(c);
  return status_exit(!src.solve || src.solve->converged, c.pass);
}

int cmd_residual(const CommandOptions& o, const ConfigDocument& doc, json& report, std::ostream& err, bool poisson) {
  if (poisson ? doc.kind != ProblemKind::HigherOrder : doc.kind != ProblemKind::FirstOrder) {
    throw UsageError(poisson ? "ep needs an [ho] section" : "el needs a [cv] section");
  }
  const double tol = o.tol.value_or(1e-8);
  const SequenceSource src = variational_sequence(o, doc, err);
  const StateSequence& seq = src.sequence;
  const int m = doc.m;
  json rows = json::array();
  double worst = 0.0;
  std::optional<CVProblem> cv;
  std::optional<HOProblem> ho;
  if (poisson) {
    ho = ho_problem(doc);
  } else {
    cv = cv_problem(doc);
  }
  for (int k = seq.first; k + 2 * m <= seq.last(); ++k) {
    const Eigen::VectorXd r = poisson ? euler_poisson_residual(*ho, seq, k) : el_residual(*cv, seq, k);
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
    rows.push_back({{"k", k}, {"residual", vector_json(r)}});
  }
  report["source"] = src.solve ? "solver" : "file";
  report["residuals"] = std::move(rows);
  report["max_abs"] = worst;
  report["tol"] = tol;
  report["pass"] = worst <= tol;
  return status_exit(!src.solve || src.solve->converged, worst <= tol);
}

int cmd_discover(const CommandOptions& o, const ConfigDocument& doc, json& report) {
  const ProblemSpec p = problem_spec(doc);
  const GeneratorAnsatz ansatz =
      doc.basis ? GeneratorAnsatz::custom(*doc.basis) : GeneratorAnsatz::standard(p.n(), p.r(), doc.max_basis);
  const double threshold = o.tol.value_or(kDiscoveryThreshold);
  const DiscoveryResult d = discover(p, ansatz, sample_trajectories(p, doc.samples, seed_of(o)));
  const bool found = !d.degenerate && d.residual <= threshold;

  json basis = json::array();
  for (const auto& b : ansatz.basis) basis.push_back(to_string(b));
  json X = json::array(), U = json::array();
  for (const auto& e : d.family.transform_exprs()) X.push_back(to_string(e));
  for (const auto& e : d.family.control_deformation_exprs()) U.push_back(to_string(e));
  report["basis"] = std::move(basis);
  report["residual"] = d.residual;
  report["threshold"] = threshold;
  report["null_dimension"] = d.null_dimension;
  report["degenerate"] = d.degenerate;
  report["discovered"] = found;
  report["message"] = d.message;
  report["family"] = {{"rho", 1}, {"X", std::move(X)}, {"u", std::move(U)}, {"Phi", to_string(d.family.gauge_expr())}};
  if (found) {
    // Independent sample: the recovered family must hold off the fitting data.
    const InvarianceReport v =
        check_quasi_invariance(p, d.family, sample_trajectories(p, doc.samples, seed_of(o) + 1), 1e-6);
    report["verification"] = invariance_json(v);
  }
  return found || d.degenerate ? kExitOk : kExitCheckFailed;
}

}  // namespace

CommandResult run_command(const CommandOptions& o, std::ostream& err) {
  CommandResult result;
  json report{{"command", o.command}, {"config", o.config}};
  try {
    const ConfigDocument doc = load_config(o.config);
    if (o.command == "solve") {
      result.exit_code = cmd_solve(o, doc, report, err);
    } else if (o.command == "check") {
      result.exit_code = cmd_check(o, doc, report);
    } else if (o.command == "noether") {
      result.exit_code = cmd_noether(o, doc, report, err);
    } else if (o.command == "el") {
      result.exit_code = cmd_residual(o, doc, report, err, false);
    } else if (o.command == "ep") {
      result.exit_code = cmd_residual(o, doc, report, err, true);
    } else if (o.command == "discover") {
      result.exit_code = cmd_discover(o, doc, report);
    } else {
      throw UsageError("unknown command '" + o.command + "'");
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return {kExitUsage, {}};
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return {kExitUsage, {}};
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << "\n";
    return {kExitUsage, {}};
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return {kExitUsage, {}};
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return {kExitUsage, {}};
  }
  report["exit_code"] = result.exit_code;
  result.report = report.dump(2);
  return result;
}

int dispatch(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const CommandResult result = run_command(options, err);
  if (result.report.empty()) return result.exit_code;
  if (options.out) {
    std::ofstream file(*options.out);
    if (!file) {
      err << "error: cannot write '" << *options.out << "'\n";
      return kExitUsage;
    }
    file << result.report << "\n";
  } else {
    out << result.report << "\n";
  }
  return result.exit_code;
}

}  // namespace noether::cli
