#include "noether/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace noether {
namespace {

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  std::map<std::string, Entry, std::less<>> entries;
  std::set<std::string, std::less<>> used;
  int line = 0;
};

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

const std::set<std::string, std::less<>>& known_sections() {
  static const std::set<std::string, std::less<>> names{"horizon", "dims",     "lagrangian", "dynamics",
                                                        "cv",      "ho",       "control_set", "boundary",
                                                        "symmetry", "solver",  "check",       "discover"};
  return names;
}

std::map<std::string, Section, std::less<>> split_sections(std::string_view text) {
  std::map<std::string, Section, std::less<>> sections;
  Section* current = nullptr;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (!known_sections().count(name)) throw ConfigError(where + ": unknown section [" + name + "]");
      if (sections.count(name)) throw ConfigError(where + ": duplicate section [" + name + "]");
      current = &sections[name];
      current->line = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    if (!current) throw ConfigError(where + ": key outside any section");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (current->entries.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    current->entries[key] = Entry{std::string(trim(line.substr(eq + 1))), line_no};
  }
  return sections;
}

class Reader {
 public:
  explicit Reader(std::map<std::string, Section, std::less<>> sections) : sections_(std::move(sections)) {}

  bool has(std::string_view section) const { return sections_.count(section) > 0; }
  bool has(std::string_view section, std::string_view key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.entries.count(key) > 0;
  }

  const Entry& raw(std::string_view section, std::string_view key) {
    auto it = sections_.find(section);
    if (it == sections_.end()) throw ConfigError("missing section [" + std::string(section) + "]");
    auto e = it->second.entries.find(key);
    if (e == it->second.entries.end()) {
      throw ConfigError("[" + std::string(section) + "] missing key '" + std::string(key) + "'");
    }
    it->second.used.insert(std::string(key));
    return e->second;
  }

  std::string where(std::string_view section, std::string_view key) {
    return "[" + std::string(section) + "] " + std::string(key) + " (line " + std::to_string(raw(section, key).line) +
           ")";
  }

  double number(std::string_view section, std::string_view key) {
    return parse_number(raw(section, key).value, where(section, key));
  }

  int integer(std::string_view section, std::string_view key) {
    const std::string& v = raw(section, key).value;
    int out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError(where(section, key) + ": expected an integer, got '" + v + "'");
    }
    return out;
  }

  bool boolean(std::string_view section, std::string_view key) {
    const std::string& v = raw(section, key).value;
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError(where(section, key) + ": expected true or false, got '" + v + "'");
  }

  Expr expression(std::string_view section, std::string_view key) {
    const std::string& v = raw(section, key).value;
    try {
      return parse(v);
    } catch (const ParseError& e) {
      throw ConfigError(where(section, key) + ": " + e.what());
    }
  }

  std::vector<std::string> list(std::string_view section, std::string_view key) {
    const std::string& v = raw(section, key).value;
    std::vector<std::string> items;
    if (trim(v).empty()) return items;
    std::size_t pos = 0;
    while (true) {
      const auto comma = v.find(',', pos);
      items.emplace_back(trim(std::string_view(v).substr(pos, comma == std::string::npos ? v.npos : comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return items;
  }

  std::vector<std::optional<double>> optional_numbers(std::string_view section, std::string_view key) {
    std::vector<std::optional<double>> out;
    for (const auto& item : list(section, key)) {
      if (item == "free") {
        out.emplace_back(std::nullopt);
      } else {
        out.emplace_back(parse_number(item, where(section, key)));
      }
    }
    return out;
  }

  Eigen::VectorXd numbers(std::string_view section, std::string_view key) {
    const auto items = list(section, key);
    Eigen::VectorXd out(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) {
      out[static_cast<Eigen::Index>(i)] = parse_number(items[i], where(section, key));
    }
    return out;
  }

  void reject_unused() const {
    for (const auto& [name, section] : sections_) {
      for (const auto& [key, entry] : section.entries) {
        if (!section.used.count(key)) {
          throw ConfigError("[" + name + "] unknown key '" + key + "' (line " + std::to_string(entry.line) + ")");
        }
      }
    }
  }

  static double parse_number(const std::string& text, const std::string& where) {
    double out = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError(where + ": expected a number, got '" + text + "'");
    return out;
  }

 private:
  std::map<std::string, Section, std::less<>> sections_;
};

std::string join_numbers(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_number(v[i]);
  }
  return out;
}

void read_symmetry(Reader& in, ConfigDocument& doc) {
  if (!in.has("symmetry")) return;
  SymmetrySection sym;
  if (in.has("symmetry", "rho")) sym.rho = in.integer("symmetry", "rho");
  for (int i = 1; i <= doc.n; ++i) sym.X.push_back(in.expression("symmetry", "X" + std::to_string(i)));
  sym.Phi = in.has("symmetry", "Phi") ? in.expression("symmetry", "Phi") : Expr::number(0.0);
  if (doc.kind == ProblemKind::Control) {
    for (int j = 1; j <= doc.r; ++j) {
      const std::string key = "u" + std::to_string(j);
      sym.u.push_back(in.has("symmetry", key) ? in.expression("symmetry", key) : Expr::variable(key));
    }
  }
  if (in.has("symmetry", "epsilon")) sym.epsilon = in.number("symmetry", "epsilon");
  doc.symmetry = std::move(sym);
}

}  // namespace

bool operator==(const ConfigDocument& a, const ConfigDocument& b) {
  auto same_sym = [](const std::optional<SymmetrySection>& x, const std::optional<SymmetrySection>& y) {
    if (x.has_value() != y.has_value()) return false;
    if (!x) return true;
    return x->rho == y->rho && x->X == y->X && x->Phi == y->Phi && x->u == y->u && x->epsilon == y->epsilon;
  };
  auto same_set = [](const ControlSet& x, const ControlSet& y) {
    return x.kind == y.kind && x.lower == y.lower && x.upper == y.upper;
  };
  const SolverOptions& s = a.solver;
  const SolverOptions& t = b.solver;
  return a.kind == b.kind && a.horizon.first == b.horizon.first && a.horizon.periods == b.horizon.periods &&
         a.n == b.n && a.r == b.r && a.m == b.m && a.lagrangian == b.lagrangian && a.dynamics == b.dynamics &&
         same_set(a.control_set, b.control_set) && a.x_start == b.x_start && a.x_end == b.x_end &&
         same_sym(a.symmetry, b.symmetry) && s.max_newton_iters == t.max_newton_iters &&
         s.newton_tol == t.newton_tol && s.backtrack == t.backtrack && s.min_step == t.min_step &&
         s.abnormal_fallback == t.abnormal_fallback && s.maximality_grid_points == t.maximality_grid_points &&
         a.samples == b.samples && a.check_tol == b.check_tol && a.basis == b.basis && a.max_basis == b.max_basis;
}

ConfigDocument parse_config(std::string_view text) {
  Reader in(split_sections(text));
  ConfigDocument doc;

  if (in.has("cv") && in.has("ho")) throw ConfigError("[cv] and [ho] are mutually exclusive");
  doc.kind = in.has("cv") ? ProblemKind::FirstOrder : in.has("ho") ? ProblemKind::HigherOrder : ProblemKind::Control;

  doc.horizon.first = in.integer("horizon", "M");
  doc.horizon.periods = in.integer("horizon", "N");
  if (doc.horizon.periods < 1) throw ConfigError("empty horizon: N must be positive");
  doc.n = in.integer("dims", "n");
  if (doc.n < 1) throw ConfigError("[dims] n must be positive");

  if (doc.kind == ProblemKind::Control) {
    doc.r = in.integer("dims", "r");
    if (doc.r < 0) throw ConfigError("[dims] r must be non-negative");
    doc.lagrangian = in.expression("lagrangian", "L");
    for (int i = 1; i <= doc.n; ++i) doc.dynamics.push_back(in.expression("dynamics", "phi" + std::to_string(i)));
  } else {
    doc.r = doc.n;
    if (in.has("dims", "r") && in.integer("dims", "r") != doc.n) {
      throw ConfigError("[dims] r must equal n for variational problems");
    }
    const char* section = doc.kind == ProblemKind::FirstOrder ? "cv" : "ho";
    doc.m = doc.kind == ProblemKind::HigherOrder ? in.integer("ho", "m") : 1;
    if (doc.m < 1) throw ConfigError("[ho] m must be at least 1");
    doc.lagrangian = in.expression(section, "L");
  }

  if (in.has("control_set")) {
    const std::string kind = in.raw("control_set", "kind").value;
    if (kind == "box") {
      const Eigen::VectorXd lo = in.numbers("control_set", "lower");
      const Eigen::VectorXd hi = in.numbers("control_set", "upper");
      if (lo.size() != doc.r || hi.size() != doc.r) throw ConfigError("[control_set] bounds must have r entries");
      try {
        doc.control_set = ControlSet::box(lo, hi);
      } catch (const ModelError& e) {
        throw ConfigError(std::string("[control_set] ") + e.what());
      }
    } else if (kind != "free") {
      throw ConfigError("[control_set] kind must be free or box, got '" + kind + "'");
    }
    if (doc.kind != ProblemKind::Control && doc.control_set.is_box()) {
      throw ConfigError("[control_set] variational problems have free controls");
    }
  }

  const int boundary_size = doc.kind == ProblemKind::HigherOrder ? doc.m * doc.n : doc.n;
  doc.x_start = in.numbers("boundary", "x_start");
  doc.x_end = in.optional_numbers("boundary", "x_end");
  if (doc.x_start.size() != boundary_size || static_cast<int>(doc.x_end.size()) != boundary_size) {
    throw ConfigError("[boundary] x_start and x_end must have " + std::to_string(boundary_size) + " entries");
  }

  read_symmetry(in, doc);

  SolverOptions& opt = doc.solver;
  if (in.has("solver", "max_newton_iters")) opt.max_newton_iters = in.integer("solver", "max_newton_iters");
  if (in.has("solver", "newton_tol")) opt.newton_tol = in.number("solver", "newton_tol");
  if (in.has("solver", "backtrack")) opt.backtrack = in.number("solver", "backtrack");
  if (in.has("solver", "min_step")) opt.min_step = in.number("solver", "min_step");
  if (in.has("solver", "abnormal_fallback")) opt.abnormal_fallback = in.boolean("solver", "abnormal_fallback");
  if (in.has("solver", "maximality_grid_points")) {
    opt.maximality_grid_points = in.integer("solver", "maximality_grid_points");
  }
  if (opt.max_newton_iters < 1 || !(opt.newton_tol > 0.0) || !(opt.backtrack > 0.0 && opt.backtrack < 1.0) ||
      !(opt.min_step > 0.0) || opt.maximality_grid_points < 0) {
    throw ConfigError("[solver] options out of range");
  }

  if (in.has("check", "samples")) doc.samples = in.integer("check", "samples");
  if (in.has("check", "tol")) doc.check_tol = in.number("check", "tol");
  if (doc.samples < 1) throw ConfigError("[check] samples must be positive");
  if (in.has("discover", "basis")) {
    std::vector<Expr> basis;
    for (const auto& item : in.list("discover", "basis")) {
      try {
        basis.push_back(parse(item));
      } catch (const ParseError& e) {
        throw ConfigError(in.where("discover", "basis") + ": " + e.what());
      }
    }
    doc.basis = std::move(basis);
  }
  if (in.has("discover", "max_basis")) doc.max_basis = in.integer("discover", "max_basis");

  in.reject_unused();

  // Vocabulary and dimension checks live in the model constructors.
  try {
    (void)problem_spec(doc);
    if (doc.symmetry) (void)symmetry_family(doc);
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  return doc;
}

ConfigDocument load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_config(buffer.str());
}

std::string to_ini(const ConfigDocument& doc) {
  std::ostringstream out;
  out << "[horizon]\nM = " << doc.horizon.first << "\nN = " << doc.horizon.periods << "\n\n";
  out << "[dims]\nn = " << doc.n << "\n";
  if (doc.kind == ProblemKind::Control) out << "r = " << doc.r << "\n";
  out << "\n";
  switch (doc.kind) {
    case ProblemKind::Control:
      out << "[lagrangian]\nL = " << to_string(doc.lagrangian) << "\n\n[dynamics]\n";
      for (std::size_t i = 0; i < doc.dynamics.size(); ++i) {
        out << "phi" << i + 1 << " = " << to_string(doc.dynamics[i]) << "\n";
      }
      out << "\n[control_set]\nkind = " << (doc.control_set.is_box() ? "box" : "free") << "\n";
      if (doc.control_set.is_box()) {
        out << "lower = " << join_numbers(doc.control_set.lower) << "\n";
        out << "upper = " << join_numbers(doc.control_set.upper) << "\n";
      }
      out << "\n";
      break;
    case ProblemKind::FirstOrder:
      out << "[cv]\nL = " << to_string(doc.lagrangian) << "\n\n";
      break;
    case ProblemKind::HigherOrder:
      out << "[ho]\nm = " << doc.m << "\nL = " << to_string(doc.lagrangian) << "\n\n";
      break;
  }
  out << "[boundary]\nx_start = " << join_numbers(doc.x_start) << "\nx_end = ";
  for (std::size_t i = 0; i < doc.x_end.size(); ++i) {
    if (i) out << ", ";
    out << (doc.x_end[i] ? format_number(*doc.x_end[i]) : "free");
  }
  out << "\n\n";
  if (doc.symmetry) {
    const SymmetrySection& sym = *doc.symmetry;
    out << "[symmetry]\nrho = " << sym.rho << "\n";
    for (std::size_t i = 0; i < sym.X.size(); ++i) out << "X" << i + 1 << " = " << to_string(sym.X[i]) << "\n";
    out << "Phi = " << to_string(sym.Phi) << "\n";
    for (std::size_t j = 0; j < sym.u.size(); ++j) out << "u" << j + 1 << " = " << to_string(sym.u[j]) << "\n";
    if (sym.epsilon) out << "epsilon = " << format_number(*sym.epsilon) << "\n";
    out << "\n";
  }
  const SolverOptions& s = doc.solver;
  out << "[solver]\nmax_newton_iters = " << s.max_newton_iters << "\nnewton_tol = " << format_number(s.newton_tol)
      << "\nbacktrack = " << format_number(s.backtrack) << "\nmin_step = " << format_number(s.min_step)
      << "\nabnormal_fallback = " << (s.abnormal_fallback ? "true" : "false")
      << "\nmaximality_grid_points = " << s.maximality_grid_points << "\n\n";
  out << "[check]\nsamples = " << doc.samples << "\n";
  if (doc.check_tol) out << "tol = " << format_number(*doc.check_tol) << "\n";
  out << "\n[discover]\nmax_basis = " << doc.max_basis << "\n";
  if (doc.basis) {
    out << "basis = ";
    for (std::size_t b = 0; b < doc.basis->size(); ++b) out << (b ? ", " : "") << to_string((*doc.basis)[b]);
    out << "\n";
  }
  return out.str();
}

CVProblem cv_problem(const ConfigDocument& doc) {
  if (doc.kind != ProblemKind::FirstOrder) throw ConfigError("config has no [cv] section");
  Eigen::VectorXd end(doc.n);
  for (int i = 0; i < doc.n; ++i) {
    if (!doc.x_end[static_cast<std::size_t>(i)]) throw ConfigError("[boundary] variational problems need a fixed x_end");
    end[i] = *doc.x_end[static_cast<std::size_t>(i)];
  }
  return CVProblem(doc.horizon, doc.n, doc.lagrangian, doc.x_start, end);
}

HOProblem ho_problem(const ConfigDocument& doc) {
  if (doc.kind != ProblemKind::HigherOrder) throw ConfigError("config has no [ho] section");
  Eigen::VectorXd end(static_cast<Eigen::Index>(doc.x_end.size()));
  for (std::size_t i = 0; i < doc.x_end.size(); ++i) {
    if (!doc.x_end[i]) throw ConfigError("[boundary] variational problems need a fixed x_end");
    end[static_cast<Eigen::Index>(i)] = *doc.x_end[i];
  }
  return HOProblem(doc.horizon, doc.n, doc.m, doc.lagrangian, doc.x_start, end);
}

ProblemSpec problem_spec(const ConfigDocument& doc) {
  switch (doc.kind) {
    case ProblemKind::FirstOrder: return cv_to_oc(cv_problem(doc));
    case ProblemKind::HigherOrder: return ho_to_oc(ho_problem(doc));
    case ProblemKind::Control: break;
  }
  return ProblemSpec(doc.horizon, doc.n, doc.r, doc.lagrangian, doc.dynamics, doc.control_set, doc.x_start,
                     doc.x_end);
}

SymmetryFamily symmetry_family(const ConfigDocument& doc) {
  if (!doc.symmetry) throw ConfigError("config has no [symmetry] section");
  const SymmetrySection& sym = *doc.symmetry;
  switch (doc.kind) {
    case ProblemKind::FirstOrder: return SymmetryFamily::first_order(doc.n, sym.rho, sym.X, sym.Phi);
    case ProblemKind::HigherOrder: return SymmetryFamily::higher_order(doc.n, doc.m, sym.rho, sym.X, sym.Phi);
    case ProblemKind::Control: break;
  }
  return SymmetryFamily::control(doc.n, doc.r, sym.rho, sym.X, sym.Phi, sym.u, sym.epsilon);
}

}  // namespace noether
