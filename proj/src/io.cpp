#include "noether/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace noether {
namespace {

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trimmed(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
    if (comma == std::string::npos) return out;
    pos = comma + 1;
  }
}

int required(const CsvTable& t, const std::string& name) {
  const int c = t.column(name);
  if (c < 0) throw FormatError("missing column '" + name + "'");
  return c;
}

double value(const CsvTable& t, std::size_t row, int col) {
  const auto& v = t.rows[row][static_cast<std::size_t>(col)];
  if (!v) throw FormatError("empty cell in column '" + t.header[static_cast<std::size_t>(col)] + "', row " +
                            std::to_string(row + 1));
  return *v;
}

/// First k, checking the rows run k, k+1, ...
int first_period(const CsvTable& t) {
  if (t.rows.empty()) throw FormatError("table has no rows");
  const int kc = required(t, "k");
  const double k0 = value(t, 0, kc);
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    if (value(t, row, kc) != k0 + static_cast<double>(row)) throw FormatError("rows must have consecutive k");
  }
  if (k0 != std::floor(k0)) throw FormatError("k must be an integer");
  return static_cast<int>(k0);
}

Eigen::MatrixXd block(const CsvTable& t, const std::string& prefix, int count, std::size_t row_begin,
                      std::size_t row_end) {
  Eigen::MatrixXd out(count, static_cast<Eigen::Index>(row_end - row_begin));
  for (int i = 0; i < count; ++i) {
    const int col = required(t, prefix + std::to_string(i + 1));
    for (std::size_t row = row_begin; row < row_end; ++row) {
      out(i, static_cast<Eigen::Index>(row - row_begin)) = value(t, row, col);
    }
  }
  return out;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    std::vector<std::string> cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                        " cells, got " + std::to_string(cells.size()));
    }
    std::vector<std::optional<double>> row;
    for (const auto& c : cells) {
      if (c.empty()) {
        row.emplace_back();
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size()) {
        throw FormatError("line " + std::to_string(line_no) + ": bad number '" + c + "'");
      }
      row.emplace_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw FormatError("empty CSV input");
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw FormatError("cannot open '" + path + "'");
  return read_csv(file);
}

namespace {

void write_rows(std::ostream& out, const Trajectory& t, const Extremal* e) {
  const Eigen::Index n = t.x.rows(), r = t.u.rows();
  out << "k";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",x" << i;
  for (Eigen::Index j = 1; j <= r; ++j) out << ",u" << j;
  if (e) {
    out << ",psi0";
    for (Eigen::Index i = 1; i <= n; ++i) out << ",psi" << i;
  }
  out << "\n";
  for (Eigen::Index idx = 0; idx < t.x.cols(); ++idx) {
    out << t.first + idx;
    for (Eigen::Index i = 0; i < n; ++i) out << "," << cell(t.x(i, idx));
    for (Eigen::Index j = 0; j < r; ++j) out << "," << (idx < t.u.cols() ? cell(t.u(j, idx)) : "");
    if (e) {
      out << "," << cell(e->psi0);
      for (Eigen::Index i = 0; i < n; ++i) out << "," << (idx > 0 ? cell(e->psi(i, idx - 1)) : "");
    }
    out << "\n";
  }
}

}  // namespace

void write_extremal_csv(std::ostream& out, const Extremal& e) { write_rows(out, e.trajectory, &e); }

void write_trajectory_csv(std::ostream& out, const Trajectory& t) { write_rows(out, t, nullptr); }

void write_sequence_csv(std::ostream& out, const StateSequence& s) {
  out << "k";
  for (Eigen::Index i = 1; i <= s.x.rows(); ++i) out << ",x" << i;
  out << "\n";
  for (Eigen::Index idx = 0; idx < s.x.cols(); ++idx) {
    out << s.first + idx;
    for (Eigen::Index i = 0; i < s.x.rows(); ++i) out << "," << cell(s.x(i, idx));
    out << "\n";
  }
}

bool has_costates(const CsvTable& table, int n) {
  if (table.column("psi0") < 0) return false;
  for (int i = 1; i <= n; ++i) {
    if (table.column("psi" + std::to_string(i)) < 0) return false;
  }
  return true;
}

Trajectory trajectory_from_csv(const CsvTable& table, int n, int r) {
  Trajectory t;
  t.first = first_period(table);
  const std::size_t rows = table.rows.size();
  if (rows < 2) throw FormatError("a trajectory needs at least two rows");
  t.x = block(table, "x", n, 0, rows);
  t.u = block(table, "u", r, 0, rows - 1);
  return t;
}

Extremal extremal_from_csv(const CsvTable& table, int n, int r) {
  if (!has_costates(table, n)) throw FormatError("extremal file needs columns psi0, psi1..psin");
  Extremal e;
  e.trajectory = trajectory_from_csv(table, n, r);
  e.psi0 = value(table, 0, table.column("psi0"));
  e.psi = block(table, "psi", n, 1, table.rows.size());
  return e;
}

StateSequence sequence_from_csv(const CsvTable& table, int n) {
  StateSequence s;
  s.first = first_period(table);
  s.x = block(table, "x", n, 0, table.rows.size());
  return s;
}

}  // namespace noether
