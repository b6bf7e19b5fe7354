#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "noether/calcvar.hpp"
#include "noether/model.hpp"

namespace noether {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header plus rows; empty cells are nullopt.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<double>>> rows;

  int column(const std::string& name) const;  ///< -1 when absent
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Columns k, x1..xn, u1..ur, psi0, psi1..psin with %.17g numbers. The last
/// row leaves u empty; the first row leaves psi empty.
void write_extremal_csv(std::ostream& out, const Extremal& e);
void write_trajectory_csv(std::ostream& out, const Trajectory& t);
void write_sequence_csv(std::ostream& out, const StateSequence& s);

/// Rows must be consecutive in k. Co-state columns are required.
Extremal extremal_from_csv(const CsvTable& table, int n, int r);
Trajectory trajectory_from_csv(const CsvTable& table, int n, int r);
StateSequence sequence_from_csv(const CsvTable& table, int n);

/// True when the table carries psi0 and psi1..psin.
bool has_costates(const CsvTable& table, int n);

}  // namespace noether
