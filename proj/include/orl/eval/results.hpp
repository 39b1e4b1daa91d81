#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace orl::eval {

/// One row of the experiment results table. FQE columns are empty when absent.
struct ResultRow {
  std::string cell_id;
  std::string algorithm;
  std::string variant;
  std::string mode;
  int seeds = 0;
  double iqm = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double normalised = 0.0;
  std::optional<double> fqe;
  std::optional<double> fqe_ci_low;
  std::optional<double> fqe_ci_high;
};

inline constexpr const char* kResultsHeader =
    "cell_id,algorithm,variant,mode,seeds,iqm,ci_low,ci_high,normalised,fqe,fqe_ci_low,fqe_ci_high";

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void save_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

/// Parses and validates: exact header, field count, numeric fields, ci_low ≤ iqm ≤ ci_high.
/// Throws FormatError on any violation.
std::vector<ResultRow> read_results_csv(std::istream& is);
std::vector<ResultRow> load_results_csv(const std::filesystem::path& path);

}  // namespace orl::eval
