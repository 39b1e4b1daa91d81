#include "orl/eval/results.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "orl/errors.hpp"

namespace orl::eval {

namespace {

std::string format(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string format(const std::optional<double>& v) { return v ? format(*v) : std::string(); }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double number(const std::string& s, const char* column, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError("results line " + std::to_string(line) + ": bad " + column + " '" + s + "'");
  return v;
}

std::optional<double> optional_number(const std::string& s, const char* column, std::size_t line) {
  if (s.empty()) return std::nullopt;
  return number(s, column, line);
}

}  // namespace

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultsHeader << "\n";
  for (const auto& r : rows) {
    os << r.cell_id << ',' << r.algorithm << ',' << r.variant << ',' << r.mode << ',' << r.seeds << ','
       << format(r.iqm) << ',' << format(r.ci_low) << ',' << format(r.ci_high) << ',' << format(r.normalised) << ','
       << format(r.fqe) << ',' << format(r.fqe_ci_low) << ',' << format(r.fqe_ci_high) << "\n";
  }
}

void save_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    write_results_csv(os, rows);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("results: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw FormatError("results: unexpected header '" + line + "'");
  std::vector<ResultRow> rows;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 12) throw FormatError("results line " + std::to_string(n) + ": expected 12 fields");
    ResultRow r;
    r.cell_id = f[0];
    r.algorithm = f[1];
    r.variant = f[2];
    r.mode = f[3];
    r.seeds = static_cast<int>(number(f[4], "seeds", n));
    r.iqm = number(f[5], "iqm", n);
    r.ci_low = number(f[6], "ci_low", n);
    r.ci_high = number(f[7], "ci_high", n);
    r.normalised = number(f[8], "normalised", n);
    r.fqe = optional_number(f[9], "fqe", n);
    r.fqe_ci_low = optional_number(f[10], "fqe_ci_low", n);
    r.fqe_ci_high = optional_number(f[11], "fqe_ci_high", n);
    if (r.mode != "regular" && r.mode != "irregular")
      throw FormatError("results line " + std::to_string(n) + ": mode must be regular or irregular");
    // Printed at 10 significant digits, so allow rounding slack in the ordering check.
    const double slack = 1e-8 * (1.0 + std::abs(r.iqm));
    if (r.ci_low > r.iqm + slack || r.iqm > r.ci_high + slack)
      throw FormatError("results line " + std::to_string(n) + ": CI does not bracket the IQM");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> load_results_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_results_csv(is);
}

}  // namespace orl::eval
