#include "dtrmis/cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace dtrmis::cli {

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return j;
  return std::nullopt;
}

namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

std::vector<std::string> split_record(const std::string& line, const std::string& source,
                                      std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      if (!cur.empty()) throw DataError(where(source, line_no) + "stray quote in field");
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw DataError(where(source, line_no) + "unterminated quote");
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

std::optional<double> to_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_record(line, source, line_no);
    if (!have_header) {
      std::set<std::string> seen;
      for (const auto& h : fields) {
        if (h.empty()) throw DataError(where(source, line_no) + "empty column name in header");
        if (!seen.insert(h).second)
          throw DataError(where(source, line_no) + "duplicate column '" + h + "'");
      }
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError(where(source, line_no) + "expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw DataError(source + ": missing header row");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

IngestResult ingest_csv(const CsvTable& table, const IngestSpec& spec,
                        const std::string& source) {
  if (spec.treatment_columns.empty() || spec.treatment_columns.size() > 2)
    throw ConfigError("one or two treatment columns are required");
  const bool two_stage = spec.treatment_columns.size() == 2;
  if (!two_stage && !spec.stage2_covariates.empty())
    throw ConfigError("stage-2 covariates given for a one-stage analysis");
  if (spec.validation_column && !spec.true_outcome_column)
    throw ConfigError("a validation column needs a true-outcome column");

  auto need = [&](const std::string& name) {
    const auto j = table.column(name);
    if (!j) throw DataError(source + ": unknown column '" + name + "'");
    return *j;
  };
  auto cell_error = [&](std::size_t row, const std::string& col, const std::string& what) {
    const std::size_t line = row < table.line_numbers.size() ? table.line_numbers[row] : row + 2;
    return DataError(where(source, line) + "column '" + col + "': " + what);
  };
  auto number = [&](std::size_t row, std::size_t j) {
    const std::string& s = table.rows[row][j];
    if (s.empty()) throw cell_error(row, table.header[j], "missing value");
    const auto v = to_number(s);
    if (!v) throw cell_error(row, table.header[j], "'" + s + "' is not a number");
    return *v;
  };
  auto binary = [&](std::size_t row, std::size_t j) {
    const double v = number(row, j);
    if (v != 0.0 && v != 1.0)
      throw cell_error(row, table.header[j], "outcome value '" + table.rows[row][j] +
                                                 "' is not 0 or 1");
    return static_cast<int>(v);
  };

  const std::size_t y_col = need(spec.outcome_column);
  std::vector<std::size_t> a_cols, x1_cols, x2_cols;
  for (const auto& c : spec.treatment_columns) a_cols.push_back(need(c));
  for (const auto& c : spec.stage1_covariates) x1_cols.push_back(need(c));
  for (const auto& c : spec.stage2_covariates) x2_cols.push_back(need(c));
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  const std::size_t v_col = spec.validation_column ? need(*spec.validation_column) : none;
  const std::size_t t_col = spec.true_outcome_column ? need(*spec.true_outcome_column) : none;

  IngestResult result;
  const std::size_t n = table.rows.size();
  if (n == 0) throw DataError(source + ": no data rows");

  // treatment coding: {-1,1} kept, {0,1} recoded with 0 -> -1
  std::vector<std::vector<int>> treatments(a_cols.size(), std::vector<int>(n));
  for (std::size_t k = 0; k < a_cols.size(); ++k) {
    const std::size_t j = a_cols[k];
    bool has_zero = false, has_minus = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = number(i, j);
      if (v == 0.0)
        has_zero = true;
      else if (v == -1.0)
        has_minus = true;
      else if (v != 1.0)
        throw cell_error(i, table.header[j], "treatment value '" + table.rows[i][j] +
                                                 "' is not in {0,1} or {-1,1}");
      if (has_zero && has_minus)
        throw cell_error(i, table.header[j], "treatment mixes 0 and -1 codings");
      treatments[k][i] = v == 1.0 ? 1 : -1;
    }
    if (has_zero)
      result.log.push_back("treatment column '" + table.header[j] +
                           "' coded {0,1}: recoded 0 -> -1, 1 -> +1");
  }

  std::vector<Trajectory> validation, main;
  for (std::size_t i = 0; i < n; ++i) {
    Trajectory t;
    for (std::size_t j : x1_cols) t.stage1_covariates.push_back(number(i, j));
    for (std::size_t j : x2_cols) t.stage2_covariates.push_back(number(i, j));
    t.treatment1 = treatments[0][i];
    if (two_stage) t.treatment2 = treatments[1][i];
    t.surrogate_outcome = binary(i, y_col);
    bool in_v = false;
    if (v_col != none) {
      const double f = number(i, v_col);
      if (f != 0.0 && f != 1.0)
        throw cell_error(i, table.header[v_col], "validation flag must be 0 or 1");
      in_v = f == 1.0;
    }
    if (in_v) {
      t.true_outcome = binary(i, t_col);
      validation.push_back(std::move(t));
    } else {
      main.push_back(std::move(t));
    }
  }

  Schema schema;
  schema.stage1_names = spec.stage1_covariates;
  schema.stage2_names = spec.stage2_covariates;
  schema.treatment1_name = spec.treatment_columns[0];
  if (two_stage) schema.treatment2_name = spec.treatment_columns[1];
  schema.two_stage = two_stage;

  const std::size_t nv = validation.size();
  if (v_col != none && nv > 0)
    result.log.push_back(std::to_string(nv) + " validation rows moved to the front");
  std::vector<Trajectory> rows = std::move(validation);
  rows.insert(rows.end(), std::make_move_iterator(main.begin()),
              std::make_move_iterator(main.end()));
  result.dataset = StudyDataset(std::move(schema), std::move(rows), nv);
  return result;
}

IngestResult ingest_csv(const std::string& path, const IngestSpec& spec) {
  return ingest_csv(read_csv(path), spec, path);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const StudyDataset& dataset, const IngestSpec& spec) {
  std::vector<std::string> header = spec.stage1_covariates;
  header.insert(header.end(), spec.stage2_covariates.begin(), spec.stage2_covariates.end());
  header.insert(header.end(), spec.treatment_columns.begin(), spec.treatment_columns.end());
  header.push_back(spec.outcome_column);
  if (spec.validation_column) header.push_back(*spec.validation_column);
  if (spec.true_outcome_column) header.push_back(*spec.true_outcome_column);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Trajectory& t = dataset[i];
    std::vector<std::string> f;
    for (double v : t.stage1_covariates) f.push_back(format_double(v));
    for (double v : t.stage2_covariates) f.push_back(format_double(v));
    f.push_back(std::to_string(t.treatment1));
    if (spec.treatment_columns.size() == 2) f.push_back(std::to_string(t.treatment2.value_or(-1)));
    f.push_back(t.surrogate_outcome ? std::to_string(*t.surrogate_outcome) : "");
    const bool in_v = i < dataset.validation_count();
    if (spec.validation_column) f.push_back(in_v ? "1" : "0");
    if (spec.true_outcome_column)
      f.push_back(t.true_outcome ? std::to_string(*t.true_outcome) : "");
    for (std::size_t j = 0; j < f.size(); ++j) out << (j ? "," : "") << f[j];
    out << '\n';
  }
}

void write_csv(const std::string& path, const StudyDataset& dataset, const IngestSpec& spec) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, dataset, spec);
}

}  // namespace dtrmis::cli
