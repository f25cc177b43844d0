#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dtrmis/core.hpp"

namespace dtrmis::cli {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // source line of each row

  std::optional<std::size_t> column(const std::string& name) const;
};

/// Comma-separated, header required, optional double quotes. Throws DataError
/// with the line number on a malformed record.
CsvTable parse_csv(std::istream& in, const std::string& source = "input");
CsvTable read_csv(const std::string& path);

/// Which columns of a file make up a StudyDataset.
struct IngestSpec {
  std::string outcome_column;  // the (surrogate) outcome as recorded
  std::vector<std::string> treatment_columns;  // 1 or 2
  std::vector<std::string> stage1_covariates;
  std::vector<std::string> stage2_covariates;
  /// Rows with flag 1 form the validation subset and must carry the true
  /// outcome in true_outcome_column.
  std::optional<std::string> validation_column;
  std::optional<std::string> true_outcome_column;
};

struct IngestResult {
  StudyDataset dataset;
  std::vector<std::string> log;  // recoding notes
};

IngestResult ingest_csv(const CsvTable& table, const IngestSpec& spec,
                        const std::string& source = "input");
IngestResult ingest_csv(const std::string& path, const IngestSpec& spec);

/// Writes the columns named by spec; numbers in shortest round-trip form.
void write_csv(std::ostream& out, const StudyDataset& dataset, const IngestSpec& spec);
void write_csv(const std::string& path, const StudyDataset& dataset, const IngestSpec& spec);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

}  // namespace dtrmis::cli
