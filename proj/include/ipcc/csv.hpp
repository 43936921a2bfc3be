#pragma once

// Subject-level CSV input/output.
//
// Header: group,backward_time,<covariate columns...>
// group is 0 (control), 1 (incident case) or 2 (prevalent case);
// backward_time is empty for groups 0 and 1.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipcc/types.hpp"

namespace ipcc {

class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& what, std::vector<std::string> rows)
      : std::runtime_error(what), rows_(std::move(rows)) {}
  // One message per offending row, "row <n>: <problem>".
  const std::vector<std::string>& row_errors() const { return rows_; }

 private:
  std::vector<std::string> rows_;
};

Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::string& path, const Dataset& data);

// Shortest "%.<digits>g" style rendering; NaN as "NA".
std::string format_number(double v, int digits = 17);

}  // namespace ipcc
