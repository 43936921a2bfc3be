#include "ipcc/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ipcc {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::string format_number(double v, int digits) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty input: missing header row", {"row 1: missing header"});
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 2 || header[0] != "group" || header[1] != "backward_time")
    throw CsvError("header must start with group,backward_time", {"row 1: header must start with group,backward_time"});

  Dataset data;
  data.covariate_names.assign(header.begin() + 2, header.end());
  for (std::size_t j = 0; j < data.covariate_names.size(); ++j) {
    if (data.covariate_names[j].empty())
      throw CsvError("empty covariate name", {"row 1: empty covariate name in column " + std::to_string(j + 3)});
    for (std::size_t k = 0; k < j; ++k)
      if (data.covariate_names[k] == data.covariate_names[j])
        throw CsvError("duplicate covariate name", {"row 1: duplicate covariate name '" + data.covariate_names[j] + "'"});
  }

  std::vector<std::string> errors;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    const std::string where = "row " + std::to_string(row) + ": ";
    if (cells.size() != header.size()) {
      errors.push_back(where + "expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(cells.size()));
      continue;
    }
    Subject s;
    const std::string g = trim(cells[0]);
    if (g == "0") s.group = GroupLabel::Control;
    else if (g == "1") s.group = GroupLabel::IncidentCase;
    else if (g == "2") s.group = GroupLabel::PrevalentCase;
    else {
      errors.push_back(where + "group must be 0, 1 or 2, found '" + g + "'");
      continue;
    }
    const std::string a = trim(cells[1]);
    bool ok = true;
    if (s.group == GroupLabel::PrevalentCase) {
      double v = 0.0;
      if (!parse_double(a, v) || !std::isfinite(v) || v < 0.0) {
        errors.push_back(where + "backward_time must be a non-negative number for group 2, found '" + a + "'");
        ok = false;
      } else {
        s.backward_time = v;
      }
    } else if (!a.empty()) {
      errors.push_back(where + "backward_time must be empty for group " + g);
      ok = false;
    }
    s.covariates.resize(data.covariate_names.size());
    for (std::size_t j = 0; j < data.covariate_names.size(); ++j) {
      const std::string c = trim(cells[j + 2]);
      if (!parse_double(c, s.covariates[j]) || !std::isfinite(s.covariates[j])) {
        errors.push_back(where + "covariate '" + data.covariate_names[j] + "' is not a finite number: '" + c + "'");
        ok = false;
      }
    }
    if (ok) data.subjects.push_back(std::move(s));
  }
  if (!errors.empty()) {
    const std::string what = std::to_string(errors.size()) + " malformed row(s); first: " + errors.front();
    throw CsvError(what, std::move(errors));
  }
  return data;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path, {"cannot open " + path});
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "group,backward_time";
  for (const auto& n : data.covariate_names) out << ',' << n;
  out << '\n';
  for (const auto& s : data.subjects) {
    out << static_cast<int>(s.group) << ',';
    if (s.backward_time) out << format_number(*s.backward_time);
    for (double v : s.covariates) out << ',' << format_number(v);
    out << '\n';
  }
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_dataset_csv(out, data);
}

}  // namespace ipcc
