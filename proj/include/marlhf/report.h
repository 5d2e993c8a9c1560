// Copyright 2026 The marlhf-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MARLHF_REPORT_H_
#define MARLHF_REPORT_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace marlhf {

std::string Sha256Hex(std::string_view bytes);

std::string ReadFile(const std::filesystem::path& path);
// Creates parent directories. Throws StageError("io", ...) on failure.
void WriteFile(const std::filesystem::path& path, std::string_view bytes);

// Shortest round-trip decimal form; used for every number written to CSV so
// that reruns are byte-identical.
std::string FormatDouble(double x);

// Minimal tidy-CSV builder. Fields containing commas or quotes are quoted.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  CsvTable& Row();
  CsvTable& Add(std::string_view value);
  CsvTable& Add(double value);
  CsvTable& Add(int value);
  CsvTable& Add(std::size_t value);

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t num_rows() const { return rows_.size(); }
  std::string ToString() const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

// Parsed CSV: header plus string cells. Only handles what CsvTable writes.
struct CsvData {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int Column(std::string_view name) const;  // -1 when absent
};
CsvData ParseCsv(std::string_view text);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;  // symlog-style: x <= 0 is placed left of the smallest
                       // positive value
};

// Static SVG line plot with point markers and a legend.
std::string LinePlotSvg(const PlotSpec& spec,
                        const std::vector<PlotSeries>& series);

}  // namespace marlhf

#endif  // MARLHF_REPORT_H_
