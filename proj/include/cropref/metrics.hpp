#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cropref/geo.hpp"
#include "cropref/raster.hpp"

namespace cropref::metrics {

// Rows are predicted classes, columns reference classes.
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::int64_t>> counts;

  std::size_t size() const { return class_names.size(); }
  std::int64_t row_sum(std::size_t predicted) const;
  std::int64_t column_sum(std::size_t reference) const;
  std::int64_t trace() const;
  std::int64_t total() const;
  std::size_t index_of(std::string_view name) const;  // throws UnknownLabel

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix empty_matrix(std::vector<std::string> class_names);
ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> truth,
                                 std::vector<std::string> class_names);
ConfusionMatrix confusion_matrix(std::span<const std::string> predicted,
                                 std::span<const std::string> truth,
                                 std::vector<std::string> class_names);

// diag / column sum
double producer_accuracy(const ConfusionMatrix& cm, std::size_t cls);
double producer_accuracy(const ConfusionMatrix& cm, std::string_view cls);
// diag / row sum
double user_accuracy(const ConfusionMatrix& cm, std::size_t cls);
double user_accuracy(const ConfusionMatrix& cm, std::string_view cls);
// trace / total
double overall_accuracy(const ConfusionMatrix& cm);

struct ClassAgreement {
  std::string class_name;
  std::int64_t matching = 0;
  std::int64_t total = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(matching) / total; }
};

struct AgreementReport {
  std::vector<ClassAgreement> classes;  // taxonomy order, empty classes omitted
  std::int64_t matching = 0;
  std::int64_t total = 0;
  double overall() const { return total == 0 ? 0.0 : static_cast<double>(matching) / total; }
};

struct LabeledLocation {
  geo::GeoPoint location;
  int label = 0;
};

// Fraction of points whose label equals the truth-raster class under them.
// Truth nodata counts as disagreement; points outside the extent throw.
AgreementReport agreement_report(std::span<const LabeledLocation> points,
                                 const raster::RasterGrid& truth,
                                 std::span<const std::string> class_names);

// Builds a report from explicit (matching, total) counts per class.
AgreementReport agreement_from_counts(std::span<const ClassAgreement> counts);

// Pixel counts per class value over non-nodata cells.
std::map<int, std::int64_t> area_counts(const raster::RasterGrid& map);

// Half-up rounding to integer percent, as used in published agreement tables.
int percent_half_up(double fraction);

// Text table: matrix with UA column and PA/OA rows (two decimals).
std::string format_confusion_table(const ConfusionMatrix& cm);
// CSV: header "class,PA,UA", one row per class, then "OA,<value>".
// Undefined metrics print as NA.
std::string format_accuracy_csv(const ConfusionMatrix& cm);
// CSV of the raw counts with predicted classes as rows.
std::string format_confusion_csv(const ConfusionMatrix& cm);
std::string format_agreement_csv(const AgreementReport& report);
std::string format_agreement_table(const AgreementReport& report);

}  // namespace cropref::metrics
