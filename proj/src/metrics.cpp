#include "cropref/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cropref/error.hpp"
#include "cropref/textio.hpp"

namespace cropref::metrics {
namespace {

std::string two_decimals(double v) { return textio::format_fixed(v, 2); }

template <typename F>
std::string metric_or_na(F&& f) {
  try {
    return two_decimals(f());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UndefinedMetric) return "NA";
    throw;
  }
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

std::int64_t ConfusionMatrix::row_sum(std::size_t predicted) const {
  std::int64_t s = 0;
  for (auto v : counts.at(predicted)) s += v;
  return s;
}

std::int64_t ConfusionMatrix::column_sum(std::size_t reference) const {
  std::int64_t s = 0;
  for (const auto& row : counts) s += row.at(reference);
  return s;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) s += counts[i][i];
  return s;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (const auto& row : counts)
    for (auto v : row) s += v;
  return s;
}

std::size_t ConfusionMatrix::index_of(std::string_view name) const {
  const auto it = std::find(class_names.begin(), class_names.end(), name);
  if (it == class_names.end())
    throw Error(ErrorCode::UnknownLabel, "unknown class '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - class_names.begin());
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.class_names != class_names)
    throw Error(ErrorCode::InvalidArgument, "cannot add matrices over different classes");
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t j = 0; j < counts.size(); ++j) counts[i][j] += other.counts[i][j];
  return *this;
}

ConfusionMatrix empty_matrix(std::vector<std::string> class_names) {
  ConfusionMatrix cm;
  const std::size_t k = class_names.size();
  cm.class_names = std::move(class_names);
  cm.counts.assign(k, std::vector<std::int64_t>(k, 0));
  return cm;
}

ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> truth,
                                 std::vector<std::string> class_names) {
  if (predicted.size() != truth.size())
    throw Error(ErrorCode::LengthMismatch, "predicted and truth sequences differ in length (" +
                                               std::to_string(predicted.size()) + " vs " +
                                               std::to_string(truth.size()) + ")");
  ConfusionMatrix cm = empty_matrix(std::move(class_names));
  const int k = static_cast<int>(cm.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] < 0 || predicted[i] >= k || truth[i] < 0 || truth[i] >= k)
      throw Error(ErrorCode::UnknownLabel, "label index outside the class list");
    ++cm.counts[static_cast<std::size_t>(predicted[i])][static_cast<std::size_t>(truth[i])];
  }
  return cm;
}

ConfusionMatrix confusion_matrix(std::span<const std::string> predicted,
                                 std::span<const std::string> truth,
                                 std::vector<std::string> class_names) {
  if (predicted.size() != truth.size())
    throw Error(ErrorCode::LengthMismatch, "predicted and truth sequences differ in length");
  ConfusionMatrix cm = empty_matrix(std::move(class_names));
  for (std::size_t i = 0; i < predicted.size(); ++i)
    ++cm.counts[cm.index_of(predicted[i])][cm.index_of(truth[i])];
  return cm;
}

double producer_accuracy(const ConfusionMatrix& cm, std::size_t cls) {
  const auto col = cm.column_sum(cls);
  if (col == 0)
    throw Error(ErrorCode::UndefinedMetric,
                "producer accuracy undefined for '" + cm.class_names[cls] + "' (no reference samples)");
  return static_cast<double>(cm.counts[cls][cls]) / static_cast<double>(col);
}

double producer_accuracy(const ConfusionMatrix& cm, std::string_view cls) {
  return producer_accuracy(cm, cm.index_of(cls));
}

double user_accuracy(const ConfusionMatrix& cm, std::size_t cls) {
  const auto row = cm.row_sum(cls);
  if (row == 0)
    throw Error(ErrorCode::UndefinedMetric,
                "user accuracy undefined for '" + cm.class_names[cls] + "' (never predicted)");
  return static_cast<double>(cm.counts[cls][cls]) / static_cast<double>(row);
}

double user_accuracy(const ConfusionMatrix& cm, std::string_view cls) {
  return user_accuracy(cm, cm.index_of(cls));
}

double overall_accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw Error(ErrorCode::UndefinedMetric, "overall accuracy undefined for an empty matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

AgreementReport agreement_report(std::span<const LabeledLocation> points,
                                 const raster::RasterGrid& truth,
                                 std::span<const std::string> class_names) {
  std::vector<ClassAgreement> per_class(class_names.size());
  for (std::size_t i = 0; i < class_names.size(); ++i) per_class[i].class_name = class_names[i];
  for (const auto& p : points) {
    if (p.label < 0 || static_cast<std::size_t>(p.label) >= class_names.size())
      throw Error(ErrorCode::UnknownLabel, "point label outside the class list");
    const double v = raster::sample_pixel(truth, p.location);
    auto& c = per_class[static_cast<std::size_t>(p.label)];
    ++c.total;
    if (!truth.is_nodata(v) && std::lround(v) == p.label) ++c.matching;
  }
  AgreementReport report;
  for (auto& c : per_class) {
    if (c.total == 0) continue;
    report.matching += c.matching;
    report.total += c.total;
    report.classes.push_back(std::move(c));
  }
  return report;
}

AgreementReport agreement_from_counts(std::span<const ClassAgreement> counts) {
  AgreementReport report;
  for (const auto& c : counts) {
    if (c.matching < 0 || c.matching > c.total)
      throw Error(ErrorCode::InvalidArgument, "matching count must lie in [0, total]");
    if (c.total == 0) continue;
    report.matching += c.matching;
    report.total += c.total;
    report.classes.push_back(c);
  }
  return report;
}

std::map<int, std::int64_t> area_counts(const raster::RasterGrid& map) {
  std::map<int, std::int64_t> counts;
  for (double v : map.values)
    if (!map.is_nodata(v)) ++counts[static_cast<int>(std::lround(v))];
  return counts;
}

int percent_half_up(double fraction) {
  return static_cast<int>(std::floor(fraction * 100.0 + 0.5));
}

std::string format_confusion_table(const ConfusionMatrix& cm) {
  std::size_t w = 6;
  for (const auto& n : cm.class_names) w = std::max(w, n.size() + 1);
  std::string out = pad("", w);
  for (const auto& n : cm.class_names) out += pad(n, w);
  out += pad("UA", w) + "\n";
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out += pad(cm.class_names[i], w);
    for (std::size_t j = 0; j < cm.size(); ++j) out += pad(std::to_string(cm.counts[i][j]), w);
    out += pad(metric_or_na([&] { return user_accuracy(cm, i); }), w) + "\n";
  }
  out += pad("PA", w);
  for (std::size_t j = 0; j < cm.size(); ++j)
    out += pad(metric_or_na([&] { return producer_accuracy(cm, j); }), w);
  out += pad(metric_or_na([&] { return overall_accuracy(cm); }), w) + "\n";
  out += "OA " + metric_or_na([&] { return overall_accuracy(cm); }) + " (" +
         std::to_string(cm.trace()) + "/" + std::to_string(cm.total()) + ")\n";
  return out;
}

std::string format_accuracy_csv(const ConfusionMatrix& cm) {
  std::string out = "class,PA,UA\n";
  for (std::size_t i = 0; i < cm.size(); ++i)
    out += cm.class_names[i] + "," + metric_or_na([&] { return producer_accuracy(cm, i); }) + "," +
           metric_or_na([&] { return user_accuracy(cm, i); }) + "\n";
  out += "OA," + metric_or_na([&] { return overall_accuracy(cm); }) + "\n";
  return out;
}

std::string format_confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "predicted\\reference";
  for (const auto& n : cm.class_names) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out += cm.class_names[i];
    for (auto v : cm.counts[i]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

std::string format_agreement_csv(const AgreementReport& report) {
  std::string out = "class,matching,total,fraction\n";
  for (const auto& c : report.classes)
    out += c.class_name + "," + std::to_string(c.matching) + "," + std::to_string(c.total) + "," +
           two_decimals(c.fraction()) + "\n";
  out += "overall," + std::to_string(report.matching) + "," + std::to_string(report.total) + "," +
         two_decimals(report.overall()) + "\n";
  return out;
}

std::string format_agreement_table(const AgreementReport& report) {
  std::string out;
  for (const auto& c : report.classes)
    out += pad(c.class_name, 12) + "  " + pad(std::to_string(c.matching), 6) + "/" +
           std::to_string(c.total) + "  " + two_decimals(c.fraction()) + " (" +
           std::to_string(percent_half_up(c.fraction())) + "%)\n";
  out += pad("overall", 12) + "  " + pad(std::to_string(report.matching), 6) + "/" +
         std::to_string(report.total) + "  " + two_decimals(report.overall()) + "\n";
  return out;
}

}  // namespace cropref::metrics
