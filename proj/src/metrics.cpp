#include "mbti/metrics.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mbti {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

MetricValues binary_metrics(const BinaryConfusion& c) {
  if (c.total() == 0) throw EmptyInput();
  MetricValues m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.precision = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  m.recall = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

MetricReport per_dimension_report(const std::vector<MbtiType>& labels,
                                  const std::vector<MbtiType>& preds) {
  if (labels.size() != preds.size()) throw LengthMismatch();
  if (labels.empty()) throw EmptyInput();

  MetricReport report;
  for (std::size_t d = 0; d < kDimensions; ++d) {
    BinaryConfusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool label_pos = labels[i].traits().pole[d] == 0;
      const bool pred_pos = preds[i].traits().pole[d] == 0;
      if (label_pos && pred_pos) ++c.tp;
      else if (!label_pos && pred_pos) ++c.fp;
      else if (label_pos && !pred_pos) ++c.fn;
      else ++c.tn;
    }
    report.per_dimension[d] = binary_metrics(c);
    report.headline.accuracy += report.per_dimension[d].accuracy / kDimensions;
    report.headline.f1 += report.per_dimension[d].f1 / kDimensions;
    report.headline.precision += report.per_dimension[d].precision / kDimensions;
    report.headline.recall += report.per_dimension[d].recall / kDimensions;
  }
  return report;
}

MetricReport sixteen_class_report(const std::vector<MbtiType>& labels,
                                  const std::vector<MbtiType>& preds) {
  if (labels.size() != preds.size()) throw LengthMismatch();
  if (labels.empty()) throw EmptyInput();

  std::array<BinaryConfusion, kTypeCount> per_class{};
  std::array<bool, kTypeCount> present{};
  uint64_t exact = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == preds[i]) ++exact;
    present[labels[i].index()] = true;
    present[preds[i].index()] = true;
    for (std::size_t c = 0; c < kTypeCount; ++c) {
      const bool label_is = labels[i].index() == c;
      const bool pred_is = preds[i].index() == c;
      if (label_is && pred_is) ++per_class[c].tp;
      else if (!label_is && pred_is) ++per_class[c].fp;
      else if (label_is && !pred_is) ++per_class[c].fn;
      else ++per_class[c].tn;
    }
  }

  MetricValues overall;
  overall.accuracy = static_cast<double>(exact) / static_cast<double>(labels.size());
  std::size_t n_present = 0;
  for (std::size_t c = 0; c < kTypeCount; ++c) {
    if (!present[c]) continue;  // absent classes are excluded from the macro mean
    ++n_present;
    const MetricValues m = binary_metrics(per_class[c]);
    overall.precision += m.precision;
    overall.recall += m.recall;
    overall.f1 += m.f1;
  }
  overall.precision /= static_cast<double>(n_present);
  overall.recall /= static_cast<double>(n_present);
  overall.f1 /= static_cast<double>(n_present);

  MetricReport report = per_dimension_report(labels, preds);
  report.overall_16 = overall;
  return report;
}

double expected_joint_accuracy(const std::array<double, kDimensions>& per_dim_accuracy) {
  double product = 1.0;
  for (double a : per_dim_accuracy) product *= a;
  return product;
}

namespace {

nlohmann::json values_to_json(const MetricValues& m) {
  return {{"accuracy", m.accuracy},
          {"f1", m.f1},
          {"precision", m.precision},
          {"recall", m.recall}};
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["headline"] = values_to_json(report.headline);
  static const char* dim_names[] = {"EI", "NS", "TF", "JP"};
  for (std::size_t d = 0; d < kDimensions; ++d) {
    j["per_dimension"][dim_names[d]] = values_to_json(report.per_dimension[d]);
  }
  if (report.overall_16) j["overall_16"] = values_to_json(*report.overall_16);
  return j.dump(2);
}

std::string report_to_table(const MetricReport& report) {
  std::ostringstream out;
  char buf[128];
  auto row = [&](const char* name, const MetricValues& m) {
    std::snprintf(buf, sizeof(buf), "%-12s %9.2f %9.2f %9.2f %9.2f\n", name, 100.0 * m.accuracy,
                  100.0 * m.f1, 100.0 * m.precision, 100.0 * m.recall);
    out << buf;
  };
  std::snprintf(buf, sizeof(buf), "%-12s %9s %9s %9s %9s\n", "", "Accuracy", "F1", "Precision",
                "Recall");
  out << buf;
  static const char* dim_names[] = {"E/I", "N/S", "T/F", "J/P"};
  for (std::size_t d = 0; d < kDimensions; ++d) row(dim_names[d], report.per_dimension[d]);
  row("Average", report.headline);
  if (report.overall_16) row("16-class", *report.overall_16);
  return out.str();
}

}  // namespace mbti
