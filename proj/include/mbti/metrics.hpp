#pragma once
// Confusion-matrix metrics in both evaluation views: per-dimension
// averages and aggregated 16-class, plus the multiplicative
// error-accumulation model.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbti/types.hpp"

namespace mbti {

struct LengthMismatch : std::runtime_error {
  LengthMismatch() : std::runtime_error("label and prediction lists differ in length") {}
};
struct EmptyInput : std::runtime_error {
  EmptyInput() : std::runtime_error("metric input is empty") {}
};

struct BinaryConfusion {
  uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  uint64_t total() const { return tp + fp + fn + tn; }
};

struct MetricValues {
  double accuracy = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct MetricReport {
  MetricValues headline;                          // mean of the four dimensions
  std::array<MetricValues, kDimensions> per_dimension{};
  std::optional<MetricValues> overall_16;
};

// Standard definitions; 0/0 for precision, recall, and f1 resolves to 0.
MetricValues binary_metrics(const BinaryConfusion& c);

// Per-dimension view: the first pole (E, N, T, J) is the positive class;
// headline numbers are the arithmetic mean over the four dimensions.
MetricReport per_dimension_report(const std::vector<MbtiType>& labels,
                                  const std::vector<MbtiType>& preds);

// 16-class view: exact-match accuracy; precision/recall/f1 macro-averaged
// over classes present in labels or preds.
MetricReport sixteen_class_report(const std::vector<MbtiType>& labels,
                                  const std::vector<MbtiType>& preds);

// Independence model of error accumulation: the product of the four
// per-dimension accuracies.
double expected_joint_accuracy(const std::array<double, kDimensions>& per_dim_accuracy);

std::string report_to_json(const MetricReport& report);
// Aligned plain-text table, columns Accuracy / F1 / Precision / Recall.
std::string report_to_table(const MetricReport& report);

}  // namespace mbti
