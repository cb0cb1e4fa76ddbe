#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace l2l {

// Row-major {0,1} matrix: rows are samples, columns attributes.
struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> values;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t r, std::size_t c, std::vector<std::uint8_t> v);
  std::uint8_t at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

struct AttributeCounts {
  std::vector<std::size_t> true_positive, true_negative, positive, negative;
};

AttributeCounts count_attributes(const BinaryMatrix& preds, const BinaryMatrix& labels);

// (1/2M)·Σ_j (TP_j/P_j + TN_j/N_j). DegenerateAttribute if a label column is
// all-positive or all-negative.
double compute_mA(const BinaryMatrix& preds, const BinaryMatrix& labels);

struct InstanceMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Example-based set metrics averaged over samples; F1 from the aggregated
// precision and recall. Empty sets: an empty union scores 1 for accuracy; an
// empty prediction set scores precision 0 unless the label set is empty too
// (then 1); recall mirrors that with the roles swapped.
InstanceMetrics compute_instance_metrics(const BinaryMatrix& preds, const BinaryMatrix& labels);

struct AttributeErrors {
  std::vector<double> per_attribute;
  double mean = 0.0;
};

AttributeErrors per_attribute_error(const BinaryMatrix& preds, const BinaryMatrix& labels);

struct MetricReport {
  std::optional<double> mA;  // absent when some attribute is degenerate
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mean_error = 0.0;
  std::vector<double> per_attribute_error;
  AttributeCounts counts;
  std::size_t samples = 0;
};

MetricReport evaluate(const BinaryMatrix& preds, const BinaryMatrix& labels);

// Fixed key order: mA, accuracy, precision, recall, f1, mean_error,
// per_attribute_error, counts{TP,TN,P,N}, samples.
nlohmann::ordered_json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::ordered_json& j);
// Returns an empty string when valid, otherwise the first violation.
std::string validate_report_json(const nlohmann::ordered_json& j);

// "attribute_name,error" header plus one row per attribute.
std::string per_attribute_csv(const std::vector<std::string>& names, const std::vector<double>& errors);

}  // namespace l2l
