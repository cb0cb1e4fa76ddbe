#include "l2l/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "l2l/error.hpp"

namespace l2l {

namespace {

void require_compatible(const BinaryMatrix& preds, const BinaryMatrix& labels) {
  if (preds.rows != labels.rows || preds.cols != labels.cols) {
    throw Error(ErrorCode::ShapeMismatch, "predictions " + std::to_string(preds.rows) + "x" +
                                              std::to_string(preds.cols) + " vs labels " +
                                              std::to_string(labels.rows) + "x" + std::to_string(labels.cols));
  }
}

}  // namespace

BinaryMatrix::BinaryMatrix(std::size_t r, std::size_t c, std::vector<std::uint8_t> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) throw Error(ErrorCode::ShapeMismatch, "binary matrix size");
  for (auto x : values) {
    if (x > 1) throw Error(ErrorCode::LabelDomainError, "binary matrix entry " + std::to_string(x));
  }
}

AttributeCounts count_attributes(const BinaryMatrix& preds, const BinaryMatrix& labels) {
  require_compatible(preds, labels);
  AttributeCounts c;
  c.true_positive.assign(labels.cols, 0);
  c.true_negative.assign(labels.cols, 0);
  c.positive.assign(labels.cols, 0);
  c.negative.assign(labels.cols, 0);
  for (std::size_t i = 0; i < labels.rows; ++i) {
    for (std::size_t j = 0; j < labels.cols; ++j) {
      if (labels.at(i, j)) {
        ++c.positive[j];
        if (preds.at(i, j)) ++c.true_positive[j];
      } else {
        ++c.negative[j];
        if (!preds.at(i, j)) ++c.true_negative[j];
      }
    }
  }
  return c;
}

double compute_mA(const BinaryMatrix& preds, const BinaryMatrix& labels) {
  const AttributeCounts c = count_attributes(preds, labels);
  if (labels.cols == 0) throw Error(ErrorCode::DegenerateAttribute, "no attributes");
  double total = 0.0;
  for (std::size_t j = 0; j < labels.cols; ++j) {
    if (c.positive[j] == 0 || c.negative[j] == 0) {
      throw Error(ErrorCode::DegenerateAttribute, "attribute " + std::to_string(j) + " has " +
                                                      std::to_string(c.positive[j]) + " positives and " +
                                                      std::to_string(c.negative[j]) + " negatives");
    }
    total += static_cast<double>(c.true_positive[j]) / static_cast<double>(c.positive[j]) +
             static_cast<double>(c.true_negative[j]) / static_cast<double>(c.negative[j]);
  }
  return total / (2.0 * static_cast<double>(labels.cols));
}

InstanceMetrics compute_instance_metrics(const BinaryMatrix& preds, const BinaryMatrix& labels) {
  require_compatible(preds, labels);
  InstanceMetrics m;
  if (labels.rows == 0) return m;
  for (std::size_t i = 0; i < labels.rows; ++i) {
    std::size_t inter = 0, uni = 0, npred = 0, nlabel = 0;
    for (std::size_t j = 0; j < labels.cols; ++j) {
      const bool y = labels.at(i, j), p = preds.at(i, j);
      inter += (y && p);
      uni += (y || p);
      npred += p;
      nlabel += y;
    }
    m.accuracy += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    m.precision += npred == 0 ? (nlabel == 0 ? 1.0 : 0.0) : static_cast<double>(inter) / static_cast<double>(npred);
    m.recall += nlabel == 0 ? (npred == 0 ? 1.0 : 0.0) : static_cast<double>(inter) / static_cast<double>(nlabel);
  }
  const double n = static_cast<double>(labels.rows);
  m.accuracy /= n;
  m.precision /= n;
  m.recall /= n;
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

AttributeErrors per_attribute_error(const BinaryMatrix& preds, const BinaryMatrix& labels) {
  const AttributeCounts c = count_attributes(preds, labels);
  AttributeErrors e;
  e.per_attribute.assign(labels.cols, 0.0);
  if (labels.rows == 0 || labels.cols == 0) return e;
  for (std::size_t j = 0; j < labels.cols; ++j) {
    // One division of exact counts, so the rate is correctly rounded.
    const std::size_t wrong = labels.rows - c.true_positive[j] - c.true_negative[j];
    e.per_attribute[j] = static_cast<double>(wrong) / static_cast<double>(labels.rows);
    e.mean += e.per_attribute[j];
  }
  e.mean /= static_cast<double>(labels.cols);
  return e;
}

MetricReport evaluate(const BinaryMatrix& preds, const BinaryMatrix& labels) {
  MetricReport r;
  r.counts = count_attributes(preds, labels);
  try {
    r.mA = compute_mA(preds, labels);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateAttribute) throw;
  }
  const InstanceMetrics im = compute_instance_metrics(preds, labels);
  r.accuracy = im.accuracy;
  r.precision = im.precision;
  r.recall = im.recall;
  r.f1 = im.f1;
  const AttributeErrors ae = per_attribute_error(preds, labels);
  r.per_attribute_error = ae.per_attribute;
  r.mean_error = ae.mean;
  r.samples = labels.rows;
  return r;
}

nlohmann::ordered_json report_to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["mA"] = r.mA ? nlohmann::ordered_json(*r.mA) : nlohmann::ordered_json(nullptr);
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["mean_error"] = r.mean_error;
  j["per_attribute_error"] = r.per_attribute_error;
  nlohmann::ordered_json counts;
  counts["TP"] = r.counts.true_positive;
  counts["TN"] = r.counts.true_negative;
  counts["P"] = r.counts.positive;
  counts["N"] = r.counts.negative;
  j["counts"] = counts;
  j["samples"] = r.samples;
  return j;
}

MetricReport report_from_json(const nlohmann::ordered_json& j) {
  if (auto why = validate_report_json(j); !why.empty()) throw Error(ErrorCode::ManifestError, "metric report: " + why);
  MetricReport r;
  if (!j["mA"].is_null()) r.mA = j["mA"].get<double>();
  r.accuracy = j["accuracy"].get<double>();
  r.precision = j["precision"].get<double>();
  r.recall = j["recall"].get<double>();
  r.f1 = j["f1"].get<double>();
  r.mean_error = j["mean_error"].get<double>();
  r.per_attribute_error = j["per_attribute_error"].get<std::vector<double>>();
  r.counts.true_positive = j["counts"]["TP"].get<std::vector<std::size_t>>();
  r.counts.true_negative = j["counts"]["TN"].get<std::vector<std::size_t>>();
  r.counts.positive = j["counts"]["P"].get<std::vector<std::size_t>>();
  r.counts.negative = j["counts"]["N"].get<std::vector<std::size_t>>();
  r.samples = j["samples"].get<std::size_t>();
  return r;
}

std::string validate_report_json(const nlohmann::ordered_json& j) {
  static const char* const kKeys[] = {"mA",         "accuracy", "precision", "recall",
                                      "f1",         "mean_error", "per_attribute_error", "counts",
                                      "samples"};
  if (!j.is_object()) return "not an object";
  if (j.size() != std::size(kKeys)) return "unexpected key count";
  std::size_t k = 0;
  for (auto it = j.begin(); it != j.end(); ++it, ++k) {
    if (it.key() != kKeys[k]) return "key '" + it.key() + "' out of order, expected '" + kKeys[k] + "'";
  }
  auto rate = [](const nlohmann::ordered_json& v) { return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0; };
  if (!j["mA"].is_null() && !rate(j["mA"])) return "mA not a rate";
  for (const char* key : {"accuracy", "precision", "recall", "f1", "mean_error"}) {
    if (!rate(j[key])) return std::string(key) + " not a rate";
  }
  if (!j["per_attribute_error"].is_array()) return "per_attribute_error not an array";
  const std::size_t m = j["per_attribute_error"].size();
  for (const auto& v : j["per_attribute_error"]) {
    if (!rate(v)) return "per_attribute_error entry not a rate";
  }
  const auto& counts = j["counts"];
  if (!counts.is_object()) return "counts not an object";
  for (const char* key : {"TP", "TN", "P", "N"}) {
    if (!counts.contains(key) || !counts[key].is_array() || counts[key].size() != m) {
      return std::string("counts.") + key + " malformed";
    }
  }
  if (!j["samples"].is_number_unsigned()) return "samples not a count";
  return {};
}

std::string per_attribute_csv(const std::vector<std::string>& names, const std::vector<double>& errors) {
  if (names.size() != errors.size()) throw Error(ErrorCode::ShapeMismatch, "names vs errors");
  std::ostringstream os;
  os << "attribute_name,error\n";
  char buf[64];
  for (std::size_t j = 0; j < names.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", errors[j]);
    os << names[j] << ',' << buf << '\n';
  }
  return os.str();
}

}  // namespace l2l
