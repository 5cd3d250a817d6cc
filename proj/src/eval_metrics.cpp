#include "cvsslab/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvsslab/errors.hpp"

namespace cvsslab::eval {

namespace {

std::vector<int> to_codes(const Labels& labels, cvss::MetricKind kind,
                          bool allow_unknown) {
  std::vector<int> codes;
  codes.reserve(labels.size());
  for (cvss::MetricValue v : labels) {
    if (v == cvss::MetricValue::Unknown) {
      if (!allow_unknown)
        throw UnknownValue("truth labels must not contain UNKNOWN");
      codes.push_back(kUnknownCode);
    } else {
      codes.push_back(cvss::class_code(kind, v));
    }
  }
  return codes;
}

std::map<int, long long> count_codes(const std::vector<int>& codes) {
  std::map<int, long long> counts;
  for (int c : codes) ++counts[c];
  return counts;
}

}  // namespace

long long ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0LL);
}

long long ConfusionMatrix::row_total(std::size_t truth) const {
  long long sum = 0;
  for (std::size_t j = 0; j <= num_classes; ++j) sum += at(truth, j);
  return sum;
}

ConfusionMatrix confusion_from_codes(const std::vector<int>& truth,
                                     const std::vector<int>& pred,
                                     std::size_t num_classes) {
  if (truth.size() != pred.size())
    throw LengthMismatch("confusion matrix: truth and pred sizes differ");
  if (truth.empty()) throw EmptyInput("confusion matrix: no samples");

  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts.assign(num_classes * (num_classes + 1), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    if (t < 0 || static_cast<std::size_t>(t) >= num_classes)
      throw UnknownValue("confusion matrix: truth code out of range");
    int p = pred[i];
    if (p < 0 || static_cast<std::size_t>(p) >= num_classes)
      p = static_cast<int>(num_classes);  // UNKNOWN column
    ++cm.counts[static_cast<std::size_t>(t) * (num_classes + 1) +
                static_cast<std::size_t>(p)];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const long long total = cm.total();
  if (total == 0) throw EmptyInput("accuracy: empty confusion matrix");
  long long diag = 0;
  for (std::size_t i = 0; i < cm.num_classes; ++i) diag += cm.at(i, i);
  return static_cast<double>(diag) / static_cast<double>(total);
}

ClassScores per_class_scores(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EmptyInput("per_class_scores: empty matrix");
  const std::size_t k = cm.num_classes;
  ClassScores out;
  out.precision.resize(k);
  out.recall.resize(k);
  out.f1.resize(k);
  out.support.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const long long tp = cm.at(i, i);
    long long fp = 0;
    for (std::size_t t = 0; t < k; ++t)
      if (t != i) fp += cm.at(t, i);
    const long long support = cm.row_total(i);
    const long long fn = support - tp;
    out.support[i] = support;
    out.precision[i] = (tp + fp) == 0 ? 0.0
                                      : static_cast<double>(tp) /
                                            static_cast<double>(tp + fp);
    out.recall[i] = (tp + fn) == 0 ? 0.0
                                   : static_cast<double>(tp) /
                                         static_cast<double>(tp + fn);
    const double pr_sum = out.precision[i] + out.recall[i];
    out.f1[i] = pr_sum == 0.0
                    ? 0.0
                    : 2.0 * out.precision[i] * out.recall[i] / pr_sum;
  }
  return out;
}

namespace {
double weighted_average(const std::vector<double>& values,
                        const std::vector<long long>& support) {
  long long n = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    n += support[i];
    sum += static_cast<double>(support[i]) * values[i];
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}
}  // namespace

double weighted_precision(const ConfusionMatrix& cm) {
  const ClassScores s = per_class_scores(cm);
  return weighted_average(s.precision, s.support);
}

double weighted_recall(const ConfusionMatrix& cm) {
  const ClassScores s = per_class_scores(cm);
  return weighted_average(s.recall, s.support);
}

double weighted_f1(const ConfusionMatrix& cm) {
  const ClassScores s = per_class_scores(cm);
  return weighted_average(s.f1, s.support);
}

int majority_class_code(const std::vector<int>& truth) {
  if (truth.empty()) throw EmptyInput("majority class: no labels");
  const auto counts = count_codes(truth);
  int best = counts.begin()->first;
  long long best_count = counts.begin()->second;
  for (const auto& [code, count] : counts) {
    if (count > best_count) {  // ties keep the smallest code (map is ordered)
      best = code;
      best_count = count;
    }
  }
  return best;
}

double majority_baseline_codes(const std::vector<int>& truth) {
  const int best = majority_class_code(truth);
  const auto counts = count_codes(truth);
  return static_cast<double>(counts.at(best)) /
         static_cast<double>(truth.size());
}

double imbalance_ratio_codes(const std::vector<int>& truth) {
  const auto counts = count_codes(truth);
  if (counts.size() < 2)
    throw SingleClass("imbalance ratio needs >= 2 observed classes");
  long long max_count = 0;
  long long min_count = 0;
  bool first = true;
  for (const auto& [code, count] : counts) {
    max_count = std::max(max_count, count);
    min_count = first ? count : std::min(min_count, count);
    first = false;
  }
  return static_cast<double>(max_count) / static_cast<double>(min_count);
}

double cramers_v_codes(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw LengthMismatch("cramers_v: label vectors differ in length");
  if (a.empty()) throw EmptyInput("cramers_v: no samples");

  // Observed classes only, so marginals are positive by construction.
  std::map<int, std::size_t> row_index;
  std::map<int, std::size_t> col_index;
  for (int x : a)
    if (!row_index.count(x)) row_index.emplace(x, 0);
  for (int y : b)
    if (!col_index.count(y)) col_index.emplace(y, 0);
  std::size_t idx = 0;
  for (auto& [code, at] : row_index) at = idx++;
  idx = 0;
  for (auto& [code, at] : col_index) at = idx++;

  const std::size_t r = row_index.size();
  const std::size_t c = col_index.size();
  if (r < 2 || c < 2)
    throw DegenerateTable("cramers_v: both variables need >= 2 classes");

  std::vector<long long> table(r * c, 0);
  for (std::size_t i = 0; i < a.size(); ++i)
    ++table[row_index.at(a[i]) * c + col_index.at(b[i])];

  std::vector<long long> row_marg(r, 0);
  std::vector<long long> col_marg(c, 0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      row_marg[i] += table[i * c + j];
      col_marg[j] += table[i * c + j];
    }

  const double n = static_cast<double>(a.size());
  double chi2 = 0.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double expected = static_cast<double>(row_marg[i]) *
                              static_cast<double>(col_marg[j]) / n;
      const double diff = static_cast<double>(table[i * c + j]) - expected;
      chi2 += diff * diff / expected;
    }

  const double denom = n * (static_cast<double>(std::min(r, c)) - 1.0);
  const double v = std::sqrt(chi2 / denom);
  return std::clamp(v, 0.0, 1.0);
}

// --- CVSS-level -----------------------------------------------------------------

ConfusionMatrix confusion_matrix(const Labels& truth, const Labels& pred,
                                 cvss::MetricKind kind) {
  return confusion_from_codes(to_codes(truth, kind, false),
                              to_codes(pred, kind, true),
                              cvss::valid_values(kind).size());
}

double ordinal_mae(const Labels& truth, const Labels& pred,
                   cvss::MetricKind kind) {
  if (truth.size() != pred.size())
    throw LengthMismatch("ordinal_mae: truth and pred sizes differ");
  if (truth.empty()) throw EmptyInput("ordinal_mae: no samples");
  const int max_distance = cvss::max_ordinal_distance(kind);
  long long sum = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] == cvss::MetricValue::Unknown) {
      sum += max_distance;
    } else {
      sum += std::abs(cvss::ordinal_value(kind, truth[i]) -
                      cvss::ordinal_value(kind, pred[i]));
    }
  }
  return static_cast<double>(sum) / static_cast<double>(truth.size());
}

double majority_baseline(const Labels& truth, cvss::MetricKind kind) {
  // Smaller class code = earlier in canonical value order, so the generic
  // tie-break already lands on the canonical choice.
  return majority_baseline_codes(to_codes(truth, kind, false));
}

double imbalance_ratio(const Labels& truth, cvss::MetricKind kind) {
  return imbalance_ratio_codes(to_codes(truth, kind, false));
}

double cramers_v(const Labels& a, cvss::MetricKind kind_a, const Labels& b,
                 cvss::MetricKind kind_b) {
  return cramers_v_codes(to_codes(a, kind_a, false),
                         to_codes(b, kind_b, false));
}

MetricReport evaluate(const Labels& truth, const Labels& pred,
                      cvss::MetricKind kind) {
  MetricReport report;
  report.kind = kind;
  report.confusion = confusion_matrix(truth, pred, kind);
  report.accuracy = accuracy(report.confusion);
  report.per_class = per_class_scores(report.confusion);
  report.weighted_precision =
      weighted_average(report.per_class.precision, report.per_class.support);
  report.weighted_recall =
      weighted_average(report.per_class.recall, report.per_class.support);
  report.weighted_f1 =
      weighted_average(report.per_class.f1, report.per_class.support);
  report.mae = ordinal_mae(truth, pred, kind);
  report.baseline = majority_baseline(truth, kind);
  return report;
}

OverlapReport misclassification_overlap(
    const Labels& truth,
    const std::map<std::string, Labels>& predictions_by_model,
    cvss::MetricKind kind) {
  if (truth.empty()) throw EmptyInput("overlap: no samples");
  if (predictions_by_model.empty())
    throw EmptyInput("overlap: no models");
  for (const auto& [model, labels] : predictions_by_model) {
    if (labels.size() != truth.size())
      throw CoverageMismatch("overlap: model " + model +
                             " does not cover the CVE set");
  }

  const std::size_t m = predictions_by_model.size();
  std::vector<std::size_t> wrong_counts(truth.size(), 0);
  for (const auto& [model, labels] : predictions_by_model) {
    for (std::size_t i = 0; i < truth.size(); ++i) {
      // UNKNOWN counts as a misclassification.
      if (labels[i] != truth[i]) ++wrong_counts[i];
    }
  }

  OverlapReport report;
  report.kind = kind;
  report.num_models = m;
  report.fraction_by_k.assign(m + 1, 0.0);
  for (std::size_t count : wrong_counts) report.fraction_by_k[count] += 1.0;
  for (double& f : report.fraction_by_k)
    f /= static_cast<double>(truth.size());
  return report;
}

AssociationMatrix association_matrix(
    const std::vector<cvss::BaseVector>& truths) {
  if (truths.empty()) throw EmptyInput("association matrix: no vectors");
  AssociationMatrix out;
  std::array<Labels, cvss::kNumMetrics> columns;
  for (cvss::MetricKind kind : cvss::kAllMetrics) {
    Labels& col = columns[static_cast<std::size_t>(kind)];
    col.reserve(truths.size());
    for (const cvss::BaseVector& v : truths) col.push_back(v.get(kind));
  }
  for (std::size_t i = 0; i < cvss::kNumMetrics; ++i) {
    for (std::size_t j = 0; j < cvss::kNumMetrics; ++j) {
      if (i == j) {
        out.v[i][j] = 1.0;
      } else if (j < i) {
        out.v[i][j] = out.v[j][i];
      } else {
        try {
          out.v[i][j] = cramers_v(columns[i], static_cast<cvss::MetricKind>(i),
                                  columns[j], static_cast<cvss::MetricKind>(j));
        } catch (const DegenerateTable&) {
          out.v[i][j] = 0.0;  // a constant column carries no association
        }
      }
    }
  }
  return out;
}

}  // namespace cvsslab::eval
