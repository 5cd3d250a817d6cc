#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cvsslab/cvss.hpp"

namespace cvsslab::eval {

// Predictions may be UNKNOWN; truth never is. At the code level UNKNOWN is -1.
inline constexpr int kUnknownCode = -1;

// Rows are truth classes, columns are prediction classes plus one trailing
// UNKNOWN column that counts as incorrect everywhere downstream.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<long long> counts;  // num_classes x (num_classes + 1), row major

  long long at(std::size_t truth, std::size_t pred) const {
    return counts[truth * (num_classes + 1) + pred];
  }
  long long unknown_count(std::size_t truth) const {
    return at(truth, num_classes);
  }
  long long total() const;
  long long row_total(std::size_t truth) const;  // class support
};

struct ClassScores {
  std::vector<double> precision;  // 0 when TP+FP == 0
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<long long> support;
};

// --- code-level core (also used by the meta-classifier) -----------------------

// truth codes in [0, num_classes); pred codes additionally allow kUnknownCode.
ConfusionMatrix confusion_from_codes(const std::vector<int>& truth,
                                     const std::vector<int>& pred,
                                     std::size_t num_classes);

double accuracy(const ConfusionMatrix& cm);
ClassScores per_class_scores(const ConfusionMatrix& cm);
double weighted_precision(const ConfusionMatrix& cm);
double weighted_recall(const ConfusionMatrix& cm);
double weighted_f1(const ConfusionMatrix& cm);

// Share of the most frequent code; ties break toward the smallest code.
double majority_baseline_codes(const std::vector<int>& truth);
int majority_class_code(const std::vector<int>& truth);

double imbalance_ratio_codes(const std::vector<int>& truth);  // throws SingleClass

// V = sqrt(chi2 / (n * (min(r, c) - 1))) over the observed contingency table.
double cramers_v_codes(const std::vector<int>& a, const std::vector<int>& b);

// --- CVSS-level operations ---------------------------------------------------------

using Labels = std::vector<cvss::MetricValue>;

ConfusionMatrix confusion_matrix(const Labels& truth, const Labels& pred,
                                 cvss::MetricKind kind);

// Mean |ordinal(truth) - ordinal(pred)|; an UNKNOWN prediction pays the
// kind's maximum ordinal distance.
double ordinal_mae(const Labels& truth, const Labels& pred,
                   cvss::MetricKind kind);

double majority_baseline(const Labels& truth, cvss::MetricKind kind);
double imbalance_ratio(const Labels& truth, cvss::MetricKind kind);
double cramers_v(const Labels& a, cvss::MetricKind kind_a, const Labels& b,
                 cvss::MetricKind kind_b);

struct MetricReport {
  cvss::MetricKind kind = cvss::MetricKind::AC;
  double accuracy = 0.0;
  ClassScores per_class;  // canonical class order for the kind
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double mae = 0.0;
  double baseline = 0.0;
  ConfusionMatrix confusion;
};

MetricReport evaluate(const Labels& truth, const Labels& pred,
                      cvss::MetricKind kind);

struct OverlapReport {
  cvss::MetricKind kind = cvss::MetricKind::AC;
  std::size_t num_models = 0;
  std::vector<double> fraction_by_k;  // index k = misclassified by exactly k models
  double all_models_fraction() const { return fraction_by_k.back(); }
};

// predictions_by_model: model id -> labels aligned with truth.
OverlapReport misclassification_overlap(
    const Labels& truth,
    const std::map<std::string, Labels>& predictions_by_model,
    cvss::MetricKind kind);

struct AssociationMatrix {
  // Indexed by MetricKind pairs; symmetric, unit diagonal.
  std::array<std::array<double, cvss::kNumMetrics>, cvss::kNumMetrics> v{};
};

AssociationMatrix association_matrix(const std::vector<cvss::BaseVector>& truths);

}  // namespace cvsslab::eval
