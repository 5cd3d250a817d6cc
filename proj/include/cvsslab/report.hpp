#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cvsslab/cve_ingest.hpp"
#include "cvsslab/eval_metrics.hpp"
#include "cvsslab/llm_gateway.hpp"
#include "cvsslab/meta_classifier.hpp"
#include "cvsslab/text_analysis.hpp"

namespace cvsslab::report {

// --- evaluation (accuracy / weighted P,R,F1 / MAE / baseline tables) -----------

struct EvaluationOutputs {
  // metric,model,accuracy,weighted_precision,weighted_recall,weighted_f1,mae,baseline
  std::string report_csv;
  // metric,model,truth,pred,count (long form, UNKNOWN column included)
  std::string confusion_csv;
  // metric,k,fraction over the whole model set
  std::string overlap_csv;
  std::map<std::string, std::map<cvss::MetricKind, eval::MetricReport>> reports;
};

EvaluationOutputs evaluate_predictions(
    const std::vector<ingest::CveEntry>& dataset,
    const gateway::PredictionTable& predictions);

// --- dataset analysis -------------------------------------------------------------

struct AnalysisOutputs {
  std::map<std::string, std::string> distribution_csv;  // metric abbrev -> csv
  std::string severity_csv;          // computed from base scores, not stored values
  std::string association_csv;       // 8x8 Cramér's V
  std::string stats_csv;             // description length stats
  std::string histogram_csv;         // bucket_start,count,mean_correctness
  std::string correlations_csv;      // model,metric,feature,r,p_band,n
};

AnalysisOutputs analyze_dataset(
    const std::vector<ingest::CveEntry>& dataset,
    const gateway::PredictionTable* predictions);  // null: skip correlation parts

// --- meta-classifier comparison ------------------------------------------------------

struct MetaOutputs {
  std::string report_csv;  // metric,baseline,<models...>,best_meta,meta_model,change
  std::string cv_csv;      // metric,kind,fold,accuracy,weighted_f1,selected
  std::map<std::string, std::string> model_files;  // filename -> serialized model
  std::vector<meta::MetaRunResult> runs;
};

MetaOutputs run_meta_all(const std::vector<ingest::CveEntry>& dataset,
                         const gateway::PredictionTable& predictions,
                         std::uint64_t seed,
                         const meta::TrainOptions& options = {});

// --- svg rendering (plot-ready figures without external services) -------------------------

std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::string>& labels,
                          const std::vector<double>& values);

std::string svg_heatmap(const std::string& title,
                        const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& matrix);

}  // namespace cvsslab::report
