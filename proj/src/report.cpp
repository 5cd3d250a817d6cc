#include "cvsslab/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "cvsslab/errors.hpp"
#include "cvsslab/util.hpp"

namespace cvsslab::report {

namespace {

using util::format_double;

// model -> cve -> prediction, with exact-coverage checks against the dataset.
std::map<std::string, std::map<std::string, const gateway::PredictionSet*>>
index_predictions(const std::vector<ingest::CveEntry>& dataset,
                  const gateway::PredictionTable& predictions) {
  std::map<std::string, std::map<std::string, const gateway::PredictionSet*>>
      by_model;
  for (const gateway::PredictionSet& ps : predictions.rows) {
    auto& slot = by_model[ps.model_id][ps.cve_id];
    if (slot != nullptr)
      throw CoverageMismatch("duplicate prediction for " + ps.cve_id + " / " +
                             ps.model_id);
    slot = &ps;
  }
  for (const auto& [model, by_cve] : by_model)
    for (const ingest::CveEntry& e : dataset)
      if (!by_cve.count(e.cve_id))
        throw CoverageMismatch("model " + model + " lacks prediction for " +
                               e.cve_id);
  return by_model;
}

}  // namespace

EvaluationOutputs evaluate_predictions(
    const std::vector<ingest::CveEntry>& dataset,
    const gateway::PredictionTable& predictions) {
  if (dataset.empty()) throw EmptyInput("evaluate: empty dataset");
  const auto by_model = index_predictions(dataset, predictions);
  if (by_model.empty()) throw EmptyInput("evaluate: no predictions");

  EvaluationOutputs out;
  out.report_csv =
      "metric,model,accuracy,weighted_precision,weighted_recall,weighted_f1,"
      "mae,baseline\n";
  out.confusion_csv = "metric,model,truth,pred,count\n";
  out.overlap_csv = "metric,k,fraction\n";

  for (const auto& [model, by_cve] : by_model) {
    double acc_sum = 0.0;
    double p_sum = 0.0;
    double r_sum = 0.0;
    double f_sum = 0.0;
    double mae_sum = 0.0;
    double base_sum = 0.0;
    for (cvss::MetricKind kind : cvss::kAllMetrics) {
      eval::Labels truth;
      eval::Labels pred;
      truth.reserve(dataset.size());
      pred.reserve(dataset.size());
      for (const ingest::CveEntry& e : dataset) {
        truth.push_back(e.truth.get(kind));
        pred.push_back(
            by_cve.at(e.cve_id)->labels[static_cast<std::size_t>(kind)]);
      }
      eval::MetricReport report = eval::evaluate(truth, pred, kind);

      out.report_csv += util::csv_join(
          {std::string(cvss::metric_abbrev(kind)), model,
           format_double(report.accuracy, 4),
           format_double(report.weighted_precision, 4),
           format_double(report.weighted_recall, 4),
           format_double(report.weighted_f1, 4), format_double(report.mae, 4),
           format_double(report.baseline, 4)});
      out.report_csv.push_back('\n');

      const auto values = cvss::valid_values(kind);
      for (std::size_t t = 0; t < values.size(); ++t) {
        for (std::size_t p = 0; p <= values.size(); ++p) {
          const std::string pred_name =
              p == values.size()
                  ? "UNKNOWN"
                  : std::string(cvss::value_word(kind, values[p]));
          out.confusion_csv += util::csv_join(
              {std::string(cvss::metric_abbrev(kind)), model,
               std::string(cvss::value_word(kind, values[t])), pred_name,
               std::to_string(report.confusion.at(t, p))});
          out.confusion_csv.push_back('\n');
        }
      }

      acc_sum += report.accuracy;
      p_sum += report.weighted_precision;
      r_sum += report.weighted_recall;
      f_sum += report.weighted_f1;
      mae_sum += report.mae;
      base_sum += report.baseline;
      out.reports[model].emplace(kind, std::move(report));
    }
    out.report_csv += util::csv_join(
        {"Overall", model, format_double(acc_sum / 8.0, 4),
         format_double(p_sum / 8.0, 4), format_double(r_sum / 8.0, 4),
         format_double(f_sum / 8.0, 4), format_double(mae_sum / 8.0, 4),
         format_double(base_sum / 8.0, 4)});
    out.report_csv.push_back('\n');
  }

  // Misclassification overlap across the full model set.
  for (cvss::MetricKind kind : cvss::kAllMetrics) {
    eval::Labels truth;
    for (const ingest::CveEntry& e : dataset)
      truth.push_back(e.truth.get(kind));
    std::map<std::string, eval::Labels> per_model;
    for (const auto& [model, by_cve] : by_model) {
      eval::Labels pred;
      pred.reserve(dataset.size());
      for (const ingest::CveEntry& e : dataset)
        pred.push_back(
            by_cve.at(e.cve_id)->labels[static_cast<std::size_t>(kind)]);
      per_model.emplace(model, std::move(pred));
    }
    const eval::OverlapReport overlap =
        eval::misclassification_overlap(truth, per_model, kind);
    for (std::size_t k = 0; k < overlap.fraction_by_k.size(); ++k) {
      out.overlap_csv += util::csv_join(
          {std::string(cvss::metric_abbrev(kind)), std::to_string(k),
           format_double(overlap.fraction_by_k[k], 6)});
      out.overlap_csv.push_back('\n');
    }
  }
  return out;
}

AnalysisOutputs analyze_dataset(const std::vector<ingest::CveEntry>& dataset,
                                const gateway::PredictionTable* predictions) {
  if (dataset.empty()) throw EmptyInput("analyze: empty dataset");
  AnalysisOutputs out;

  // Class distributions per metric.
  for (cvss::MetricKind kind : cvss::kAllMetrics) {
    const auto values = cvss::valid_values(kind);
    std::vector<long long> counts(values.size(), 0);
    for (const ingest::CveEntry& e : dataset)
      ++counts[static_cast<std::size_t>(
          cvss::class_code(kind, e.truth.get(kind)))];
    std::string csv = "value,count\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
      csv += util::csv_join({std::string(cvss::value_word(kind, values[i])),
                             std::to_string(counts[i])});
      csv.push_back('\n');
    }
    out.distribution_csv[std::string(cvss::metric_abbrev(kind))] = std::move(csv);
  }

  // Severity bands derived from computed base scores, never stored values.
  {
    std::array<long long, 5> counts{};
    for (const ingest::CveEntry& e : dataset)
      ++counts[static_cast<std::size_t>(cvss::base_score(e.truth).severity)];
    out.severity_csv = "severity,count\n";
    for (std::size_t s = 0; s < counts.size(); ++s) {
      out.severity_csv += util::csv_join(
          {std::string(cvss::severity_name(static_cast<cvss::Severity>(s))),
           std::to_string(counts[s])});
      out.severity_csv.push_back('\n');
    }
  }

  // Cramér's V association between ground-truth metrics.
  {
    std::vector<cvss::BaseVector> truths;
    truths.reserve(dataset.size());
    for (const ingest::CveEntry& e : dataset) truths.push_back(e.truth);
    const eval::AssociationMatrix assoc = eval::association_matrix(truths);
    out.association_csv = "metric";
    for (cvss::MetricKind kind : cvss::kAllMetrics) {
      out.association_csv.push_back(',');
      out.association_csv += cvss::metric_abbrev(kind);
    }
    out.association_csv.push_back('\n');
    for (std::size_t i = 0; i < cvss::kNumMetrics; ++i) {
      out.association_csv +=
          cvss::metric_abbrev(static_cast<cvss::MetricKind>(i));
      for (std::size_t j = 0; j < cvss::kNumMetrics; ++j) {
        out.association_csv.push_back(',');
        out.association_csv += format_double(assoc.v[i][j], 4);
      }
      out.association_csv.push_back('\n');
    }
  }

  // Length stats and word-count histogram.
  const text::DescriptionStats stats = text::length_stats(dataset);
  out.stats_csv = "mean_chars,median_chars,min_chars,max_chars\n";
  out.stats_csv += util::csv_join(
      {format_double(stats.mean_chars, 2), format_double(stats.median_chars, 1),
       format_double(stats.min_chars, 0), format_double(stats.max_chars, 0)});
  out.stats_csv.push_back('\n');

  // Per-bucket mean correctness (mean over cve x model of the 8-metric
  // exact-match fraction) when predictions are available.
  std::map<int, std::pair<double, long long>> bucket_correct;  // sum, count
  if (predictions != nullptr) {
    const auto by_model = index_predictions(dataset, *predictions);
    for (const ingest::CveEntry& e : dataset) {
      std::size_t words = 0;
      bool in_word = false;
      for (char c : e.description) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
      }
      const int bucket = static_cast<int>(words / 20) * 20;
      for (const auto& [model, by_cve] : by_model) {
        const gateway::PredictionSet& ps = *by_cve.at(e.cve_id);
        int correct = 0;
        for (cvss::MetricKind kind : cvss::kAllMetrics)
          if (ps.labels[static_cast<std::size_t>(kind)] == e.truth.get(kind))
            ++correct;
        auto& [sum, count] = bucket_correct[bucket];
        sum += static_cast<double>(correct) / 8.0;
        ++count;
      }
    }
  }
  out.histogram_csv = "bucket_start,count,mean_correctness\n";
  for (const text::DescriptionStats::Bucket& b : stats.histogram) {
    std::string correctness;
    if (auto it = bucket_correct.find(b.start); it != bucket_correct.end())
      correctness = format_double(it->second.first /
                                      static_cast<double>(it->second.second),
                                  4);
    out.histogram_csv +=
        util::csv_join({std::to_string(b.start), std::to_string(b.count),
                        correctness});
    out.histogram_csv.push_back('\n');
  }

  // Correlation tables for all three description features; p is reported
  // both numerically and as the <0.05 band.
  out.correlations_csv = "model,metric,feature,r,p,p_band,n\n";
  if (predictions != nullptr) {
    for (text::TextFeature feature :
         {text::TextFeature::Length, text::TextFeature::Entities,
          text::TextFeature::InformationContent}) {
      for (const text::CorrelationRow& row :
           text::correctness_correlates(dataset, *predictions, feature)) {
        out.correlations_csv += util::csv_join(
            {row.model_id, row.metric, std::string(text::feature_name(feature)),
             row.result.defined ? format_double(row.result.r, 6) : "undefined",
             row.result.defined ? format_double(row.result.p_value, 6)
                                : "undefined",
             row.result.p_band(), std::to_string(row.result.n)});
        out.correlations_csv.push_back('\n');
      }
    }
  }
  return out;
}

MetaOutputs run_meta_all(const std::vector<ingest::CveEntry>& dataset,
                         const gateway::PredictionTable& predictions,
                         std::uint64_t seed,
                         const meta::TrainOptions& options) {
  MetaOutputs out;
  const std::vector<std::string> models = predictions.model_ids();

  out.report_csv = "metric,baseline";
  for (const std::string& model : models) out.report_csv += "," + model;
  out.report_csv += ",best_meta,meta_model,change\n";
  out.cv_csv = "metric,kind,fold,accuracy,weighted_f1,selected\n";

  for (cvss::MetricKind kind : cvss::kAllMetrics) {
    meta::MetaRunResult run =
        meta::run_meta(dataset, predictions, kind, seed, options);

    std::vector<std::string> fields = {
        std::string(cvss::metric_abbrev(kind)),
        format_double(run.baseline_test_accuracy, 4)};
    for (const std::string& model : models)
      fields.push_back(format_double(run.model_test_accuracy.at(model), 4));
    fields.push_back(format_double(run.meta_test_accuracy, 4));
    fields.push_back(std::string(meta::kind_name(run.selected_kind)));
    fields.push_back(format_double(run.change, 4));
    out.report_csv += util::csv_join(fields);
    out.report_csv.push_back('\n');

    for (const meta::CvResult& cv : run.cv) {
      for (std::size_t f = 0; f < cv.fold_accuracy.size(); ++f) {
        out.cv_csv += util::csv_join(
            {std::string(cvss::metric_abbrev(kind)),
             std::string(meta::kind_name(cv.kind)), std::to_string(f),
             format_double(cv.fold_accuracy[f], 4),
             format_double(cv.fold_f1[f], 4), cv.selected ? "true" : "false"});
        out.cv_csv.push_back('\n');
      }
    }

    out.model_files[std::string(cvss::metric_abbrev(kind)) + "_" +
                    std::string(meta::kind_name(run.selected_kind)) + ".json"] =
        run.serialized_model;
    out.runs.push_back(std::move(run));
  }
  return out;
}

// --- svg ---------------------------------------------------------------------

namespace {

std::string svg_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
  const int width = 640;
  const int height = 400;
  const int margin = 48;
  const std::size_t n = values.size();
  double max_value = 1.0;
  for (double v : values) max_value = std::max(max_value, v);

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
      std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(width / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
         svg_escape(title) + "</text>\n";

  const double plot_w = width - 2.0 * margin;
  const double plot_h = height - 2.0 * margin;
  const double band = n > 0 ? plot_w / static_cast<double>(n) : plot_w;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = plot_h * values[i] / max_value;
    const double x = margin + band * static_cast<double>(i) + band * 0.125;
    const double y = height - margin - h;
    svg += "<rect x=\"" + util::format_double(x, 1) + "\" y=\"" +
           util::format_double(y, 1) + "\" width=\"" +
           util::format_double(band * 0.75, 1) + "\" height=\"" +
           util::format_double(h, 1) + "\" fill=\"#4477aa\"/>\n";
    svg += "<text x=\"" + util::format_double(x + band * 0.375, 1) + "\" y=\"" +
           std::to_string(height - margin + 16) +
           "\" text-anchor=\"middle\" font-size=\"11\">" +
           svg_escape(labels[i]) + "</text>\n";
    svg += "<text x=\"" + util::format_double(x + band * 0.375, 1) + "\" y=\"" +
           util::format_double(y - 4, 1) +
           "\" text-anchor=\"middle\" font-size=\"10\">" +
           util::format_double(values[i], values[i] >= 100 ? 0 : 2) +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string svg_heatmap(const std::string& title,
                        const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& matrix) {
  const std::size_t n = matrix.size();
  const int cell = 48;
  const int margin = 64;
  const int width = margin + cell * static_cast<int>(n) + 16;
  const int height = margin + cell * static_cast<int>(n) + 16;

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
      std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(width / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         svg_escape(title) + "</text>\n";

  for (std::size_t i = 0; i < n; ++i) {
    svg += "<text x=\"" + std::to_string(margin - 8) + "\" y=\"" +
           std::to_string(margin + cell * static_cast<int>(i) + cell / 2 + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + svg_escape(labels[i]) +
           "</text>\n";
    svg += "<text x=\"" +
           std::to_string(margin + cell * static_cast<int>(i) + cell / 2) +
           "\" y=\"" + std::to_string(margin - 8) +
           "\" text-anchor=\"middle\" font-size=\"11\">" +
           svg_escape(labels[i]) + "</text>\n";
    for (std::size_t j = 0; j < n; ++j) {
      const double v = std::clamp(matrix[i][j], 0.0, 1.0);
      const int blue = 255 - static_cast<int>(v * 200.0);
      const int red_green = 255 - static_cast<int>(v * 255.0);
      svg += "<rect x=\"" +
             std::to_string(margin + cell * static_cast<int>(j)) + "\" y=\"" +
             std::to_string(margin + cell * static_cast<int>(i)) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" +
             std::to_string(cell) + "\" fill=\"rgb(" +
             std::to_string(red_green) + "," + std::to_string(red_green) +
             "," + std::to_string(blue) + ")\"/>\n";
      svg += "<text x=\"" +
             std::to_string(margin + cell * static_cast<int>(j) + cell / 2) +
             "\" y=\"" +
             std::to_string(margin + cell * static_cast<int>(i) + cell / 2 + 4) +
             "\" text-anchor=\"middle\" font-size=\"10\" fill=\"" +
             (v > 0.6 ? "white" : "black") + "\">" + util::format_double(v, 2) +
             "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace cvsslab::report
