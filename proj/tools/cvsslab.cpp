// cvsslab: CVSS v3.1 scoring-pipeline toolkit.
//
// Subcommands: ingest, score, predict, evaluate, analyze, meta, report.
// Exit codes: 0 success, 2 input error, 3 provider error, 4 internal error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvsslab/cve_ingest.hpp"
#include "cvsslab/cvss.hpp"
#include "cvsslab/errors.hpp"
#include "cvsslab/eval_metrics.hpp"
#include "cvsslab/llm_gateway.hpp"
#include "cvsslab/meta_classifier.hpp"
#include "cvsslab/report.hpp"
#include "cvsslab/text_analysis.hpp"
#include "cvsslab/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cvsslab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitProvider = 3;
constexpr int kExitInternal = 4;

struct AppConfig {
  std::vector<gateway::ProviderConfig> providers;
  gateway::PromptSpec prompt;
  fs::path cache_path = "replay_cache.tsv";
  std::uint64_t seed = 42;
  fs::path out_dir = "out";
};

// Config file keys (JSON): providers[] {id, endpoint, model, temperature,
// max_parallel, credential_env}, prompt {shots, batch_size}, cache, seed, out.
AppConfig load_config(const fs::path& path) {
  AppConfig config;
  json doc = json::parse(util::read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw IoFailure("config file is not valid JSON: " + path.string());

  if (doc.contains("providers")) {
    for (const json& p : doc["providers"]) {
      gateway::ProviderConfig provider;
      provider.provider_id = p.at("id").get<std::string>();
      provider.endpoint = p.at("endpoint").get<std::string>();
      provider.model_name = p.value("model", provider.provider_id);
      provider.temperature = p.value("temperature", 0.0);
      provider.max_parallel = p.value("max_parallel", 1);
      provider.credential_env_var = p.value("credential_env", "");
      provider.auth_header = p.value("auth_header", "Authorization");
      provider.auth_prefix = p.value("auth_prefix", "Bearer ");
      if (p.contains("headers")) {
        for (const auto& [name, value] : p["headers"].items())
          provider.extra_headers.emplace_back(name, value.get<std::string>());
      }
      config.providers.push_back(std::move(provider));
    }
  }
  if (doc.contains("prompt")) {
    const json& prompt = doc["prompt"];
    config.prompt.shots = prompt.value("shots", 2);
    config.prompt.batch_size = prompt.value("batch_size", 20);
    // Custom worked examples: description plus eight letter labels in the
    // report order AC,AV,PR,UI,S,C,I,A.
    if (prompt.contains("examples")) {
      for (const json& ex : prompt["examples"]) {
        gateway::ShotExample example;
        example.description = ex.at("description").get<std::string>();
        const auto labels = ex.at("labels").get<std::vector<std::string>>();
        if (labels.size() != cvss::kNumMetrics)
          throw IoFailure("config: each prompt example needs 8 labels");
        for (std::size_t k = 0; k < cvss::kNumMetrics; ++k) {
          const auto kind = static_cast<cvss::MetricKind>(k);
          const cvss::MetricValue v = gateway::normalize_label(labels[k], kind);
          if (v == cvss::MetricValue::Unknown)
            throw IoFailure("config: bad example label '" + labels[k] +
                            "' for " + std::string(cvss::metric_abbrev(kind)));
          example.labels[k] = v;
        }
        config.prompt.shot_examples.push_back(std::move(example));
      }
    }
  }
  if (doc.contains("cache")) config.cache_path = doc["cache"].get<std::string>();
  if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("out")) config.out_dir = doc["out"].get<std::string>();
  return config;
}

void write_out(const fs::path& dir, const std::string& name,
               const std::string& content) {
  util::write_file(dir / name, content);
}

int run_ingest(const fs::path& input, const fs::path& out_dir) {
  const ingest::IngestResult result = ingest::ingest_path(input);
  ingest::save_dataset(result.entries, out_dir / "dataset.jsonl");
  write_out(out_dir, "filter_report.csv", result.report.to_csv());
  std::cout << "kept " << result.report.kept << " of "
            << result.report.total() << " records -> "
            << (out_dir / "dataset.jsonl").string() << "\n";
  return kExitOk;
}

int run_score(const std::string& vector_arg, const fs::path& dataset_path,
              const fs::path& out_dir) {
  if (!vector_arg.empty()) {
    const cvss::BaseVector v = cvss::parse_vector_string(vector_arg);
    const cvss::ScoreBreakdown b = cvss::base_score(v);
    std::cout << util::format_double(b.base_score, 1) << " "
              << cvss::severity_name(b.severity)
              << " exploitability=" << util::format_double(b.exploitability, 6)
              << " impact=" << util::format_double(b.impact, 6) << "\n";
    return kExitOk;
  }
  const std::vector<ingest::CveEntry> dataset =
      ingest::load_dataset(dataset_path);
  std::string csv = "cve_id,vector,exploitability,impact,base_score,severity\n";
  for (const ingest::CveEntry& e : dataset) {
    const cvss::ScoreBreakdown b = cvss::base_score(e.truth);
    csv += util::csv_join({e.cve_id, cvss::format_vector_string(e.truth),
                           util::format_double(b.exploitability, 6),
                           util::format_double(b.impact, 6),
                           util::format_double(b.base_score, 1),
                           std::string(cvss::severity_name(b.severity))});
    csv.push_back('\n');
  }
  write_out(out_dir, "scores.csv", csv);
  std::cout << dataset.size() << " rows -> "
            << (out_dir / "scores.csv").string() << "\n";
  return kExitOk;
}

int run_predict(const AppConfig& config, const fs::path& dataset_path,
                const std::string& mode_name, const fs::path& out_dir) {
  const std::vector<ingest::CveEntry> dataset =
      ingest::load_dataset(dataset_path);
  const gateway::SubmitMode mode = gateway::submit_mode_from_string(mode_name);
  if (config.providers.empty())
    throw IoFailure("no providers configured (use --config)");

  gateway::ReplayCache cache(config.cache_path);
  std::unique_ptr<gateway::HttpTransport> transport;
  if (mode != gateway::SubmitMode::Replay)
    transport = gateway::make_live_transport();

  std::vector<std::string> provider_errors;
  const gateway::PredictionTable table = gateway::run_predictions(
      dataset, config.providers, config.prompt, cache, mode, transport.get(),
      {}, &provider_errors);
  gateway::save_predictions_csv(table, out_dir / "predictions.csv");
  for (const std::string& err : provider_errors)
    std::cerr << "warning: " << err << "\n";
  std::cout << table.rows.size() << " rows -> "
            << (out_dir / "predictions.csv").string() << "\n";
  // Partial results are flushed; surface the failure in the exit code.
  return provider_errors.empty() ? kExitOk : kExitProvider;
}

int run_evaluate(const fs::path& dataset_path, const fs::path& predictions_path,
                 const fs::path& out_dir) {
  const auto dataset = ingest::load_dataset(dataset_path);
  const auto predictions = gateway::load_predictions_csv(predictions_path);
  const report::EvaluationOutputs outputs =
      report::evaluate_predictions(dataset, predictions);
  write_out(out_dir, "report.csv", outputs.report_csv);
  write_out(out_dir, "confusion.csv", outputs.confusion_csv);
  write_out(out_dir, "overlap.csv", outputs.overlap_csv);
  std::cout << "evaluation written to " << out_dir.string() << "\n";
  return kExitOk;
}

int run_analyze(const fs::path& dataset_path, const fs::path& predictions_path,
                bool svg, const fs::path& out_dir) {
  const auto dataset = ingest::load_dataset(dataset_path);
  std::optional<gateway::PredictionTable> predictions;
  if (!predictions_path.empty())
    predictions = gateway::load_predictions_csv(predictions_path);

  const report::AnalysisOutputs outputs = report::analyze_dataset(
      dataset, predictions ? &*predictions : nullptr);
  for (const auto& [abbrev, csv] : outputs.distribution_csv)
    write_out(out_dir, "distribution_" + abbrev + ".csv", csv);
  write_out(out_dir, "severity_distribution.csv", outputs.severity_csv);
  write_out(out_dir, "association_matrix.csv", outputs.association_csv);
  write_out(out_dir, "description_stats.csv", outputs.stats_csv);
  write_out(out_dir, "length_histogram.csv", outputs.histogram_csv);
  write_out(out_dir, "correlations.csv", outputs.correlations_csv);

  if (svg) {
    for (cvss::MetricKind kind : cvss::kAllMetrics) {
      std::vector<std::string> labels;
      std::vector<double> values;
      for (cvss::MetricValue value : cvss::valid_values(kind))
        labels.emplace_back(cvss::value_word(kind, value));
      values.assign(labels.size(), 0.0);
      for (const ingest::CveEntry& e : dataset)
        values[static_cast<std::size_t>(
            cvss::class_code(kind, e.truth.get(kind)))] += 1.0;
      write_out(out_dir,
                "distribution_" + std::string(cvss::metric_abbrev(kind)) +
                    ".svg",
                report::svg_bar_chart(
                    std::string(cvss::metric_name(kind)), labels, values));
    }
    std::vector<cvss::BaseVector> truths;
    for (const ingest::CveEntry& e : dataset) truths.push_back(e.truth);
    const eval::AssociationMatrix assoc = eval::association_matrix(truths);
    std::vector<std::string> labels;
    std::vector<std::vector<double>> matrix;
    for (cvss::MetricKind kind : cvss::kAllMetrics) {
      labels.emplace_back(cvss::metric_abbrev(kind));
      matrix.emplace_back(assoc.v[static_cast<std::size_t>(kind)].begin(),
                          assoc.v[static_cast<std::size_t>(kind)].end());
    }
    write_out(out_dir, "association_matrix.svg",
              report::svg_heatmap("Correlation of Base Metrics", labels,
                                  matrix));

    std::vector<std::string> severity_labels;
    std::vector<double> severity_counts(5, 0.0);
    for (int s = 0; s < 5; ++s)
      severity_labels.emplace_back(
          cvss::severity_name(static_cast<cvss::Severity>(s)));
    for (const ingest::CveEntry& e : dataset)
      severity_counts[static_cast<std::size_t>(
          cvss::base_score(e.truth).severity)] += 1.0;
    write_out(out_dir, "severity_distribution.svg",
              report::svg_bar_chart("Distribution of Severity",
                                    severity_labels, severity_counts));
  }
  std::cout << "analysis written to " << out_dir.string() << "\n";
  return kExitOk;
}

int run_meta_cmd(const fs::path& dataset_path, const fs::path& predictions_path,
                 std::uint64_t seed, const fs::path& out_dir) {
  const auto dataset = ingest::load_dataset(dataset_path);
  const auto predictions = gateway::load_predictions_csv(predictions_path);
  const report::MetaOutputs outputs =
      report::run_meta_all(dataset, predictions, seed);
  write_out(out_dir, "meta_report.csv", outputs.report_csv);
  write_out(out_dir, "meta_cv.csv", outputs.cv_csv);
  for (const auto& [name, content] : outputs.model_files)
    util::write_file(out_dir / "models" / name, content);
  std::cout << "meta-classifier report written to " << out_dir.string() << "\n";
  return kExitOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"CVSS v3.1 scoring pipeline toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "parse and filter CVE records");
  std::string ingest_input;
  std::string ingest_out = "out";
  ingest_cmd->add_option("input", ingest_input, "record directory or stream file")
      ->required();
  ingest_cmd->add_option("--out", ingest_out, "output directory");

  // score
  auto* score_cmd = app.add_subcommand("score", "compute CVSS base scores");
  std::string score_vector;
  std::string score_dataset;
  std::string score_out = "out";
  score_cmd->add_option("vector", score_vector, "a CVSS v3.1 vector string");
  score_cmd->add_option("--dataset", score_dataset, "dataset file to score");
  score_cmd->add_option("--out", score_out, "output directory");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "run LLM predictions");
  std::string predict_dataset;
  std::string predict_mode = "replay";
  std::string predict_out = "out";
  std::string predict_cache;
  int predict_shots = -1;
  int predict_batch = -1;
  predict_cmd->add_option("--dataset", predict_dataset, "dataset file")->required();
  predict_cmd->add_option("--mode", predict_mode, "live, replay or record");
  predict_cmd->add_option("--cache", predict_cache, "replay cache file");
  predict_cmd->add_option("--shots", predict_shots, "few-shot example count");
  predict_cmd->add_option("--batch-size", predict_batch, "CVEs per request");
  predict_cmd->add_option("--out", predict_out, "output directory");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions");
  std::string eval_dataset, eval_predictions;
  std::string eval_out = "out";
  eval_cmd->add_option("--dataset", eval_dataset, "dataset file")->required();
  eval_cmd->add_option("--predictions", eval_predictions, "predictions CSV")
      ->required();
  eval_cmd->add_option("--out", eval_out, "output directory");

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "dataset / text analyses");
  std::string analyze_dataset, analyze_predictions;
  std::string analyze_out = "out";
  bool analyze_svg = false;
  analyze_cmd->add_option("--dataset", analyze_dataset, "dataset file")->required();
  analyze_cmd->add_option("--predictions", analyze_predictions,
                          "predictions CSV (enables correlation tables)");
  analyze_cmd->add_flag("--svg", analyze_svg, "also render SVG charts");
  analyze_cmd->add_option("--out", analyze_out, "output directory");

  // meta
  auto* meta_cmd = app.add_subcommand("meta", "train meta-classifiers");
  std::string meta_dataset, meta_predictions;
  std::string meta_out = "out";
  std::uint64_t meta_seed = 0;
  bool meta_seed_set = false;
  meta_cmd->add_option("--dataset", meta_dataset, "dataset file")->required();
  meta_cmd->add_option("--predictions", meta_predictions, "predictions CSV")
      ->required();
  meta_cmd->add_option("--seed", meta_seed, "training seed")
      ->each([&](const std::string&) { meta_seed_set = true; });
  meta_cmd->add_option("--out", meta_out, "output directory");

  // report: evaluate + analyze + meta in one pass
  auto* report_cmd = app.add_subcommand("report", "full evaluation bundle");
  std::string report_dataset, report_predictions;
  std::string report_out = "out";
  std::uint64_t report_seed = 0;
  bool report_seed_set = false;
  report_cmd->add_option("--dataset", report_dataset, "dataset file")->required();
  report_cmd->add_option("--predictions", report_predictions, "predictions CSV")
      ->required();
  report_cmd->add_option("--seed", report_seed, "training seed")
      ->each([&](const std::string&) { report_seed_set = true; });
  report_cmd->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  AppConfig config;
  if (!config_path.empty()) config = load_config(config_path);

  if (ingest_cmd->parsed()) return run_ingest(ingest_input, ingest_out);
  if (score_cmd->parsed()) {
    if (score_vector.empty() && score_dataset.empty())
      throw IoFailure("score: give a vector string or --dataset");
    return run_score(score_vector, score_dataset, score_out);
  }
  if (predict_cmd->parsed()) {
    if (!predict_cache.empty()) config.cache_path = predict_cache;
    if (predict_shots >= 0) config.prompt.shots = predict_shots;
    if (predict_batch > 0) config.prompt.batch_size = predict_batch;
    auto& examples = config.prompt.shot_examples;
    const auto shots = static_cast<std::size_t>(config.prompt.shots);
    if (examples.size() > shots) examples.resize(shots);
    if (!examples.empty() && examples.size() < shots)
      throw IoFailure("config supplies " + std::to_string(examples.size()) +
                      " prompt examples but --shots is " +
                      std::to_string(config.prompt.shots));
    if (examples.empty() && config.prompt.shots > 2)
      throw IoFailure("more than 2 shots requires prompt examples in the "
                      "config file");
    return run_predict(config, predict_dataset, predict_mode, predict_out);
  }
  if (eval_cmd->parsed())
    return run_evaluate(eval_dataset, eval_predictions, eval_out);
  if (analyze_cmd->parsed())
    return run_analyze(analyze_dataset, analyze_predictions, analyze_svg,
                       analyze_out);
  if (meta_cmd->parsed())
    return run_meta_cmd(meta_dataset, meta_predictions,
                        meta_seed_set ? meta_seed : config.seed, meta_out);
  if (report_cmd->parsed()) {
    const std::uint64_t seed = report_seed_set ? report_seed : config.seed;
    int rc = run_evaluate(report_dataset, report_predictions, report_out);
    if (rc != kExitOk) return rc;
    rc = run_analyze(report_dataset, report_predictions, false, report_out);
    if (rc != kExitOk) return rc;
    return run_meta_cmd(report_dataset, report_predictions, seed, report_out);
  }
  return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const AuthError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitProvider;
  } catch (const ProviderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitProvider;
  } catch (const MalformedVector& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const MalformedRecord& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SchemaMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CacheMiss& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CoverageMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const TooFewPerClass& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SingleClass& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const EmptyInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad config or input document: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
