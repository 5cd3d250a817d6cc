#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cvsslab/cve_ingest.hpp"
#include "cvsslab/cvss.hpp"
#include "cvsslab/llm_gateway.hpp"

namespace cvsslab::meta {

// --- feature encoding ---------------------------------------------------------

struct MetaFeatureVector {
  std::vector<double> model_codes;  // per model; UNKNOWN coded as -1
  double pairwise_consensus = 0.0;  // agreeing valid pairs / C(M,2)
  double majority_code = -1.0;      // majority among valid votes, -1 if none
  double confidence = 0.0;          // majority count / valid count
  std::vector<double> validity;     // per model, 1 when the label is valid

  std::vector<double> flat() const;  // codes, consensus, majority, confidence, flags
};

// Labels for one CVE in fixed model order. Throws WrongModelCount when the
// count differs from `expected_models`. Majority ties break toward the
// canonical (smallest) class code.
MetaFeatureVector encode(const std::vector<cvss::MetricValue>& model_labels,
                         cvss::MetricKind kind, std::size_t expected_models);

// --- dataset splitting -----------------------------------------------------------

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per-class proportions within one sample of the target; both sides keep at
// least one sample per class. Throws TooFewPerClass when a class has < 2.
SplitResult stratified_split(const std::vector<int>& labels,
                             double train_fraction, std::uint64_t seed);

struct FoldResult {
  std::vector<std::vector<std::size_t>> folds;  // disjoint cover of indices
  std::vector<std::string> warnings;            // degenerate classes
};

FoldResult stratified_kfold(const std::vector<int>& labels, int k,
                            std::uint64_t seed);

// --- meta models -----------------------------------------------------------------

enum class MetaModelKind : std::uint8_t {
  Voting,
  LogisticRegression,
  RandomForest,
  NeuralNetwork,
  // SVM and gradient boosting are reserved extension kinds; the train/predict
  // contract below is all a new kind has to implement.
};

std::string_view kind_name(MetaModelKind kind);
MetaModelKind kind_from_name(std::string_view name);  // throws SchemaMismatch

inline constexpr std::array<MetaModelKind, 4> kAllMetaKinds = {
    MetaModelKind::Voting, MetaModelKind::LogisticRegression,
    MetaModelKind::RandomForest, MetaModelKind::NeuralNetwork};

struct TrainOptions {
  std::uint64_t seed = 0;
  // logistic regression: multinomial softmax, L2, full-batch descent
  double lr_learning_rate = 0.1;
  double lr_l2 = 1.0;
  double lr_gradient_tol = 1e-6;
  int lr_max_iters = 5000;
  // random forest
  int rf_trees = 100;
  // neural network: (in, 100, 50, classes), ReLU, softmax, early stopping
  int nn_hidden1 = 100;
  int nn_hidden2 = 50;
  double nn_learning_rate = 1e-3;
  int nn_max_epochs = 500;
  int nn_patience = 10;
  double nn_validation_fraction = 0.1;
};

struct Matrix {
  std::vector<std::vector<double>> rows;
  std::size_t size() const { return rows.size(); }
};

// Parameter blocks, serializable as versioned JSON.
struct LogRegParams {
  std::vector<double> weights;  // K x (F+1), bias last
  std::vector<double> feature_mean, feature_scale;
};

struct TreeNode {
  int feature = -1;  // leaf when negative
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> distribution;  // leaf class probabilities
};

struct ForestParams {
  std::vector<std::vector<TreeNode>> trees;
};

struct MlpParams {
  std::vector<double> parameters;  // packed layer weights and biases
  std::vector<double> feature_mean, feature_scale;
};

class TrainedMetaModel;

struct VotingParams {
  std::vector<TrainedMetaModel> learners;  // LR, RF, NN on the same data
};

class TrainedMetaModel {
 public:
  MetaModelKind kind() const { return kind_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_features() const { return num_features_; }
  std::uint64_t seed() const { return seed_; }

  int predict(const std::vector<double>& features) const;  // argmax, canonical ties
  std::vector<double> predict_proba(const std::vector<double>& features) const;

  std::string serialize() const;
  static TrainedMetaModel deserialize(const std::string& text);

 private:
  friend TrainedMetaModel train(MetaModelKind, const Matrix&,
                                const std::vector<int>&, const TrainOptions&,
                                std::size_t);
  friend struct ModelCodec;

  MetaModelKind kind_ = MetaModelKind::Voting;
  std::size_t num_classes_ = 0;
  std::size_t num_features_ = 0;
  std::uint64_t seed_ = 0;
  TrainOptions hyperparams_;
  std::variant<LogRegParams, ForestParams, MlpParams, VotingParams> params_;
};

// Throws SingleClass / NonFiniteFeature; predict throws DimensionMismatch.
TrainedMetaModel train(MetaModelKind kind, const Matrix& features,
                       const std::vector<int>& labels,
                       const TrainOptions& options, std::size_t num_classes);

// Mean of the per-learner probability vectors; ties go to the smallest class.
std::pair<std::vector<double>, int> soft_vote(
    const std::vector<std::vector<double>>& probabilities);

// --- gradient surfaces (used by training and by finite-difference tests) --------

// Softmax regression loss over packed K x (F+1) weights:
// mean cross entropy + l2/(2N) * ||W_without_bias||^2.
std::pair<double, std::vector<double>> logreg_loss_and_gradient(
    const std::vector<double>& weights, const Matrix& features,
    const std::vector<int>& labels, std::size_t num_classes, double l2);

struct MlpShape {
  std::size_t inputs = 0;
  std::size_t hidden1 = 100;
  std::size_t hidden2 = 50;
  std::size_t outputs = 0;
  std::size_t parameter_count() const;
};

// Mean cross entropy of the two-hidden-layer ReLU network.
std::pair<double, std::vector<double>> mlp_loss_and_gradient(
    const MlpShape& shape, const std::vector<double>& parameters,
    const Matrix& features, const std::vector<int>& labels);

// --- end-to-end per-metric run --------------------------------------------------------

struct CvResult {
  MetaModelKind kind = MetaModelKind::Voting;
  std::vector<double> fold_accuracy;
  std::vector<double> fold_f1;
  double mean_accuracy = 0.0;
  double mean_f1 = 0.0;
  bool selected = false;
};

struct MetaRunResult {
  cvss::MetricKind metric = cvss::MetricKind::AC;
  std::vector<CvResult> cv;  // one per kind, kAllMetaKinds order
  MetaModelKind selected_kind = MetaModelKind::Voting;
  double meta_test_accuracy = 0.0;
  std::map<std::string, double> model_test_accuracy;  // per model id
  double baseline_test_accuracy = 0.0;
  double best_individual_accuracy = 0.0;
  double change = 0.0;  // meta minus best individual
  std::string serialized_model;  // winner refit on the full training split
};

// Stratified 80/20 split, 5-fold CV over the training split per kind, best
// mean weighted F1 wins, winner refit and scored on the hold-out next to
// every individual model and the train-majority baseline.
MetaRunResult run_meta(const std::vector<ingest::CveEntry>& dataset,
                       const gateway::PredictionTable& predictions,
                       cvss::MetricKind kind, std::uint64_t seed,
                       const TrainOptions& options = {});

}  // namespace cvsslab::meta
