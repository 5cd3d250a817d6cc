#include "cvsslab/meta_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "cvsslab/errors.hpp"
#include "cvsslab/eval_metrics.hpp"
#include "cvsslab/util.hpp"

namespace cvsslab::meta {

using nlohmann::json;

// --- feature encoding -------------------------------------------------------

std::vector<double> MetaFeatureVector::flat() const {
  std::vector<double> out;
  out.reserve(model_codes.size() * 2 + 3);
  out.insert(out.end(), model_codes.begin(), model_codes.end());
  out.push_back(pairwise_consensus);
  out.push_back(majority_code);
  out.push_back(confidence);
  out.insert(out.end(), validity.begin(), validity.end());
  return out;
}

MetaFeatureVector encode(const std::vector<cvss::MetricValue>& model_labels,
                         cvss::MetricKind kind, std::size_t expected_models) {
  if (model_labels.size() != expected_models)
    throw WrongModelCount("encode: got " +
                          std::to_string(model_labels.size()) +
                          " labels, expected " +
                          std::to_string(expected_models));

  const std::size_t m = model_labels.size();
  MetaFeatureVector out;
  out.model_codes.reserve(m);
  out.validity.reserve(m);

  std::map<int, std::size_t> votes;  // valid codes only
  std::size_t valid_count = 0;
  for (cvss::MetricValue v : model_labels) {
    if (v == cvss::MetricValue::Unknown) {
      out.model_codes.push_back(-1.0);
      out.validity.push_back(0.0);
    } else {
      const int code = cvss::class_code(kind, v);
      out.model_codes.push_back(static_cast<double>(code));
      out.validity.push_back(1.0);
      ++votes[code];
      ++valid_count;
    }
  }

  if (valid_count > 0) {
    std::size_t best_count = 0;
    int best_code = -1;
    for (const auto& [code, count] : votes) {
      if (count > best_count) {  // ordered map: ties keep the smallest code
        best_count = count;
        best_code = code;
      }
    }
    out.majority_code = static_cast<double>(best_code);
    out.confidence =
        static_cast<double>(best_count) / static_cast<double>(valid_count);
  }

  // Agreement over all C(M,2) pairs; a pair with an UNKNOWN member never
  // agrees, so consensus 1 requires every prediction valid and identical.
  if (m >= 2) {
    std::size_t agreeing = 0;
    for (const auto& [code, count] : votes)
      agreeing += count * (count - 1) / 2;
    out.pairwise_consensus = static_cast<double>(agreeing) /
                             static_cast<double>(m * (m - 1) / 2);
  }
  return out;
}

// --- dataset splitting -------------------------------------------------------------

namespace {

std::map<int, std::vector<std::size_t>> group_by_label(
    const std::vector<int>& labels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i)
    groups[labels[i]].push_back(i);
  return groups;
}

}  // namespace

SplitResult stratified_split(const std::vector<int>& labels,
                             double train_fraction, std::uint64_t seed) {
  if (labels.empty()) throw EmptyInput("stratified_split: no labels");
  auto groups = group_by_label(labels);
  for (const auto& [label, indices] : groups)
    if (indices.size() < 2)
      throw TooFewPerClass("class " + std::to_string(label) +
                           " has fewer than 2 samples");

  std::mt19937_64 rng(seed);
  SplitResult out;
  for (auto& [label, indices] : groups) {
    util::shuffle_indices(rng, indices);
    const auto n = static_cast<double>(indices.size());
    auto train_n = static_cast<std::size_t>(std::llround(train_fraction * n));
    train_n = std::clamp<std::size_t>(train_n, 1, indices.size() - 1);
    out.train.insert(out.train.end(), indices.begin(), indices.begin() + train_n);
    out.test.insert(out.test.end(), indices.begin() + train_n, indices.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

FoldResult stratified_kfold(const std::vector<int>& labels, int k,
                            std::uint64_t seed) {
  if (labels.empty()) throw EmptyInput("stratified_kfold: no labels");
  if (k < 2) throw EmptyInput("stratified_kfold: k must be >= 2");

  auto groups = group_by_label(labels);
  std::mt19937_64 rng(seed);
  FoldResult out;
  out.folds.assign(static_cast<std::size_t>(k), {});

  std::size_t cursor = 0;  // continues across classes to balance fold sizes
  for (auto& [label, indices] : groups) {
    if (indices.size() < static_cast<std::size_t>(k))
      out.warnings.push_back("class " + std::to_string(label) + " has " +
                             std::to_string(indices.size()) +
                             " samples for " + std::to_string(k) + " folds");
    util::shuffle_indices(rng, indices);
    for (std::size_t idx : indices) {
      out.folds[cursor % static_cast<std::size_t>(k)].push_back(idx);
      ++cursor;
    }
  }
  for (auto& fold : out.folds) std::sort(fold.begin(), fold.end());
  return out;
}

// --- shared model helpers -------------------------------------------------------------

namespace {

void check_training_inputs(const Matrix& features,
                           const std::vector<int>& labels,
                           std::size_t num_classes) {
  if (features.size() != labels.size())
    throw LengthMismatch("train: features and labels differ in length");
  if (features.size() == 0) throw EmptyInput("train: no samples");
  std::vector<bool> seen(num_classes, false);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw UnknownValue("train: label code out of range");
    seen[static_cast<std::size_t>(y)] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2)
    throw SingleClass("train: need at least 2 observed classes");
  for (const auto& row : features.rows)
    for (double v : row)
      if (!std::isfinite(v)) throw NonFiniteFeature("train: non-finite feature");
}

struct Standardizer {
  std::vector<double> mean, scale;

  static Standardizer fit(const Matrix& features) {
    Standardizer s;
    const std::size_t n = features.size();
    const std::size_t f = features.rows.front().size();
    s.mean.assign(f, 0.0);
    s.scale.assign(f, 0.0);
    for (const auto& row : features.rows)
      for (std::size_t j = 0; j < f; ++j) s.mean[j] += row[j];
    for (double& m : s.mean) m /= static_cast<double>(n);
    for (const auto& row : features.rows)
      for (std::size_t j = 0; j < f; ++j) {
        const double d = row[j] - s.mean[j];
        s.scale[j] += d * d;
      }
    for (double& v : s.scale) {
      v = std::sqrt(v / static_cast<double>(n));
      if (v < 1e-12) v = 1.0;  // constant feature
    }
    return s;
  }

  std::vector<double> apply(const std::vector<double>& row) const {
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
      out[j] = (row[j] - mean[j]) / scale[j];
    return out;
  }

  Matrix apply(const Matrix& features) const {
    Matrix out;
    out.rows.reserve(features.size());
    for (const auto& row : features.rows) out.rows.push_back(apply(row));
    return out;
  }
};

std::vector<double> softmax(std::vector<double> logits) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - max_logit);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return logits;
}

int argmax_class(const std::vector<double>& probabilities) {
  int best = 0;
  for (std::size_t i = 1; i < probabilities.size(); ++i)
    if (probabilities[i] > probabilities[static_cast<std::size_t>(best)])
      best = static_cast<int>(i);
  return best;
}

}  // namespace

std::pair<std::vector<double>, int> soft_vote(
    const std::vector<std::vector<double>>& probabilities) {
  if (probabilities.empty()) throw EmptyInput("soft_vote: no learners");
  std::vector<double> mean(probabilities.front().size(), 0.0);
  for (const auto& p : probabilities) {
    if (p.size() != mean.size())
      throw DimensionMismatch("soft_vote: probability sizes differ");
    for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
  }
  for (double& v : mean) v /= static_cast<double>(probabilities.size());
  return {mean, argmax_class(mean)};
}

// --- logistic regression ----------------------------------------------------------------

std::pair<double, std::vector<double>> logreg_loss_and_gradient(
    const std::vector<double>& weights, const Matrix& features,
    const std::vector<int>& labels, std::size_t num_classes, double l2) {
  if (features.size() == 0) throw EmptyInput("logreg loss: no samples");
  const std::size_t n = features.size();
  const std::size_t f = features.rows.front().size();
  const std::size_t stride = f + 1;  // bias last
  if (weights.size() != num_classes * stride)
    throw DimensionMismatch("logreg: weight vector has wrong size");

  double loss = 0.0;
  std::vector<double> grad(weights.size(), 0.0);
  std::vector<double> logits(num_classes);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = features.rows[i];
    for (std::size_t k = 0; k < num_classes; ++k) {
      double z = weights[k * stride + f];  // bias
      for (std::size_t j = 0; j < f; ++j) z += weights[k * stride + j] * x[j];
      logits[k] = z;
    }
    const std::vector<double> p = softmax(logits);
    const auto y = static_cast<std::size_t>(labels[i]);
    loss += -std::log(std::max(p[y], 1e-300));
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double diff = p[k] - (k == y ? 1.0 : 0.0);
      for (std::size_t j = 0; j < f; ++j)
        grad[k * stride + j] += diff * x[j];
      grad[k * stride + f] += diff;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  for (double& g : grad) g *= inv_n;

  // L2 on non-bias weights.
  for (std::size_t k = 0; k < num_classes; ++k)
    for (std::size_t j = 0; j < f; ++j) {
      const double w = weights[k * stride + j];
      loss += 0.5 * l2 * inv_n * w * w;
      grad[k * stride + j] += l2 * inv_n * w;
    }
  return {loss, grad};
}

namespace {

LogRegParams train_logreg(const Matrix& features, const std::vector<int>& labels,
                          std::size_t num_classes, const TrainOptions& opt) {
  const Standardizer standardizer = Standardizer::fit(features);
  const Matrix xs = standardizer.apply(features);
  const std::size_t f = xs.rows.front().size();

  std::vector<double> weights(num_classes * (f + 1), 0.0);
  for (int iter = 0; iter < opt.lr_max_iters; ++iter) {
    auto [loss, grad] =
        logreg_loss_and_gradient(weights, xs, labels, num_classes, opt.lr_l2);
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    if (std::sqrt(norm) < opt.lr_gradient_tol) break;
    for (std::size_t j = 0; j < weights.size(); ++j)
      weights[j] -= opt.lr_learning_rate * grad[j];
  }

  LogRegParams params;
  params.weights = std::move(weights);
  params.feature_mean = standardizer.mean;
  params.feature_scale = standardizer.scale;
  return params;
}

std::vector<double> logreg_proba(const LogRegParams& params,
                                 const std::vector<double>& features,
                                 std::size_t num_classes) {
  std::vector<double> x(features.size());
  for (std::size_t j = 0; j < features.size(); ++j)
    x[j] = (features[j] - params.feature_mean[j]) / params.feature_scale[j];
  const std::size_t f = x.size();
  const std::size_t stride = f + 1;
  std::vector<double> logits(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    double z = params.weights[k * stride + f];
    for (std::size_t j = 0; j < f; ++j) z += params.weights[k * stride + j] * x[j];
    logits[k] = z;
  }
  return softmax(std::move(logits));
}

}  // namespace

// --- neural network --------------------------------------------------------------------------

std::size_t MlpShape::parameter_count() const {
  return hidden1 * inputs + hidden1 + hidden2 * hidden1 + hidden2 +
         outputs * hidden2 + outputs;
}

std::pair<double, std::vector<double>> mlp_loss_and_gradient(
    const MlpShape& shape, const std::vector<double>& parameters,
    const Matrix& features, const std::vector<int>& labels) {
  if (parameters.size() != shape.parameter_count())
    throw DimensionMismatch("mlp: parameter vector has wrong size");
  if (features.size() == 0) throw EmptyInput("mlp loss: no samples");
  const std::size_t n = features.size();

  // Parameter layout: W1, b1, W2, b2, W3, b3 (row-major, outputs x inputs).
  const std::size_t w1 = 0;
  const std::size_t b1 = w1 + shape.hidden1 * shape.inputs;
  const std::size_t w2 = b1 + shape.hidden1;
  const std::size_t b2 = w2 + shape.hidden2 * shape.hidden1;
  const std::size_t w3 = b2 + shape.hidden2;
  const std::size_t b3 = w3 + shape.outputs * shape.hidden2;

  double loss = 0.0;
  std::vector<double> grad(parameters.size(), 0.0);
  std::vector<double> h1(shape.hidden1);
  std::vector<double> h2(shape.hidden2);
  std::vector<double> logits(shape.outputs);
  std::vector<double> d2(shape.hidden2);
  std::vector<double> d1(shape.hidden1);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = features.rows[i];
    for (std::size_t a = 0; a < shape.hidden1; ++a) {
      double z = parameters[b1 + a];
      for (std::size_t j = 0; j < shape.inputs; ++j)
        z += parameters[w1 + a * shape.inputs + j] * x[j];
      h1[a] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t b = 0; b < shape.hidden2; ++b) {
      double z = parameters[b2 + b];
      for (std::size_t a = 0; a < shape.hidden1; ++a)
        z += parameters[w2 + b * shape.hidden1 + a] * h1[a];
      h2[b] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t k = 0; k < shape.outputs; ++k) {
      double z = parameters[b3 + k];
      for (std::size_t b = 0; b < shape.hidden2; ++b)
        z += parameters[w3 + k * shape.hidden2 + b] * h2[b];
      logits[k] = z;
    }
    const std::vector<double> p = softmax(logits);
    const auto y = static_cast<std::size_t>(labels[i]);
    loss += -std::log(std::max(p[y], 1e-300));

    // Backward pass; dlogits = p - onehot(y).
    std::fill(d2.begin(), d2.end(), 0.0);
    for (std::size_t k = 0; k < shape.outputs; ++k) {
      const double dk = p[k] - (k == y ? 1.0 : 0.0);
      grad[b3 + k] += dk;
      for (std::size_t b = 0; b < shape.hidden2; ++b) {
        grad[w3 + k * shape.hidden2 + b] += dk * h2[b];
        d2[b] += dk * parameters[w3 + k * shape.hidden2 + b];
      }
    }
    std::fill(d1.begin(), d1.end(), 0.0);
    for (std::size_t b = 0; b < shape.hidden2; ++b) {
      if (h2[b] <= 0.0) continue;  // ReLU gate
      grad[b2 + b] += d2[b];
      for (std::size_t a = 0; a < shape.hidden1; ++a) {
        grad[w2 + b * shape.hidden1 + a] += d2[b] * h1[a];
        d1[a] += d2[b] * parameters[w2 + b * shape.hidden1 + a];
      }
    }
    for (std::size_t a = 0; a < shape.hidden1; ++a) {
      if (h1[a] <= 0.0) continue;
      grad[b1 + a] += d1[a];
      for (std::size_t j = 0; j < shape.inputs; ++j)
        grad[w1 + a * shape.inputs + j] += d1[a] * x[j];
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  for (double& g : grad) g *= inv_n;
  return {loss, grad};
}

namespace {

std::vector<double> mlp_forward_proba(const MlpShape& shape,
                                      const std::vector<double>& parameters,
                                      const std::vector<double>& x) {
  const std::size_t w1 = 0;
  const std::size_t b1 = w1 + shape.hidden1 * shape.inputs;
  const std::size_t w2 = b1 + shape.hidden1;
  const std::size_t b2 = w2 + shape.hidden2 * shape.hidden1;
  const std::size_t w3 = b2 + shape.hidden2;
  const std::size_t b3 = w3 + shape.outputs * shape.hidden2;

  std::vector<double> h1(shape.hidden1);
  std::vector<double> h2(shape.hidden2);
  std::vector<double> logits(shape.outputs);
  for (std::size_t a = 0; a < shape.hidden1; ++a) {
    double z = parameters[b1 + a];
    for (std::size_t j = 0; j < shape.inputs; ++j)
      z += parameters[w1 + a * shape.inputs + j] * x[j];
    h1[a] = z > 0.0 ? z : 0.0;
  }
  for (std::size_t b = 0; b < shape.hidden2; ++b) {
    double z = parameters[b2 + b];
    for (std::size_t a = 0; a < shape.hidden1; ++a)
      z += parameters[w2 + b * shape.hidden1 + a] * h1[a];
    h2[b] = z > 0.0 ? z : 0.0;
  }
  for (std::size_t k = 0; k < shape.outputs; ++k) {
    double z = parameters[b3 + k];
    for (std::size_t b = 0; b < shape.hidden2; ++b)
      z += parameters[w3 + k * shape.hidden2 + b] * h2[b];
    logits[k] = z;
  }
  return softmax(std::move(logits));
}

MlpShape shape_for(std::size_t inputs, std::size_t outputs,
                   const TrainOptions& opt) {
  MlpShape shape;
  shape.inputs = inputs;
  shape.hidden1 = static_cast<std::size_t>(opt.nn_hidden1);
  shape.hidden2 = static_cast<std::size_t>(opt.nn_hidden2);
  shape.outputs = outputs;
  return shape;
}

MlpParams train_mlp(const Matrix& features, const std::vector<int>& labels,
                    std::size_t num_classes, const TrainOptions& opt) {
  const Standardizer standardizer = Standardizer::fit(features);
  const Matrix xs = standardizer.apply(features);
  const std::size_t n = xs.size();
  const MlpShape shape = shape_for(xs.rows.front().size(), num_classes, opt);

  std::mt19937_64 rng(opt.seed);

  // He-normal init, zero biases.
  std::vector<double> params(shape.parameter_count(), 0.0);
  const std::size_t w1 = 0;
  const std::size_t b1 = w1 + shape.hidden1 * shape.inputs;
  const std::size_t w2 = b1 + shape.hidden1;
  const std::size_t b2 = w2 + shape.hidden2 * shape.hidden1;
  const std::size_t w3 = b2 + shape.hidden2;
  const double s1 = std::sqrt(2.0 / static_cast<double>(shape.inputs));
  const double s2 = std::sqrt(2.0 / static_cast<double>(shape.hidden1));
  const double s3 = std::sqrt(2.0 / static_cast<double>(shape.hidden2));
  for (std::size_t i = w1; i < b1; ++i) params[i] = s1 * util::rand_normal(rng);
  for (std::size_t i = w2; i < b2; ++i) params[i] = s2 * util::rand_normal(rng);
  for (std::size_t i = w3; i < w3 + shape.outputs * shape.hidden2; ++i)
    params[i] = s3 * util::rand_normal(rng);

  // 10% validation slice for early stopping.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  util::shuffle_indices(rng, order);
  std::size_t val_n = static_cast<std::size_t>(
      std::llround(opt.nn_validation_fraction * static_cast<double>(n)));
  val_n = std::clamp<std::size_t>(val_n, 1, n - 1);

  Matrix x_fit, x_val;
  std::vector<int> y_fit, y_val;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n - val_n) {
      x_fit.rows.push_back(xs.rows[order[i]]);
      y_fit.push_back(labels[order[i]]);
    } else {
      x_val.rows.push_back(xs.rows[order[i]]);
      y_val.push_back(labels[order[i]]);
    }
  }
  // The fit slice can lose a class on tiny inputs; fall back to training on
  // everything with validation on everything.
  std::vector<bool> seen(num_classes, false);
  for (int y : y_fit) seen[static_cast<std::size_t>(y)] = true;
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    x_fit = xs;
    y_fit = labels;
    x_val = xs;
    y_val = labels;
  }

  std::vector<double> best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  for (int epoch = 0; epoch < opt.nn_max_epochs; ++epoch) {
    auto [loss, grad] = mlp_loss_and_gradient(shape, params, x_fit, y_fit);
    (void)loss;
    for (std::size_t j = 0; j < params.size(); ++j)
      params[j] -= opt.nn_learning_rate * grad[j];

    double val_loss = 0.0;
    for (std::size_t i = 0; i < x_val.size(); ++i) {
      const auto p = mlp_forward_proba(shape, params, x_val.rows[i]);
      val_loss += -std::log(
          std::max(p[static_cast<std::size_t>(y_val[i])], 1e-300));
    }
    val_loss /= static_cast<double>(x_val.size());

    if (val_loss < best_val - 1e-9) {
      best_val = val_loss;
      best_params = params;
      stale_epochs = 0;
    } else if (++stale_epochs >= opt.nn_patience) {
      break;
    }
  }

  MlpParams out;
  out.parameters = std::move(best_params);
  out.feature_mean = standardizer.mean;
  out.feature_scale = standardizer.scale;
  return out;
}

// --- random forest ----------------------------------------------------------------

double gini_impurity(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct TreeBuilder {
  const Matrix& x;
  const std::vector<int>& y;
  std::size_t num_classes;
  std::size_t max_features;
  std::mt19937_64 rng;
  std::vector<TreeNode> nodes;

  int build(std::vector<std::size_t> indices) {
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t i : indices) ++counts[static_cast<std::size_t>(y[i])];
    const bool pure =
        std::count_if(counts.begin(), counts.end(),
                      [](std::size_t c) { return c > 0; }) <= 1;

    if (pure || indices.size() < 2) return make_leaf(counts, indices.size());

    const std::size_t f = x.rows.front().size();
    std::vector<std::size_t> feature_order(f);
    std::iota(feature_order.begin(), feature_order.end(), 0);
    util::shuffle_indices(rng, feature_order);

    const double parent_gini = gini_impurity(counts, indices.size());
    double best_gain = -1.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;

    // Examine features in random order, counting only non-constant ones
    // toward the sqrt budget.
    std::size_t informative_seen = 0;
    for (std::size_t feature : feature_order) {
      std::vector<std::pair<double, int>> values;
      values.reserve(indices.size());
      for (std::size_t i : indices)
        values.emplace_back(x.rows[i][feature], y[i]);
      std::sort(values.begin(), values.end());
      if (values.front().first == values.back().first) continue;
      ++informative_seen;

      std::vector<std::size_t> left_counts(num_classes, 0);
      std::size_t left_total = 0;
      for (std::size_t v = 0; v + 1 < values.size(); ++v) {
        ++left_counts[static_cast<std::size_t>(values[v].second)];
        ++left_total;
        if (values[v].first == values[v + 1].first) continue;

        std::vector<std::size_t> right_counts = counts;
        for (std::size_t c = 0; c < num_classes; ++c)
          right_counts[c] -= left_counts[c];
        const std::size_t right_total = indices.size() - left_total;
        const double weighted =
            (static_cast<double>(left_total) * gini_impurity(left_counts, left_total) +
             static_cast<double>(right_total) * gini_impurity(right_counts, right_total)) /
            static_cast<double>(indices.size());
        const double gain = parent_gini - weighted;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = feature;
          best_threshold = 0.5 * (values[v].first + values[v + 1].first);
        }
      }
      if (informative_seen >= max_features) break;
    }

    if (best_gain < 0.0) return make_leaf(counts, indices.size());

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : indices) {
      if (x.rows[i][best_feature] <= best_threshold)
        left_idx.push_back(i);
      else
        right_idx.push_back(i);
    }
    // Midpoint thresholds always separate distinct values, but guard anyway.
    if (left_idx.empty() || right_idx.empty())
      return make_leaf(counts, indices.size());

    const int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[static_cast<std::size_t>(node_id)].feature = static_cast<int>(best_feature);
    nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
    const int left = build(std::move(left_idx));
    const int right = build(std::move(right_idx));
    nodes[static_cast<std::size_t>(node_id)].left = left;
    nodes[static_cast<std::size_t>(node_id)].right = right;
    return node_id;
  }

  int make_leaf(const std::vector<std::size_t>& counts, std::size_t total) {
    TreeNode leaf;
    leaf.distribution.resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c)
      leaf.distribution[c] =
          static_cast<double>(counts[c]) / static_cast<double>(total);
    nodes.push_back(std::move(leaf));
    return static_cast<int>(nodes.size() - 1);
  }
};

ForestParams train_forest(const Matrix& features, const std::vector<int>& labels,
                          std::size_t num_classes, const TrainOptions& opt) {
  const std::size_t n = features.size();
  const std::size_t f = features.rows.front().size();
  const auto max_features = static_cast<std::size_t>(
      std::max(1.0, std::floor(std::sqrt(static_cast<double>(f)))));

  std::mt19937_64 seeder(opt.seed);
  ForestParams params;
  params.trees.reserve(static_cast<std::size_t>(opt.rf_trees));
  for (int t = 0; t < opt.rf_trees; ++t) {
    TreeBuilder builder{features, labels, num_classes, max_features,
                        std::mt19937_64(seeder()), {}};
    std::vector<std::size_t> bootstrap(n);
    for (std::size_t i = 0; i < n; ++i)
      bootstrap[i] = util::rand_index(builder.rng, n);
    builder.build(std::move(bootstrap));
    params.trees.push_back(std::move(builder.nodes));
  }
  return params;
}

std::vector<double> forest_proba(const ForestParams& params,
                                 const std::vector<double>& x,
                                 std::size_t num_classes) {
  std::vector<double> out(num_classes, 0.0);
  for (const auto& tree : params.trees) {
    // The root is the first interior node pushed, which is index 0 only for
    // non-trivial trees; a single-leaf tree stores the leaf at index 0.
    std::size_t node = 0;
    while (tree[node].feature >= 0) {
      node = static_cast<std::size_t>(
          x[static_cast<std::size_t>(tree[node].feature)] <= tree[node].threshold
              ? tree[node].left
              : tree[node].right);
    }
    for (std::size_t c = 0; c < num_classes; ++c)
      out[c] += tree[node].distribution[c];
  }
  for (double& v : out) v /= static_cast<double>(params.trees.size());
  return out;
}

}  // namespace

// --- train / predict dispatch --------------------------------------------------------

TrainedMetaModel train(MetaModelKind kind, const Matrix& features,
                       const std::vector<int>& labels,
                       const TrainOptions& options, std::size_t num_classes) {
  check_training_inputs(features, labels, num_classes);

  TrainedMetaModel model;
  model.kind_ = kind;
  model.num_classes_ = num_classes;
  model.num_features_ = features.rows.front().size();
  model.seed_ = options.seed;
  model.hyperparams_ = options;

  switch (kind) {
    case MetaModelKind::LogisticRegression:
      model.params_ = train_logreg(features, labels, num_classes, options);
      break;
    case MetaModelKind::RandomForest:
      model.params_ = train_forest(features, labels, num_classes, options);
      break;
    case MetaModelKind::NeuralNetwork:
      model.params_ = train_mlp(features, labels, num_classes, options);
      break;
    case MetaModelKind::Voting: {
      VotingParams params;
      params.learners.push_back(train(MetaModelKind::LogisticRegression,
                                      features, labels, options, num_classes));
      params.learners.push_back(train(MetaModelKind::RandomForest, features,
                                      labels, options, num_classes));
      params.learners.push_back(train(MetaModelKind::NeuralNetwork, features,
                                      labels, options, num_classes));
      model.params_ = std::move(params);
      break;
    }
  }
  return model;
}

std::vector<double> TrainedMetaModel::predict_proba(
    const std::vector<double>& features) const {
  if (features.size() != num_features_)
    throw DimensionMismatch("predict: expected " +
                            std::to_string(num_features_) + " features, got " +
                            std::to_string(features.size()));
  switch (kind_) {
    case MetaModelKind::LogisticRegression:
      return logreg_proba(std::get<LogRegParams>(params_), features,
                          num_classes_);
    case MetaModelKind::RandomForest:
      return forest_proba(std::get<ForestParams>(params_), features,
                          num_classes_);
    case MetaModelKind::NeuralNetwork: {
      const MlpParams& params = std::get<MlpParams>(params_);
      std::vector<double> x(features.size());
      for (std::size_t j = 0; j < features.size(); ++j)
        x[j] = (features[j] - params.feature_mean[j]) / params.feature_scale[j];
      return mlp_forward_proba(
          shape_for(num_features_, num_classes_, hyperparams_),
          params.parameters, x);
    }
    case MetaModelKind::Voting: {
      const VotingParams& params = std::get<VotingParams>(params_);
      std::vector<std::vector<double>> probs;
      probs.reserve(params.learners.size());
      for (const TrainedMetaModel& learner : params.learners)
        probs.push_back(learner.predict_proba(features));
      return soft_vote(probs).first;
    }
  }
  throw DimensionMismatch("predict: unreachable kind");
}

int TrainedMetaModel::predict(const std::vector<double>& features) const {
  return argmax_class(predict_proba(features));
}

// --- serialization -----------------------------------------------------------------------

std::string_view kind_name(MetaModelKind kind) {
  switch (kind) {
    case MetaModelKind::Voting: return "voting";
    case MetaModelKind::LogisticRegression: return "logistic_regression";
    case MetaModelKind::RandomForest: return "random_forest";
    case MetaModelKind::NeuralNetwork: return "neural_network";
  }
  return "voting";
}

MetaModelKind kind_from_name(std::string_view name) {
  for (MetaModelKind kind : kAllMetaKinds)
    if (kind_name(kind) == name) return kind;
  throw SchemaMismatch("unknown meta-model kind '" + std::string(name) + "'");
}

struct ModelCodec {
  static json options_to_json(const TrainOptions& o) {
    return {{"seed", o.seed},
            {"lr_learning_rate", o.lr_learning_rate},
            {"lr_l2", o.lr_l2},
            {"lr_gradient_tol", o.lr_gradient_tol},
            {"lr_max_iters", o.lr_max_iters},
            {"rf_trees", o.rf_trees},
            {"nn_hidden1", o.nn_hidden1},
            {"nn_hidden2", o.nn_hidden2},
            {"nn_learning_rate", o.nn_learning_rate},
            {"nn_max_epochs", o.nn_max_epochs},
            {"nn_patience", o.nn_patience},
            {"nn_validation_fraction", o.nn_validation_fraction}};
  }

  static TrainOptions options_from_json(const json& j) {
    TrainOptions o;
    o.seed = j.at("seed").get<std::uint64_t>();
    o.lr_learning_rate = j.at("lr_learning_rate").get<double>();
    o.lr_l2 = j.at("lr_l2").get<double>();
    o.lr_gradient_tol = j.at("lr_gradient_tol").get<double>();
    o.lr_max_iters = j.at("lr_max_iters").get<int>();
    o.rf_trees = j.at("rf_trees").get<int>();
    o.nn_hidden1 = j.at("nn_hidden1").get<int>();
    o.nn_hidden2 = j.at("nn_hidden2").get<int>();
    o.nn_learning_rate = j.at("nn_learning_rate").get<double>();
    o.nn_max_epochs = j.at("nn_max_epochs").get<int>();
    o.nn_patience = j.at("nn_patience").get<int>();
    o.nn_validation_fraction = j.at("nn_validation_fraction").get<double>();
    return o;
  }

  static json to_json(const TrainedMetaModel& m) {
    json out = {{"version", 1},
                {"kind", std::string(kind_name(m.kind_))},
                {"num_classes", m.num_classes_},
                {"num_features", m.num_features_},
                {"seed", m.seed_},
                {"hyperparams", options_to_json(m.hyperparams_)}};
    if (const auto* lr = std::get_if<LogRegParams>(&m.params_)) {
      out["params"] = {{"weights", lr->weights},
                       {"feature_mean", lr->feature_mean},
                       {"feature_scale", lr->feature_scale}};
    } else if (const auto* rf = std::get_if<ForestParams>(&m.params_)) {
      json trees = json::array();
      for (const auto& tree : rf->trees) {
        json nodes = json::array();
        for (const TreeNode& node : tree)
          nodes.push_back({{"f", node.feature},
                           {"t", node.threshold},
                           {"l", node.left},
                           {"r", node.right},
                           {"d", node.distribution}});
        trees.push_back(std::move(nodes));
      }
      out["params"] = {{"trees", std::move(trees)}};
    } else if (const auto* nn = std::get_if<MlpParams>(&m.params_)) {
      out["params"] = {{"parameters", nn->parameters},
                       {"feature_mean", nn->feature_mean},
                       {"feature_scale", nn->feature_scale}};
    } else if (const auto* vote = std::get_if<VotingParams>(&m.params_)) {
      json learners = json::array();
      for (const TrainedMetaModel& learner : vote->learners)
        learners.push_back(to_json(learner));
      out["params"] = {{"learners", std::move(learners)}};
    }
    return out;
  }

  static TrainedMetaModel from_json(const json& j) {
    if (!j.is_object() || j.value("version", 0) != 1)
      throw SchemaMismatch("model file: unsupported version");
    TrainedMetaModel m;
    m.kind_ = kind_from_name(j.at("kind").get<std::string>());
    m.num_classes_ = j.at("num_classes").get<std::size_t>();
    m.num_features_ = j.at("num_features").get<std::size_t>();
    m.seed_ = j.at("seed").get<std::uint64_t>();
    m.hyperparams_ = options_from_json(j.at("hyperparams"));
    const json& params = j.at("params");
    switch (m.kind_) {
      case MetaModelKind::LogisticRegression: {
        LogRegParams lr;
        lr.weights = params.at("weights").get<std::vector<double>>();
        lr.feature_mean = params.at("feature_mean").get<std::vector<double>>();
        lr.feature_scale = params.at("feature_scale").get<std::vector<double>>();
        m.params_ = std::move(lr);
        break;
      }
      case MetaModelKind::RandomForest: {
        ForestParams rf;
        for (const json& tree : params.at("trees")) {
          std::vector<TreeNode> nodes;
          for (const json& n : tree) {
            TreeNode node;
            node.feature = n.at("f").get<int>();
            node.threshold = n.at("t").get<double>();
            node.left = n.at("l").get<int>();
            node.right = n.at("r").get<int>();
            node.distribution = n.at("d").get<std::vector<double>>();
            nodes.push_back(std::move(node));
          }
          rf.trees.push_back(std::move(nodes));
        }
        m.params_ = std::move(rf);
        break;
      }
      case MetaModelKind::NeuralNetwork: {
        MlpParams nn;
        nn.parameters = params.at("parameters").get<std::vector<double>>();
        nn.feature_mean = params.at("feature_mean").get<std::vector<double>>();
        nn.feature_scale = params.at("feature_scale").get<std::vector<double>>();
        m.params_ = std::move(nn);
        break;
      }
      case MetaModelKind::Voting: {
        VotingParams vote;
        for (const json& learner : params.at("learners"))
          vote.learners.push_back(from_json(learner));
        m.params_ = std::move(vote);
        break;
      }
    }
    return m;
  }
};

std::string TrainedMetaModel::serialize() const {
  return ModelCodec::to_json(*this).dump();
}

TrainedMetaModel TrainedMetaModel::deserialize(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw SchemaMismatch("model file: not valid JSON");
  return ModelCodec::from_json(doc);
}

// --- end-to-end per-metric run ------------------------------------------------------------

MetaRunResult run_meta(const std::vector<ingest::CveEntry>& dataset,
                       const gateway::PredictionTable& predictions,
                       cvss::MetricKind kind, std::uint64_t seed,
                       const TrainOptions& options) {
  if (dataset.empty()) throw EmptyInput("run_meta: empty dataset");

  const std::vector<std::string> models = predictions.model_ids();
  if (models.empty()) throw EmptyInput("run_meta: no model predictions");
  const std::size_t m = models.size();

  std::map<std::pair<std::string, std::string>, const gateway::PredictionSet*>
      lookup;
  for (const gateway::PredictionSet& ps : predictions.rows) {
    if (!lookup.emplace(std::make_pair(ps.cve_id, ps.model_id), &ps).second)
      throw CoverageMismatch("duplicate prediction for " + ps.cve_id + " / " +
                             ps.model_id);
  }

  Matrix features;
  std::vector<int> truth_codes;
  std::map<std::string, std::vector<cvss::MetricValue>> raw_labels;
  features.rows.reserve(dataset.size());
  truth_codes.reserve(dataset.size());

  for (const ingest::CveEntry& entry : dataset) {
    std::vector<cvss::MetricValue> labels;
    labels.reserve(m);
    for (const std::string& model : models) {
      auto it = lookup.find({entry.cve_id, model});
      if (it == lookup.end())
        throw CoverageMismatch("model " + model + " lacks prediction for " +
                               entry.cve_id);
      const cvss::MetricValue v =
          it->second->labels[static_cast<std::size_t>(kind)];
      labels.push_back(v);
      raw_labels[model].push_back(v);
    }
    features.rows.push_back(encode(labels, kind, m).flat());
    truth_codes.push_back(cvss::class_code(kind, entry.truth.get(kind)));
  }

  const std::size_t num_classes = cvss::valid_values(kind).size();

  MetaRunResult result;
  result.metric = kind;

  const SplitResult split = stratified_split(truth_codes, 0.8, seed);

  std::vector<int> y_train;
  Matrix x_train;
  for (std::size_t i : split.train) {
    y_train.push_back(truth_codes[i]);
    x_train.rows.push_back(features.rows[i]);
  }

  const FoldResult folds = stratified_kfold(y_train, 5, seed + 1);

  double best_f1 = -1.0;
  for (MetaModelKind meta_kind : kAllMetaKinds) {
    CvResult cv;
    cv.kind = meta_kind;
    for (std::size_t f = 0; f < folds.folds.size(); ++f) {
      Matrix x_fit;
      std::vector<int> y_fit;
      for (std::size_t g = 0; g < folds.folds.size(); ++g) {
        if (g == f) continue;
        for (std::size_t i : folds.folds[g]) {
          x_fit.rows.push_back(x_train.rows[i]);
          y_fit.push_back(y_train[i]);
        }
      }
      TrainOptions fold_options = options;
      fold_options.seed = seed + 100 + f;
      const TrainedMetaModel model =
          train(meta_kind, x_fit, y_fit, fold_options, num_classes);

      std::vector<int> truth_fold, pred_fold;
      for (std::size_t i : folds.folds[f]) {
        truth_fold.push_back(y_train[i]);
        pred_fold.push_back(model.predict(x_train.rows[i]));
      }
      const eval::ConfusionMatrix cm =
          eval::confusion_from_codes(truth_fold, pred_fold, num_classes);
      cv.fold_accuracy.push_back(eval::accuracy(cm));
      cv.fold_f1.push_back(eval::weighted_f1(cm));
    }
    cv.mean_accuracy =
        std::accumulate(cv.fold_accuracy.begin(), cv.fold_accuracy.end(), 0.0) /
        static_cast<double>(cv.fold_accuracy.size());
    cv.mean_f1 = std::accumulate(cv.fold_f1.begin(), cv.fold_f1.end(), 0.0) /
                 static_cast<double>(cv.fold_f1.size());
    if (cv.mean_f1 > best_f1) {
      best_f1 = cv.mean_f1;
      result.selected_kind = meta_kind;
    }
    result.cv.push_back(std::move(cv));
  }
  for (CvResult& cv : result.cv) cv.selected = cv.kind == result.selected_kind;

  TrainOptions refit_options = options;
  refit_options.seed = seed;
  const TrainedMetaModel winner =
      train(result.selected_kind, x_train, y_train, refit_options, num_classes);
  result.serialized_model = winner.serialize();

  std::size_t meta_correct = 0;
  for (std::size_t i : split.test)
    if (winner.predict(features.rows[i]) == truth_codes[i]) ++meta_correct;
  result.meta_test_accuracy =
      static_cast<double>(meta_correct) / static_cast<double>(split.test.size());

  for (const std::string& model : models) {
    const std::vector<cvss::MetricValue>& labels = raw_labels[model];
    std::size_t correct = 0;
    for (std::size_t i : split.test) {
      const cvss::MetricValue truth_value =
          cvss::value_from_class_code(kind, truth_codes[i]);
      if (labels[i] == truth_value) ++correct;  // UNKNOWN never matches
    }
    result.model_test_accuracy[model] =
        static_cast<double>(correct) / static_cast<double>(split.test.size());
  }

  const int majority = eval::majority_class_code(y_train);
  std::size_t baseline_correct = 0;
  for (std::size_t i : split.test)
    if (truth_codes[i] == majority) ++baseline_correct;
  result.baseline_test_accuracy = static_cast<double>(baseline_correct) /
                                  static_cast<double>(split.test.size());

  result.best_individual_accuracy = 0.0;
  for (const auto& [model, acc] : result.model_test_accuracy)
    result.best_individual_accuracy =
        std::max(result.best_individual_accuracy, acc);
  result.change = result.meta_test_accuracy - result.best_individual_accuracy;
  return result;
}

}  // namespace cvsslab::meta
