#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "cvsslab/errors.hpp"
#include "cvsslab/eval_metrics.hpp"
#include "cvsslab/util.hpp"
#include "support/brute_metrics.hpp"

using namespace cvsslab;
using cvss::MetricKind;
using cvss::MetricValue;
using eval::Labels;

namespace {
const MetricValue H = MetricValue::H;
const MetricValue L = MetricValue::L;
const MetricValue N = MetricValue::N;
const MetricValue P = MetricValue::P;
const MetricValue UNK = MetricValue::Unknown;
}  // namespace

TEST_CASE("confusion matrix basics") {
  const auto cm = eval::confusion_matrix({H, L}, {H, L}, MetricKind::C);
  CHECK(cm.at(0, 0) == 1);  // H is class 0 for C
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.total() == 2);

  const auto unk = eval::confusion_matrix({H}, {UNK}, MetricKind::C);
  CHECK(unk.unknown_count(0) == 1);

  const auto grid = eval::confusion_matrix({H, H, L}, {L, H, L}, MetricKind::C);
  CHECK(grid.at(0, 1) == 1);
  CHECK(grid.at(0, 0) == 1);
  CHECK(grid.at(1, 1) == 1);

  CHECK_THROWS_AS(eval::confusion_matrix({H}, {H, L}, MetricKind::C),
                  LengthMismatch);
  CHECK_THROWS_AS(eval::confusion_matrix({}, {}, MetricKind::C), EmptyInput);
  CHECK_THROWS_AS(eval::confusion_matrix({UNK}, {H}, MetricKind::C),
                  UnknownValue);
}

TEST_CASE("accuracy") {
  CHECK(eval::accuracy(eval::confusion_matrix({H, L}, {H, L}, MetricKind::C)) ==
        doctest::Approx(1.0));
  CHECK(eval::accuracy(eval::confusion_matrix({H, L}, {UNK, UNK},
                                              MetricKind::C)) ==
        doctest::Approx(0.0));
  CHECK(eval::accuracy(eval::confusion_matrix({H, H, L, L}, {H, L, L, L},
                                              MetricKind::C)) ==
        doctest::Approx(0.75));
}

TEST_CASE("weighted precision recall f1 hand fixture") {
  // truth [H,H,L,L], pred [H,L,L,L]: P_H=1, P_L=2/3, R_H=.5, R_L=1,
  // F1_H=2/3, F1_L=.8, supports 2/2.
  const auto cm =
      eval::confusion_matrix({H, H, L, L}, {H, L, L, L}, MetricKind::C);
  CHECK(std::fabs(eval::weighted_precision(cm) - 0.8333) < 1e-4);
  CHECK(eval::weighted_recall(cm) == doctest::Approx(0.75));
  CHECK(std::fabs(eval::weighted_f1(cm) - 0.7333) < 1e-4);

  const auto scores = eval::per_class_scores(cm);
  CHECK(scores.precision[0] == doctest::Approx(1.0));
  CHECK(scores.precision[1] == doctest::Approx(2.0 / 3.0));
  CHECK(scores.recall[0] == doctest::Approx(0.5));
  CHECK(scores.f1[1] == doctest::Approx(0.8));
  CHECK(scores.support == std::vector<long long>{2, 2, 0});
}

TEST_CASE("zero denominator classes score zero but keep weight") {
  const auto cm = eval::confusion_matrix({H, H, N}, {H, L, H}, MetricKind::C);
  const auto scores = eval::per_class_scores(cm);
  CHECK(scores.support[1] == 0);  // L has no true instances
  CHECK(scores.recall[2] == 0.0);  // N never predicted
  CHECK(eval::weighted_precision(cm) >= 0.0);
}

TEST_CASE("ordinal mae") {
  CHECK(eval::ordinal_mae({N, N}, {N, N}, MetricKind::AV) == doctest::Approx(0.0));
  CHECK(eval::ordinal_mae({N, N}, {P, N}, MetricKind::AV) == doctest::Approx(1.5));
  CHECK(eval::ordinal_mae({N}, {UNK}, MetricKind::AV) == doctest::Approx(3.0));
  CHECK_THROWS_AS(eval::ordinal_mae({N}, {N, N}, MetricKind::AV),
                  LengthMismatch);
}

TEST_CASE("majority baseline") {
  CHECK(eval::majority_baseline({H, H, L}, MetricKind::C) ==
        doctest::Approx(2.0 / 3.0));
  CHECK(eval::majority_baseline({H, H, H}, MetricKind::C) == doctest::Approx(1.0));
  // Tie between H and L breaks toward the earlier canonical value (H).
  CHECK(eval::majority_baseline({H, L, H, L}, MetricKind::C) ==
        doctest::Approx(0.5));
  CHECK(eval::majority_class_code({0, 1, 1, 0}) == 0);
  CHECK_THROWS_AS(eval::majority_baseline({}, MetricKind::C), EmptyInput);
}

TEST_CASE("imbalance ratio") {
  Labels labels;
  labels.insert(labels.end(), 519, L);
  labels.insert(labels.end(), 100, H);
  CHECK(eval::imbalance_ratio(labels, MetricKind::AC) == doctest::Approx(5.19));
  CHECK(eval::imbalance_ratio({H, L, H, L}, MetricKind::C) == doctest::Approx(1.0));
  CHECK_THROWS_AS(eval::imbalance_ratio({H, H}, MetricKind::C), SingleClass);
}

TEST_CASE("cramers v") {
  // Perfectly dependent 2x2 (10,0;0,10).
  std::vector<int> a, b;
  for (int i = 0; i < 10; ++i) { a.push_back(0); b.push_back(0); }
  for (int i = 0; i < 10; ++i) { a.push_back(1); b.push_back(1); }
  CHECK(eval::cramers_v_codes(a, b) == doctest::Approx(1.0));

  // Independent uniform labels: every cell matches its expectation.
  std::vector<int> u, v;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int rep = 0; rep < 5; ++rep) { u.push_back(x); v.push_back(y); }
  CHECK(eval::cramers_v_codes(u, v) == doctest::Approx(0.0));

  // 2x3 table (4,0,0;0,2,2): chi2 = 8, n = 8, min(r,c)-1 = 1 -> V = 1.
  std::vector<int> p = {0, 0, 0, 0, 1, 1, 1, 1};
  std::vector<int> q = {0, 0, 0, 0, 1, 1, 2, 2};
  CHECK(eval::cramers_v_codes(p, q) == doctest::Approx(1.0));

  CHECK_THROWS_AS(eval::cramers_v_codes({0, 1}, {0, 1, 1}), LengthMismatch);
  CHECK_THROWS_AS(eval::cramers_v_codes({0, 0, 0}, {0, 1, 1}), DegenerateTable);
}

TEST_CASE("cramers v of a variable with itself is 1") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a;
    const std::size_t n = 2 + util::rand_index(rng, 30);
    for (std::size_t i = 0; i < n; ++i)
      a.push_back(static_cast<int>(util::rand_index(rng, 3)));
    bool two_classes = false;
    for (int x : a)
      if (x != a.front()) two_classes = true;
    if (!two_classes) continue;
    CHECK(eval::cramers_v_codes(a, a) == doctest::Approx(1.0));
  }
}

TEST_CASE("misclassification overlap") {
  const Labels truth = {H, H, L, N};
  std::map<std::string, Labels> models;
  models["m1"] = {H, H, L, L};  // wrong on last
  models["m2"] = {H, H, L, H};  // wrong on last
  const auto report =
      eval::misclassification_overlap(truth, models, MetricKind::C);
  CHECK(report.fraction_by_k[0] == doctest::Approx(0.75));
  CHECK(report.fraction_by_k[1] == doctest::Approx(0.0));
  CHECK(report.fraction_by_k[2] == doctest::Approx(0.25));
  CHECK(report.all_models_fraction() == doctest::Approx(0.25));

  double sum = 0.0;
  for (double f : report.fraction_by_k) sum += f;
  CHECK(sum == doctest::Approx(1.0));

  // Identical outputs concentrate mass at k in {0, M}.
  std::map<std::string, Labels> twins;
  twins["a"] = {H, L, L, N};
  twins["b"] = {H, L, L, N};
  const auto dup = eval::misclassification_overlap(truth, twins, MetricKind::C);
  CHECK(dup.fraction_by_k[1] == doctest::Approx(0.0));

  std::map<std::string, Labels> short_model;
  short_model["a"] = {H, L};
  CHECK_THROWS_AS(
      eval::misclassification_overlap(truth, short_model, MetricKind::C),
      CoverageMismatch);
}

TEST_CASE("all-M overlap never exceeds any model error rate") {
  std::mt19937_64 rng(5);
  const auto values = cvss::valid_values(MetricKind::C);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + util::rand_index(rng, 20);
    Labels truth;
    for (std::size_t i = 0; i < n; ++i)
      truth.push_back(values[util::rand_index(rng, values.size())]);
    std::map<std::string, Labels> models;
    for (int m = 0; m < 3; ++m) {
      Labels pred;
      for (std::size_t i = 0; i < n; ++i)
        pred.push_back(values[util::rand_index(rng, values.size())]);
      models["m" + std::to_string(m)] = std::move(pred);
    }
    const auto report =
        eval::misclassification_overlap(truth, models, MetricKind::C);
    double sum = 0.0;
    for (double f : report.fraction_by_k) sum += f;
    CHECK(sum == doctest::Approx(1.0));
    for (const auto& [name, pred] : models) {
      double errors = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (pred[i] != truth[i]) ++errors;
      CHECK(report.all_models_fraction() <=
            errors / static_cast<double>(n) + 1e-12);
    }
  }
}

TEST_CASE("association matrix properties") {
  std::vector<cvss::BaseVector> truths;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) {
    cvss::BaseVector v;
    for (MetricKind kind : cvss::kAllMetrics) {
      const auto values = cvss::valid_values(kind);
      v.set(kind, values[util::rand_index(rng, values.size())]);
    }
    truths.push_back(v);
  }
  const auto assoc = eval::association_matrix(truths);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(assoc.v[i][i] == doctest::Approx(1.0));
    for (std::size_t j = 0; j < 8; ++j) {
      CHECK(assoc.v[i][j] == doctest::Approx(assoc.v[j][i]));
      CHECK(assoc.v[i][j] >= 0.0);
      CHECK(assoc.v[i][j] <= 1.0);
    }
  }
}

TEST_CASE("full metric report bundles consistently") {
  const Labels truth = {H, H, L, L, N, N, H, L};
  const Labels pred = {H, L, L, L, N, H, UNK, L};
  const auto report = eval::evaluate(truth, pred, MetricKind::C);
  CHECK(report.accuracy >= 0.0);
  CHECK(report.accuracy <= 1.0);
  CHECK(report.weighted_f1 <= 1.0);
  CHECK(report.mae <= cvss::max_ordinal_distance(MetricKind::C));
  // Per-class F1 is the harmonic mean of its own P and R.
  for (std::size_t c = 0; c < report.per_class.f1.size(); ++c) {
    const double p = report.per_class.precision[c];
    const double r = report.per_class.recall[c];
    const double expected = (p + r) == 0.0 ? 0.0 : 2 * p * r / (p + r);
    CHECK(report.per_class.f1[c] == doctest::Approx(expected));
  }
}

TEST_CASE("mae zero iff accuracy one on UNKNOWN-free inputs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto values = cvss::valid_values(MetricKind::A);
    Labels truth, pred;
    const std::size_t n = 1 + util::rand_index(rng, 10);
    for (std::size_t i = 0; i < n; ++i) {
      truth.push_back(values[util::rand_index(rng, values.size())]);
      pred.push_back(values[util::rand_index(rng, values.size())]);
    }
    const double mae = eval::ordinal_mae(truth, pred, MetricKind::A);
    const double acc = eval::accuracy(
        eval::confusion_matrix(truth, pred, MetricKind::A));
    CHECK((mae == 0.0) == (acc == 1.0));
  }
}

TEST_CASE("constant majority predictions achieve exactly the baseline") {
  std::mt19937_64 rng(23);
  for (MetricKind kind : cvss::kAllMetrics) {
    const auto values = cvss::valid_values(kind);
    Labels truth;
    for (int i = 0; i < 100; ++i)
      truth.push_back(values[util::rand_index(rng, values.size())]);
    std::vector<int> codes;
    for (MetricValue v : truth) codes.push_back(cvss::class_code(kind, v));
    const MetricValue majority =
        cvss::value_from_class_code(kind, eval::majority_class_code(codes));
    const Labels constant(truth.size(), majority);
    const double acc =
        eval::accuracy(eval::confusion_matrix(truth, constant, kind));
    CHECK(acc == doctest::Approx(eval::majority_baseline(truth, kind)));
  }
}

TEST_CASE("oracle equivalence on random small instances") {
  std::mt19937_64 rng(99);
  int cramers_checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + util::rand_index(rng, 12);
    const int num_classes = 2 + static_cast<int>(util::rand_index(rng, 2));
    std::vector<int> truth, pred;
    for (std::size_t i = 0; i < n; ++i) {
      truth.push_back(static_cast<int>(util::rand_index(
          rng, static_cast<std::size_t>(num_classes))));
      // ~12% unknown predictions.
      if (util::rand_index(rng, 8) == 0)
        pred.push_back(-1);
      else
        pred.push_back(static_cast<int>(util::rand_index(
            rng, static_cast<std::size_t>(num_classes))));
    }

    const auto cm = eval::confusion_from_codes(
        truth, pred, static_cast<std::size_t>(num_classes));
    CHECK(std::fabs(eval::accuracy(cm) - brute::accuracy(truth, pred)) < 1e-9);
    const auto w = brute::weighted_prf(truth, pred, num_classes);
    CHECK(std::fabs(eval::weighted_precision(cm) - w.precision) < 1e-9);
    CHECK(std::fabs(eval::weighted_recall(cm) - w.recall) < 1e-9);
    CHECK(std::fabs(eval::weighted_f1(cm) - w.f1) < 1e-9);

    CHECK(std::fabs(eval::majority_baseline_codes(truth) -
                    brute::majority_baseline(truth)) < 1e-9);

    std::set<int> distinct(truth.begin(), truth.end());
    if (distinct.size() >= 2) {
      CHECK(std::fabs(eval::imbalance_ratio_codes(truth) -
                      brute::imbalance_ratio(truth)) < 1e-9);
      std::vector<int> other;
      for (std::size_t i = 0; i < n; ++i)
        other.push_back(static_cast<int>(util::rand_index(rng, 2)));
      std::set<int> distinct_other(other.begin(), other.end());
      if (distinct_other.size() >= 2) {
        CHECK(std::fabs(eval::cramers_v_codes(truth, other) -
                        brute::cramers_v(truth, other)) < 1e-9);
        ++cramers_checked;
      }
    }
  }
  CHECK(cramers_checked > 100);
}
