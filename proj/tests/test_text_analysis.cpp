#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cvsslab/errors.hpp"
#include "cvsslab/text_analysis.hpp"
#include "cvsslab/util.hpp"
#include "support/brute_metrics.hpp"

using namespace cvsslab;

namespace {

std::vector<ingest::CveEntry> dataset_from(
    const std::vector<std::string>& descriptions) {
  std::vector<ingest::CveEntry> out;
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    ingest::CveEntry e;
    e.cve_id = "CVE-2021-" + std::to_string(10000 + i);
    e.description = descriptions[i];
    e.truth = cvss::parse_vector_string(
        "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H");
    e.published_year = 2021;
    out.push_back(std::move(e));
  }
  return out;
}

gateway::PredictionSet prediction_for(const ingest::CveEntry& e,
                                      const std::string& model,
                                      int correct_metrics) {
  gateway::PredictionSet ps = gateway::PredictionSet::all_unknown(e.cve_id, model);
  for (std::size_t k = 0; k < cvss::kNumMetrics; ++k) {
    const auto kind = static_cast<cvss::MetricKind>(k);
    if (static_cast<int>(k) < correct_metrics) {
      ps.labels[k] = e.truth.get(kind);
    } else {
      // Deterministically wrong: pick the next canonical value.
      const auto values = cvss::valid_values(kind);
      const int truth_code = cvss::class_code(kind, e.truth.get(kind));
      ps.labels[k] = values[(truth_code + 1) % values.size()];
    }
  }
  ps.valid = ps.compute_valid();
  return ps;
}

}  // namespace

TEST_CASE("length stats fixture endpoints") {
  const std::vector<std::string> descriptions = {
      std::string(28, 'a'), std::string(271, 'b'), std::string(3810, 'c')};
  const auto stats = text::length_stats(descriptions);
  CHECK(stats.min_chars == doctest::Approx(28));
  CHECK(stats.median_chars == doctest::Approx(271));
  CHECK(stats.max_chars == doctest::Approx(3810));
  CHECK(stats.mean_chars == doctest::Approx((28.0 + 271.0 + 3810.0) / 3.0));
}

TEST_CASE("length stats singleton and even median") {
  const auto one = text::length_stats(std::vector<std::string>{"abcd"});
  CHECK(one.mean_chars == doctest::Approx(4));
  CHECK(one.median_chars == doctest::Approx(4));
  CHECK(one.min_chars == doctest::Approx(4));
  CHECK(one.max_chars == doctest::Approx(4));

  const auto even = text::length_stats(
      std::vector<std::string>{"aa", "bbbb", "cccccc", "dddddddd"});
  CHECK(even.median_chars == doctest::Approx(5.0));  // (4+6)/2

  CHECK_THROWS_AS(text::length_stats(std::vector<std::string>{}), EmptyInput);
}

TEST_CASE("length histogram partitions the dataset") {
  std::vector<std::string> descriptions;
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const std::size_t words = util::rand_index(rng, 120);
    std::string d;
    for (std::size_t w = 0; w < words; ++w) d += "word ";
    descriptions.push_back(d);
  }
  const auto stats = text::length_stats(descriptions);
  long long total = 0;
  for (const auto& bucket : stats.histogram) {
    CHECK(bucket.start % 20 == 0);
    total += bucket.count;
  }
  CHECK(total == 200);
}

TEST_CASE("entity counting heuristic") {
  CHECK(text::count_entities("A flaw in Apache Tomcat allows remote attackers "
                             "to bypass authentication.") == 1);
  CHECK(text::count_entities("") == 0);
  CHECK(text::count_entities("the quick brown fox") == 0);
  // Two separate runs.
  CHECK(text::count_entities("A bug in Cisco IOS lets users of Mozilla "
                             "Firefox crash the device.") == 2);
  // Sentence-initial capital does not count; the run may start after it.
  CHECK(text::count_entities("Apache Tomcat is vulnerable.") == 1);
  // Mixed alphanumerics count (versioned products).
  CHECK(text::count_entities("An overflow in log4j allows code execution.") ==
        1);
}

TEST_CASE("information content") {
  const auto model = text::IcModel::build(std::vector<std::string>{"a b"});
  // Two equiprobable tokens: each -log2(0.5) = 1.
  CHECK(text::information_content("a b", model) == doctest::Approx(1.0));

  const auto certain = text::IcModel::build(std::vector<std::string>{"a a a"});
  CHECK(text::information_content("a", certain) == doctest::Approx(0.0));

  const auto skewed = text::IcModel::build(std::vector<std::string>{"a a b"});
  // mean(-log2(2/3), -log2(2/3), -log2(1/3)) = 0.9183
  CHECK(std::fabs(text::information_content("a a b", skewed) - 0.9183) < 1e-3);

  // Unseen token gets the add-one floor 1/(total+vocab).
  const double unseen = text::information_content("zzz", skewed);
  CHECK(unseen == doctest::Approx(-std::log2(1.0 / 5.0)));

  CHECK_THROWS_AS(text::information_content("!!!", skewed), EmptyText);
  CHECK(text::information_content("a", skewed) >= 0.0);
}

TEST_CASE("ic decreases when token probability rises") {
  const auto rare = text::IcModel::build(std::vector<std::string>{"x y y y"});
  const auto common = text::IcModel::build(std::vector<std::string>{"x x x y"});
  CHECK(text::information_content("x", common) <
        text::information_content("x", rare));
}

TEST_CASE("pearson on exact fixtures") {
  const std::vector<double> x = {1, 2, 3, 4};
  {
    std::vector<double> y;
    for (double v : x) y.push_back(2 * v + 1);
    CHECK(text::pearson(x, y).r == doctest::Approx(1.0));
  }
  {
    std::vector<double> y;
    for (double v : x) y.push_back(-v);
    CHECK(text::pearson(x, y).r == doctest::Approx(-1.0));
  }
  {
    const std::vector<double> y = {1, 3, 2, 4};
    const auto result = text::pearson(x, y);
    CHECK(std::fabs(result.r - 0.8) < 1e-9);
    // Closed form for df=2: p = 1 - t/sqrt(t^2+2) evaluates to exactly 0.2.
    CHECK(std::fabs(result.p_value - 0.2) < 1e-6);
    CHECK(result.p_band() == "0.2000");
  }

  CHECK_THROWS_AS(text::pearson(std::vector<double>{1, 2},
                                std::vector<double>{1, 2}),
                  LengthMismatch);
  CHECK_THROWS_AS(text::pearson(std::vector<double>{1, 1, 1},
                                std::vector<double>{1, 2, 3}),
                  ZeroVariance);
}

TEST_CASE("pearson p-value via the t distribution") {
  // df = 1: two-sided p = 1 - (2/pi) atan(t).
  const std::vector<double> x = {0, 1, 2};
  const std::vector<double> y = {0.1, 0.9, 2.3};
  const auto result = text::pearson(x, y);
  const double t = std::fabs(result.r) *
                   std::sqrt(1.0 / (1.0 - result.r * result.r));
  const double expected = 1.0 - (2.0 / M_PI) * std::atan(t);
  CHECK(std::fabs(result.p_value - expected) < 1e-6);
}

TEST_CASE("incomplete beta sanity") {
  CHECK(text::incomplete_beta(0.5, 0.5, 0.0) == doctest::Approx(0.0));
  CHECK(text::incomplete_beta(0.5, 0.5, 1.0) == doctest::Approx(1.0));
  // I_x(1,1) = x.
  CHECK(text::incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37));
  // Symmetry: I_x(a,b) = 1 - I_{1-x}(b,a).
  CHECK(text::incomplete_beta(2.5, 0.5, 0.3) ==
        doctest::Approx(1.0 - text::incomplete_beta(0.5, 2.5, 0.7)));
}

TEST_CASE("pearson invariances") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> x, y;
    const std::size_t n = 3 + util::rand_index(rng, 20);
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(util::rand_unit(rng) * 10);
      y.push_back(util::rand_unit(rng) * 10);
    }
    double r0;
    try {
      r0 = text::pearson(x, y).r;
    } catch (const ZeroVariance&) {
      continue;
    }
    // Symmetry.
    CHECK(text::pearson(y, x).r == doctest::Approx(r0));
    // Scale and translation: r(ax+b, y) = sign(a) r(x, y).
    std::vector<double> ax;
    for (double v : x) ax.push_back(3.5 * v + 7.0);
    CHECK(text::pearson(ax, y).r == doctest::Approx(r0));
    std::vector<double> nx;
    for (double v : x) nx.push_back(-2.0 * v + 1.0);
    CHECK(text::pearson(nx, y).r == doctest::Approx(-r0));
    // Agreement with the definitional oracle.
    CHECK(text::pearson(x, y).r == doctest::Approx(brute::pearson_r(x, y)));
  }
}

TEST_CASE("correctness correlates against length") {
  // Correctness is seeded to rise with description length.
  std::vector<std::string> descriptions;
  for (int i = 0; i < 40; ++i)
    descriptions.push_back(std::string(static_cast<std::size_t>(10 + i * 7), 'x'));
  auto dataset = dataset_from(descriptions);

  gateway::PredictionTable predictions;
  for (int i = 0; i < 40; ++i) {
    const int correct = i / 5;  // 0..8, monotone in length
    predictions.rows.push_back(prediction_for(dataset[static_cast<std::size_t>(i)],
                                              "G5", correct));
  }

  const auto rows = text::correctness_correlates(dataset, predictions,
                                                 text::TextFeature::Length);
  bool found_overall = false;
  for (const auto& row : rows) {
    if (row.metric == "overall") {
      found_overall = true;
      REQUIRE(row.result.defined);
      CHECK(row.result.r > 0.9);
      // Cross-check r with the brute-force pearson.
      std::vector<double> x, y;
      for (int i = 0; i < 40; ++i) {
        x.push_back(static_cast<double>(dataset[static_cast<std::size_t>(i)]
                                            .description.size()));
        y.push_back((i / 5) / 8.0);
      }
      CHECK(row.result.r == doctest::Approx(brute::pearson_r(x, y)));
    }
  }
  CHECK(found_overall);
}

TEST_CASE("correctness correlates degenerate cases surface as undefined") {
  auto dataset = dataset_from({"aaaa", "bbbbbbbb", "cccccccccccc"});
  gateway::PredictionTable perfect;
  for (const auto& e : dataset)
    perfect.rows.push_back(prediction_for(e, "G5", 8));

  const auto rows = text::correctness_correlates(dataset, perfect,
                                                 text::TextFeature::Length);
  for (const auto& row : rows) {
    CHECK_FALSE(row.result.defined);  // constant y everywhere
    CHECK(row.result.p_band() == "undefined");
  }

  // Constant feature: identical descriptions.
  auto same = dataset_from({"same text", "same text", "same text"});
  gateway::PredictionTable mixed;
  mixed.rows.push_back(prediction_for(same[0], "G5", 8));
  mixed.rows.push_back(prediction_for(same[1], "G5", 4));
  mixed.rows.push_back(prediction_for(same[2], "G5", 0));
  const auto rows2 = text::correctness_correlates(same, mixed,
                                                  text::TextFeature::Length);
  for (const auto& row : rows2) CHECK_FALSE(row.result.defined);
}

TEST_CASE("correctness correlates coverage check") {
  auto dataset = dataset_from({"one", "two", "three"});
  gateway::PredictionTable partial;
  partial.rows.push_back(prediction_for(dataset[0], "G5", 8));
  CHECK_THROWS_AS(text::correctness_correlates(dataset, partial,
                                               text::TextFeature::Length),
                  CoverageMismatch);
}

TEST_CASE("feature names round trip") {
  for (text::TextFeature f :
       {text::TextFeature::Length, text::TextFeature::Entities,
        text::TextFeature::InformationContent})
    CHECK(text::feature_from_name(text::feature_name(f)) == f);
  CHECK_THROWS_AS(text::feature_from_name("bogus"), IoFailure);
}
