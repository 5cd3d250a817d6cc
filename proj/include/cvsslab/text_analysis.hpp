#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cvsslab/cve_ingest.hpp"
#include "cvsslab/llm_gateway.hpp"

namespace cvsslab::text {

struct DescriptionStats {
  double mean_chars = 0.0;
  double median_chars = 0.0;  // even counts average the middle two
  double min_chars = 0.0;
  double max_chars = 0.0;
  struct Bucket {
    int start = 0;  // word count at the bucket's lower edge
    long long count = 0;
  };
  std::vector<Bucket> histogram;  // word-count buckets of width 20
};

DescriptionStats length_stats(const std::vector<std::string>& descriptions);
DescriptionStats length_stats(const std::vector<ingest::CveEntry>& dataset);

// Heuristic named-entity counter: maximal runs of capitalized or
// mixed-alphanumeric tokens that are neither sentence-initial nor stopwords;
// each run counts once. Pluggable stand-in for a real NER backend.
int count_entities(std::string_view text);

// Token-frequency model over the dataset corpus (lowercased alphanumeric
// tokens). Unseen tokens get the add-one floor 1/(total + vocabulary).
class IcModel {
 public:
  static IcModel build(const std::vector<std::string>& descriptions);
  static IcModel build(const std::vector<ingest::CveEntry>& dataset);

  double probability(const std::string& token) const;
  std::size_t vocabulary_size() const { return counts_.size(); }
  long long total_tokens() const { return total_; }

 private:
  std::unordered_map<std::string, long long> counts_;
  long long total_ = 0;
};

// Mean surprisal -log2 p(token) over the text's tokens. Throws EmptyText.
double information_content(std::string_view text, const IcModel& model);

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool defined = true;  // false when either side has zero variance
  std::string p_band() const;  // "<0.05" below threshold, else the number
};

// Product-moment r with a two-sided t-test p-value (n-2 degrees of freedom).
// Throws LengthMismatch / ZeroVariance; needs n >= 3.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

// Regularized incomplete beta, exposed for the t-distribution test points.
double incomplete_beta(double a, double b, double x);

enum class TextFeature { Length, Entities, InformationContent };
std::string_view feature_name(TextFeature feature);
TextFeature feature_from_name(std::string_view name);  // throws IoFailure

struct CorrelationRow {
  std::string model_id;
  std::string metric;  // metric abbrev, or "overall" for the 8-metric score
  TextFeature feature = TextFeature::Length;
  CorrelationResult result;
};

// Per-CVE correctness (exact-match fraction over the 8 metrics, plus each
// metric's 0/1 correctness) against the chosen description feature, per
// model. Zero-variance sides surface as defined=false rows, not errors.
std::vector<CorrelationRow> correctness_correlates(
    const std::vector<ingest::CveEntry>& dataset,
    const gateway::PredictionTable& predictions, TextFeature feature);

}  // namespace cvsslab::text
