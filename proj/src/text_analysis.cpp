#include "cvsslab/text_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "cvsslab/errors.hpp"
#include "cvsslab/util.hpp"

namespace cvsslab::text {

namespace {

std::size_t word_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

}  // namespace

DescriptionStats length_stats(const std::vector<std::string>& descriptions) {
  if (descriptions.empty()) throw EmptyInput("length_stats: empty dataset");

  std::vector<double> lengths;
  lengths.reserve(descriptions.size());
  std::map<int, long long> buckets;
  double sum = 0.0;
  for (const std::string& d : descriptions) {
    const double len = static_cast<double>(d.size());
    lengths.push_back(len);
    sum += len;
    const int bucket = static_cast<int>(word_count(d) / 20) * 20;
    ++buckets[bucket];
  }
  std::sort(lengths.begin(), lengths.end());

  DescriptionStats out;
  out.mean_chars = sum / static_cast<double>(lengths.size());
  const std::size_t n = lengths.size();
  out.median_chars = (n % 2 == 1)
                         ? lengths[n / 2]
                         : 0.5 * (lengths[n / 2 - 1] + lengths[n / 2]);
  out.min_chars = lengths.front();
  out.max_chars = lengths.back();
  for (const auto& [start, count] : buckets)
    out.histogram.push_back({start, count});
  return out;
}

DescriptionStats length_stats(const std::vector<ingest::CveEntry>& dataset) {
  std::vector<std::string> descriptions;
  descriptions.reserve(dataset.size());
  for (const ingest::CveEntry& e : dataset) descriptions.push_back(e.description);
  return length_stats(descriptions);
}

int count_entities(std::string_view text) {
  static const std::set<std::string> kStopwords = {
      "a", "an", "the", "this", "that", "these", "those", "it", "its",
      "in", "on", "of", "to", "and", "or", "as", "by", "for", "with",
      "via", "when", "where", "which", "while", "before", "after", "if"};

  // Whitespace tokens, tracking sentence starts.
  std::vector<std::pair<std::string, bool>> tokens;  // (token, sentence_initial)
  std::string cur;
  bool at_sentence_start = true;
  auto flush = [&]() {
    if (cur.empty()) return;
    tokens.emplace_back(cur, at_sentence_start);
    at_sentence_start = false;
    const char last = cur.back();
    if (last == '.' || last == '!' || last == '?') at_sentence_start = true;
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)))
      flush();
    else
      cur.push_back(c);
  }
  flush();

  auto qualifies = [&](const std::pair<std::string, bool>& tok) {
    if (tok.second) return false;  // sentence-initial
    std::string_view word = tok.first;
    while (!word.empty() &&
           !std::isalnum(static_cast<unsigned char>(word.front())))
      word.remove_prefix(1);
    while (!word.empty() &&
           !std::isalnum(static_cast<unsigned char>(word.back())))
      word.remove_suffix(1);
    if (word.empty()) return false;
    if (kStopwords.count(util::to_lower(word))) return false;

    bool has_alpha = false;
    bool has_digit = false;
    for (char c : word) {
      const unsigned char u = static_cast<unsigned char>(c);
      if (std::isalpha(u)) has_alpha = true;
      if (std::isdigit(u)) has_digit = true;
    }
    const bool capitalized =
        std::isupper(static_cast<unsigned char>(word.front())) != 0;
    const bool mixed_alnum = has_digit && has_alpha;  // log4j, x86viewer
    return capitalized || mixed_alnum;
  };

  int runs = 0;
  bool in_run = false;
  for (const auto& tok : tokens) {
    if (qualifies(tok)) {
      if (!in_run) ++runs;
      in_run = true;
    } else {
      in_run = false;
    }
  }
  return runs;
}

IcModel IcModel::build(const std::vector<std::string>& descriptions) {
  IcModel model;
  for (const std::string& d : descriptions) {
    for (std::string& token : util::word_tokens(d)) {
      ++model.counts_[std::move(token)];
      ++model.total_;
    }
  }
  return model;
}

IcModel IcModel::build(const std::vector<ingest::CveEntry>& dataset) {
  std::vector<std::string> descriptions;
  descriptions.reserve(dataset.size());
  for (const ingest::CveEntry& e : dataset) descriptions.push_back(e.description);
  return build(descriptions);
}

double IcModel::probability(const std::string& token) const {
  auto it = counts_.find(token);
  if (it == counts_.end() || total_ == 0)
    return 1.0 / static_cast<double>(total_ + static_cast<long long>(counts_.size()));
  return static_cast<double>(it->second) / static_cast<double>(total_);
}

double information_content(std::string_view text, const IcModel& model) {
  const std::vector<std::string> tokens = util::word_tokens(text);
  if (tokens.empty()) throw EmptyText("information_content: no tokens");
  double sum = 0.0;
  for (const std::string& token : tokens)
    sum += -std::log2(model.probability(token));
  return sum / static_cast<double>(tokens.size());
}

// --- pearson ------------------------------------------------------------------

namespace {

// Continued-fraction evaluation of the regularized incomplete beta
// (Lentz's algorithm), good to ~1e-14 over the t-test range.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_beta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const double front =
      std::exp(ln_beta + a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

std::string CorrelationResult::p_band() const {
  if (!defined) return "undefined";
  if (p_value < 0.05) return "<0.05";
  return util::format_double(p_value, 4);
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw LengthMismatch("pearson: input sizes differ");
  const std::size_t n = x.size();
  if (n < 3) throw LengthMismatch("pearson: need at least 3 samples");

  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw ZeroVariance("pearson: constant input");

  CorrelationResult out;
  out.n = n;
  out.r = sxy / std::sqrt(sxx * syy);
  out.r = std::clamp(out.r, -1.0, 1.0);

  const double df = static_cast<double>(n - 2);
  const double r2 = out.r * out.r;
  if (r2 >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double t = std::fabs(out.r) * std::sqrt(df / (1.0 - r2));
    // Two-sided p from the t distribution: p = I_{df/(df+t^2)}(df/2, 1/2).
    out.p_value = incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  }
  return out;
}

// --- correctness correlates ---------------------------------------------------------

std::string_view feature_name(TextFeature feature) {
  switch (feature) {
    case TextFeature::Length: return "length";
    case TextFeature::Entities: return "entities";
    case TextFeature::InformationContent: return "ic";
  }
  return "length";
}

TextFeature feature_from_name(std::string_view name) {
  if (name == "length") return TextFeature::Length;
  if (name == "entities") return TextFeature::Entities;
  if (name == "ic") return TextFeature::InformationContent;
  throw IoFailure("unknown text feature '" + std::string(name) +
                  "' (expected length, entities or ic)");
}

std::vector<CorrelationRow> correctness_correlates(
    const std::vector<ingest::CveEntry>& dataset,
    const gateway::PredictionTable& predictions, TextFeature feature) {
  if (dataset.empty()) throw EmptyInput("correctness_correlates: empty dataset");

  std::map<std::string, std::map<std::string, const gateway::PredictionSet*>>
      by_model;  // model -> cve -> prediction
  for (const gateway::PredictionSet& ps : predictions.rows)
    by_model[ps.model_id][ps.cve_id] = &ps;

  // Feature values are shared across models.
  std::vector<double> x;
  x.reserve(dataset.size());
  IcModel ic_model;
  if (feature == TextFeature::InformationContent) ic_model = IcModel::build(dataset);
  for (const ingest::CveEntry& e : dataset) {
    switch (feature) {
      case TextFeature::Length:
        x.push_back(static_cast<double>(e.description.size()));
        break;
      case TextFeature::Entities:
        x.push_back(static_cast<double>(count_entities(e.description)));
        break;
      case TextFeature::InformationContent:
        x.push_back(information_content(e.description, ic_model));
        break;
    }
  }

  std::vector<CorrelationRow> rows;
  for (const auto& [model_id, by_cve] : by_model) {
    for (const ingest::CveEntry& e : dataset)
      if (!by_cve.count(e.cve_id))
        throw CoverageMismatch("model " + model_id + " lacks prediction for " +
                               e.cve_id);

    auto correlate = [&](const std::string& metric_label,
                         const std::vector<double>& y) {
      CorrelationRow row;
      row.model_id = model_id;
      row.metric = metric_label;
      row.feature = feature;
      try {
        row.result = pearson(x, y);
      } catch (const ZeroVariance&) {
        row.result.defined = false;  // surfaced as "undefined r"
        row.result.n = x.size();
      }
      rows.push_back(std::move(row));
    };

    // Per-metric 0/1 correctness.
    for (cvss::MetricKind kind : cvss::kAllMetrics) {
      std::vector<double> y;
      y.reserve(dataset.size());
      for (const ingest::CveEntry& e : dataset) {
        const gateway::PredictionSet& ps = *by_cve.at(e.cve_id);
        y.push_back(ps.labels[static_cast<std::size_t>(kind)] == e.truth.get(kind)
                        ? 1.0
                        : 0.0);
      }
      correlate(std::string(cvss::metric_abbrev(kind)), y);
    }

    // Overall score: fraction of the 8 metrics predicted exactly.
    std::vector<double> y;
    y.reserve(dataset.size());
    for (const ingest::CveEntry& e : dataset) {
      const gateway::PredictionSet& ps = *by_cve.at(e.cve_id);
      int correct = 0;
      for (cvss::MetricKind kind : cvss::kAllMetrics)
        if (ps.labels[static_cast<std::size_t>(kind)] == e.truth.get(kind))
          ++correct;
      y.push_back(static_cast<double>(correct) / 8.0);
    }
    correlate("overall", y);
  }
  return rows;
}

}  // namespace cvsslab::text
