#include "cvsslab/cvss.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cvsslab/errors.hpp"
#include "cvsslab/util.hpp"

namespace cvsslab::cvss {

namespace {

constexpr double kExploitabilityCoefficient = 8.22;
constexpr double kScopeCoefficient = 1.08;

struct KindInfo {
  std::string_view abbrev;
  std::string_view name;
  std::array<MetricValue, 4> values;  // Table-1 order, padded with Unknown
  std::size_t num_values;
};

constexpr std::array<KindInfo, kNumMetrics> kKinds = {{
    // indexed by MetricKind
    {"AC", "Attack Complexity",
     {MetricValue::L, MetricValue::H, MetricValue::Unknown, MetricValue::Unknown}, 2},
    {"AV", "Attack Vector",
     {MetricValue::N, MetricValue::A, MetricValue::L, MetricValue::P}, 4},
    {"PR", "Privileges Required",
     {MetricValue::N, MetricValue::L, MetricValue::H, MetricValue::Unknown}, 3},
    {"UI", "User Interaction",
     {MetricValue::N, MetricValue::R, MetricValue::Unknown, MetricValue::Unknown}, 2},
    {"S", "Scope",
     {MetricValue::U, MetricValue::C, MetricValue::Unknown, MetricValue::Unknown}, 2},
    {"C", "Confidentiality Impact",
     {MetricValue::H, MetricValue::L, MetricValue::N, MetricValue::Unknown}, 3},
    {"I", "Integrity Impact",
     {MetricValue::H, MetricValue::L, MetricValue::N, MetricValue::Unknown}, 3},
    {"A", "Availability Impact",
     {MetricValue::H, MetricValue::L, MetricValue::N, MetricValue::Unknown}, 3},
}};

const KindInfo& info(MetricKind kind) {
  return kKinds[static_cast<std::size_t>(kind)];
}

double cia_weight(MetricValue value) {
  switch (value) {
    case MetricValue::H: return 0.56;
    case MetricValue::L: return 0.22;
    case MetricValue::N: return 0.00;
    default: break;
  }
  throw InvalidValueForKind("bad impact value");
}

}  // namespace

std::string_view metric_abbrev(MetricKind kind) { return info(kind).abbrev; }
std::string_view metric_name(MetricKind kind) { return info(kind).name; }

MetricKind metric_from_abbrev(std::string_view abbrev) {
  for (MetricKind kind : kAllMetrics)
    if (info(kind).abbrev == abbrev) return kind;
  throw MalformedVector("unknown metric token: " + std::string(abbrev));
}

std::span<const MetricValue> valid_values(MetricKind kind) {
  const KindInfo& ki = info(kind);
  return {ki.values.data(), ki.num_values};
}

bool is_valid_value(MetricKind kind, MetricValue value) {
  const auto values = valid_values(kind);
  return std::find(values.begin(), values.end(), value) != values.end();
}

char value_letter(MetricValue value) {
  switch (value) {
    case MetricValue::N: return 'N';
    case MetricValue::A: return 'A';
    case MetricValue::L: return 'L';
    case MetricValue::P: return 'P';
    case MetricValue::H: return 'H';
    case MetricValue::R: return 'R';
    case MetricValue::U: return 'U';
    case MetricValue::C: return 'C';
    case MetricValue::Unknown: return '?';
  }
  return '?';
}

std::string_view value_word(MetricKind kind, MetricValue value) {
  if (!is_valid_value(kind, value))
    throw InvalidValueForKind("no word for value " +
                              std::string(1, value_letter(value)) + " of " +
                              std::string(metric_abbrev(kind)));
  switch (value) {
    case MetricValue::N:
      return kind == MetricKind::AV ? "NETWORK" : "NONE";
    case MetricValue::A: return "ADJACENT";
    case MetricValue::L:
      return kind == MetricKind::AV ? "LOCAL" : "LOW";
    case MetricValue::P: return "PHYSICAL";
    case MetricValue::H: return "HIGH";
    case MetricValue::R: return "REQUIRED";
    case MetricValue::U: return "UNCHANGED";
    case MetricValue::C: return "CHANGED";
    case MetricValue::Unknown: break;
  }
  return "UNKNOWN";
}

int class_code(MetricKind kind, MetricValue value) {
  if (value == MetricValue::Unknown)
    throw UnknownValue("class_code: UNKNOWN has no code");
  const auto values = valid_values(kind);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] == value) return static_cast<int>(i);
  throw InvalidValueForKind(std::string(1, value_letter(value)) +
                            " is not a level of " +
                            std::string(metric_abbrev(kind)));
}

MetricValue value_from_class_code(MetricKind kind, int code) {
  const auto values = valid_values(kind);
  if (code < 0 || static_cast<std::size_t>(code) >= values.size())
    throw InvalidValueForKind("class code out of range for " +
                              std::string(metric_abbrev(kind)));
  return values[static_cast<std::size_t>(code)];
}

// --- BaseVector ---------------------------------------------------------------

BaseVector BaseVector::of(MetricValue av, MetricValue ac, MetricValue pr,
                          MetricValue ui, MetricValue s, MetricValue c,
                          MetricValue i, MetricValue a) {
  BaseVector v;
  v.set(MetricKind::AV, av);
  v.set(MetricKind::AC, ac);
  v.set(MetricKind::PR, pr);
  v.set(MetricKind::UI, ui);
  v.set(MetricKind::S, s);
  v.set(MetricKind::C, c);
  v.set(MetricKind::I, i);
  v.set(MetricKind::A, a);
  return v;
}

void BaseVector::set(MetricKind kind, MetricValue value) {
  if (value != MetricValue::Unknown && !is_valid_value(kind, value))
    throw InvalidValueForKind(std::string(1, value_letter(value)) +
                              " is not a level of " +
                              std::string(metric_abbrev(kind)));
  values_[static_cast<std::size_t>(kind)] = value;
}

bool BaseVector::complete() const {
  return std::none_of(values_.begin(), values_.end(), [](MetricValue v) {
    return v == MetricValue::Unknown;
  });
}

// --- vector-string grammar -------------------------------------------------------

BaseVector parse_vector_string(std::string_view text) {
  constexpr std::string_view kPrefix = "CVSS:3.1/";
  if (!util::starts_with(text, kPrefix))
    throw MalformedVector("missing CVSS:3.1/ prefix: " + std::string(text));

  BaseVector v;
  std::array<bool, kNumMetrics> seen{};
  for (const std::string& token :
       util::split(text.substr(kPrefix.size()), '/')) {
    const std::size_t colon = token.find(':');
    if (token.empty() || colon == std::string::npos)
      throw MalformedVector("bad token '" + token + "'");
    const MetricKind kind = metric_from_abbrev(token.substr(0, colon));
    const std::string value_str = token.substr(colon + 1);

    MetricValue value = MetricValue::Unknown;
    for (MetricValue candidate : valid_values(kind)) {
      if (value_str.size() == 1 && value_str[0] == value_letter(candidate)) {
        value = candidate;
        break;
      }
    }
    if (value == MetricValue::Unknown)
      throw MalformedVector("invalid value '" + value_str + "' for " +
                            std::string(metric_abbrev(kind)));
    if (seen[static_cast<std::size_t>(kind)])
      throw MalformedVector("duplicate metric " +
                            std::string(metric_abbrev(kind)));
    seen[static_cast<std::size_t>(kind)] = true;
    v.set(kind, value);
  }

  std::string missing;
  for (MetricKind kind : kVectorOrder) {
    if (!seen[static_cast<std::size_t>(kind)]) {
      if (!missing.empty()) missing += ',';
      missing += metric_abbrev(kind);
    }
  }
  if (!missing.empty()) throw MalformedVector("missing " + missing);
  return v;
}

std::string format_vector_string(const BaseVector& v) {
  std::string out = "CVSS:3.1";
  for (MetricKind kind : kVectorOrder) {
    const MetricValue value = v.get(kind);
    if (value == MetricValue::Unknown)
      throw ContainsUnknown("cannot format UNKNOWN " +
                            std::string(metric_abbrev(kind)));
    out.push_back('/');
    out += metric_abbrev(kind);
    out.push_back(':');
    out.push_back(value_letter(value));
  }
  return out;
}

// --- scoring -------------------------------------------------------------------------

double metric_weight(MetricKind kind, MetricValue value, MetricValue scope) {
  if (value == MetricValue::Unknown)
    throw UnknownValue("metric_weight: UNKNOWN has no weight");
  if (!is_valid_value(kind, value))
    throw InvalidValueForKind(std::string(1, value_letter(value)) +
                              " is not a level of " +
                              std::string(metric_abbrev(kind)));
  switch (kind) {
    case MetricKind::AV:
      switch (value) {
        case MetricValue::N: return 0.85;
        case MetricValue::A: return 0.62;
        case MetricValue::L: return 0.55;
        default: return 0.20;  // P
      }
    case MetricKind::AC:
      return value == MetricValue::L ? 0.77 : 0.44;
    case MetricKind::PR: {
      if (!is_valid_value(MetricKind::S, scope))
        throw InvalidValueForKind("PR weight needs a valid Scope value");
      const bool changed = scope == MetricValue::C;
      switch (value) {
        case MetricValue::N: return 0.85;
        case MetricValue::L: return changed ? 0.68 : 0.62;
        default: return changed ? 0.50 : 0.27;  // H
      }
    }
    case MetricKind::UI:
      return value == MetricValue::N ? 0.85 : 0.62;
    case MetricKind::S:
      // Table 1 marks Scope as an impact modifier without a weight; it only
      // enters through PR columns and the changed-scope impact formula.
      throw InvalidValueForKind("Scope has no standalone weight");
    case MetricKind::C:
    case MetricKind::I:
    case MetricKind::A:
      return cia_weight(value);
  }
  throw InvalidValueForKind("unreachable metric kind");
}

std::string_view severity_name(Severity severity) {
  switch (severity) {
    case Severity::None: return "None";
    case Severity::Low: return "Low";
    case Severity::Medium: return "Medium";
    case Severity::High: return "High";
    case Severity::Critical: return "Critical";
  }
  return "None";
}

Severity severity_band(double base_score) {
  // Qualitative rating scale; scores are one-decimal multiples so comparing
  // against band edges with a small slack is exact.
  if (base_score < 0.05) return Severity::None;
  if (base_score < 3.95) return Severity::Low;
  if (base_score < 6.95) return Severity::Medium;
  if (base_score < 8.95) return Severity::High;
  return Severity::Critical;
}

double roundup_tenths(double value) {
  return std::ceil(value * 10.0 - 1e-9) / 10.0;
}

double exploitability_subscore(const BaseVector& v) {
  const MetricValue scope = v.get(MetricKind::S);
  for (MetricKind kind : {MetricKind::AV, MetricKind::AC, MetricKind::PR,
                          MetricKind::UI, MetricKind::S}) {
    if (v.get(kind) == MetricValue::Unknown)
      throw ContainsUnknown("exploitability needs " +
                            std::string(metric_abbrev(kind)));
  }
  return kExploitabilityCoefficient *
         metric_weight(MetricKind::AV, v.get(MetricKind::AV), scope) *
         metric_weight(MetricKind::AC, v.get(MetricKind::AC), scope) *
         metric_weight(MetricKind::PR, v.get(MetricKind::PR), scope) *
         metric_weight(MetricKind::UI, v.get(MetricKind::UI), scope);
}

ScoreBreakdown base_score(const BaseVector& v) {
  if (!v.complete()) throw ContainsUnknown("base_score needs all 8 metrics");

  ScoreBreakdown out;
  const bool changed = v.get(MetricKind::S) == MetricValue::C;
  const double c = cia_weight(v.get(MetricKind::C));
  const double i = cia_weight(v.get(MetricKind::I));
  const double a = cia_weight(v.get(MetricKind::A));

  out.iss = 1.0 - (1.0 - c) * (1.0 - i) * (1.0 - a);
  out.impact = changed
                   ? 7.52 * (out.iss - 0.029) -
                         3.25 * std::pow(out.iss - 0.02, 15.0)
                   : 6.42 * out.iss;
  out.exploitability = exploitability_subscore(v);

  if (out.impact <= 0.0) {
    out.base_score = 0.0;
  } else {
    const double sum = out.impact + out.exploitability;
    const double raw = changed ? std::min(kScopeCoefficient * sum, 10.0)
                               : std::min(sum, 10.0);
    out.base_score = roundup_tenths(raw);
  }
  out.severity = severity_band(out.base_score);
  return out;
}

// --- ordinal encoding ---------------------------------------------------------------------

int ordinal_value(MetricKind kind, MetricValue value) {
  if (value == MetricValue::Unknown)
    throw UnknownValue("ordinal_value: UNKNOWN has no ordinal");
  if (!is_valid_value(kind, value))
    throw InvalidValueForKind(std::string(1, value_letter(value)) +
                              " is not a level of " +
                              std::string(metric_abbrev(kind)));
  switch (kind) {
    case MetricKind::AV:
      switch (value) {
        case MetricValue::P: return 0;
        case MetricValue::L: return 1;
        case MetricValue::A: return 2;
        default: return 3;  // N
      }
    case MetricKind::AC:
      return value == MetricValue::H ? 0 : 1;
    case MetricKind::PR:
      switch (value) {
        case MetricValue::H: return 0;
        case MetricValue::L: return 1;
        default: return 2;  // N
      }
    case MetricKind::UI:
      return value == MetricValue::R ? 0 : 1;
    case MetricKind::S:
      return value == MetricValue::U ? 0 : 1;
    case MetricKind::C:
    case MetricKind::I:
    case MetricKind::A:
      switch (value) {
        case MetricValue::N: return 0;
        case MetricValue::L: return 1;
        default: return 2;  // H
      }
  }
  throw InvalidValueForKind("unreachable metric kind");
}

int max_ordinal_distance(MetricKind kind) {
  return static_cast<int>(valid_values(kind).size()) - 1;
}

std::span<const BaseVector> all_base_vectors() {
  static const std::vector<BaseVector> all = [] {
    std::vector<BaseVector> out;
    out.reserve(2592);
    for (MetricValue av : valid_values(MetricKind::AV))
      for (MetricValue ac : valid_values(MetricKind::AC))
        for (MetricValue pr : valid_values(MetricKind::PR))
          for (MetricValue ui : valid_values(MetricKind::UI))
            for (MetricValue s : valid_values(MetricKind::S))
              for (MetricValue c : valid_values(MetricKind::C))
                for (MetricValue i : valid_values(MetricKind::I))
                  for (MetricValue a : valid_values(MetricKind::A))
                    out.push_back(BaseVector::of(av, ac, pr, ui, s, c, i, a));
    return out;
  }();
  return all;
}

}  // namespace cvsslab::cvss
