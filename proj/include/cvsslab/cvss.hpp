#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cvsslab::cvss {

// The eight CVSS v3.1 base metrics. Enumerator order is the canonical
// report/parse layout (pipe-delimited model output, prediction CSV columns);
// vector strings use kVectorOrder instead.
enum class MetricKind : std::uint8_t { AC, AV, PR, UI, S, C, I, A };

inline constexpr std::size_t kNumMetrics = 8;

inline constexpr std::array<MetricKind, kNumMetrics> kAllMetrics = {
    MetricKind::AC, MetricKind::AV, MetricKind::PR, MetricKind::UI,
    MetricKind::S,  MetricKind::C,  MetricKind::I,  MetricKind::A};

// Token order inside a canonical vector string.
inline constexpr std::array<MetricKind, kNumMetrics> kVectorOrder = {
    MetricKind::AV, MetricKind::AC, MetricKind::PR, MetricKind::UI,
    MetricKind::S,  MetricKind::C,  MetricKind::I,  MetricKind::A};

// Letter-coded metric levels. Which letters are valid depends on the owning
// MetricKind (N is Network for AV but None for PR/UI/C/I/A). Unknown is a
// distinguished level that only prediction paths may produce.
enum class MetricValue : std::uint8_t { N, A, L, P, H, R, U, C, Unknown };

std::string_view metric_abbrev(MetricKind kind);  // "AV"
std::string_view metric_name(MetricKind kind);    // "Attack Vector"
MetricKind metric_from_abbrev(std::string_view abbrev);  // throws MalformedVector

// Valid levels for a kind, in Table-1 listing order. This is the canonical
// class order used for confusion-matrix layout, class codes, and tie-breaks.
std::span<const MetricValue> valid_values(MetricKind kind);
bool is_valid_value(MetricKind kind, MetricValue value);

char value_letter(MetricValue value);                              // 'N'
std::string_view value_word(MetricKind kind, MetricValue value);   // "NETWORK"

// Index of `value` within valid_values(kind); throws InvalidValueForKind /
// UnknownValue. The meta-classifier feature encoding builds on this.
int class_code(MetricKind kind, MetricValue value);
MetricValue value_from_class_code(MetricKind kind, int code);

// All eight base-metric values of one CVE. Slots may hold Unknown while a
// prediction is being assembled; ground truth is always complete.
class BaseVector {
 public:
  BaseVector() { values_.fill(MetricValue::Unknown); }
  // Vector-string argument order: AV, AC, PR, UI, S, C, I, A.
  static BaseVector of(MetricValue av, MetricValue ac, MetricValue pr,
                       MetricValue ui, MetricValue s, MetricValue c,
                       MetricValue i, MetricValue a);

  MetricValue get(MetricKind kind) const {
    return values_[static_cast<std::size_t>(kind)];
  }
  void set(MetricKind kind, MetricValue value);  // throws InvalidValueForKind
  bool complete() const;                         // no Unknown slot

  bool operator==(const BaseVector&) const = default;

 private:
  std::array<MetricValue, kNumMetrics> values_;  // indexed by MetricKind
};

// --- vector-string grammar ---------------------------------------------------

// Accepts the eight metric tokens in any order after the "CVSS:3.1/" prefix;
// throws MalformedVector naming the offending token or the missing metrics.
BaseVector parse_vector_string(std::string_view text);

// Canonical form: AV,AC,PR,UI,S,C,I,A. Throws ContainsUnknown.
std::string format_vector_string(const BaseVector& v);

// --- scoring -----------------------------------------------------------------

// Table-1 weight; PR uses the scope-dependent column, so `scope` must be the
// vector's S value. Scope itself carries no weight and is rejected.
double metric_weight(MetricKind kind, MetricValue value, MetricValue scope);

enum class Severity : std::uint8_t { None, Low, Medium, High, Critical };
std::string_view severity_name(Severity severity);
Severity severity_band(double base_score);

struct ScoreBreakdown {
  double exploitability = 0.0;
  double iss = 0.0;     // impact subscore seed
  double impact = 0.0;
  double base_score = 0.0;  // one-decimal multiple in [0, 10]
  Severity severity = Severity::None;
};

// 8.22 * w(AV) * w(AC) * w(PR|scope) * w(UI); independent of C/I/A.
double exploitability_subscore(const BaseVector& v);

ScoreBreakdown base_score(const BaseVector& v);

// Smallest multiple of 0.1 >= value, with a 1e-9 guard so binary-float drift
// on exact tenths cannot round up a band.
double roundup_tenths(double value);

// --- ordinal encoding -----------------------------------------------------------

// Severity-ordered integers, ascending with Table-1 weight:
// AV P=0,L=1,A=2,N=3; AC H=0,L=1; PR H=0,L=1,N=2; UI R=0,N=1; S U=0,C=1;
// C/I/A N=0,L=1,H=2.
int ordinal_value(MetricKind kind, MetricValue value);
int max_ordinal_distance(MetricKind kind);

// Every complete BaseVector, in a fixed enumeration order (2592 of them).
std::span<const BaseVector> all_base_vectors();

}  // namespace cvsslab::cvss
