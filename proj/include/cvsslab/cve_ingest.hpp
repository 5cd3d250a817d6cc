#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cvsslab/cvss.hpp"

namespace cvsslab::ingest {

struct RawCveRecord {
  std::string cve_id;
  // (language tag, text) in document order; tags may be empty.
  std::vector<std::pair<std::string, std::string>> descriptions;
  std::optional<std::string> cvss31_vector;
  std::optional<int> published_year;
};

struct CveEntry {
  std::string cve_id;
  std::string description;  // English, non-empty after trim
  cvss::BaseVector truth;   // complete
  int published_year = 0;
};

// Rejection rules in their fixed evaluation order; the first failure wins.
enum class RejectionReason {
  Malformed,
  Pre2019,
  NotV31,
  IncompleteMetrics,
  EmptyDescription,
  NonEnglish,
};

std::string_view rejection_name(RejectionReason reason);

struct FilterReport {
  long long malformed = 0;
  long long pre_2019 = 0;
  long long not_v31 = 0;
  long long incomplete_metrics = 0;
  long long empty_description = 0;
  long long non_english = 0;
  long long kept = 0;

  void add(RejectionReason reason);
  long long rejected() const;
  long long total() const { return kept + rejected(); }
  std::string to_csv() const;  // reason,count rows
};

// One CVE Record v5-style JSON document. Throws MalformedRecord when the
// document cannot be parsed or has no id.
RawCveRecord parse_cve_record(std::string_view bytes);

// Applies the quality filters in fixed order; rejection is a value, not an
// error.
std::variant<CveEntry, RejectionReason> to_entry(const RawCveRecord& record);

// Language tag dominates when present; otherwise a character/stopword
// heuristic decides.
bool detect_english(std::string_view text, std::string_view lang_tag = {});

std::pair<std::vector<CveEntry>, FilterReport> build_dataset(
    const std::vector<RawCveRecord>& records);

// Dataset file: UTF-8 JSON lines with keys cve_id, description, vector, year.
void save_dataset(const std::vector<CveEntry>& entries,
                  const std::filesystem::path& path);
std::vector<CveEntry> load_dataset(const std::filesystem::path& path);

// Walks a directory of .json record files (or reads one file holding
// concatenated JSON documents), parses, filters, and accounts for documents
// that fail to parse under the malformed counter.
struct IngestResult {
  std::vector<CveEntry> entries;
  FilterReport report;
};
IngestResult ingest_path(const std::filesystem::path& path);

}  // namespace cvsslab::ingest
