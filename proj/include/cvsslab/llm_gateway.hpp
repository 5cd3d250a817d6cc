#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvsslab/cve_ingest.hpp"
#include "cvsslab/cvss.hpp"

namespace cvsslab::gateway {

struct ProviderConfig {
  std::string provider_id;  // short nickname used in reports, e.g. "G5"
  std::string endpoint;     // full chat-completion URL
  std::string model_name;
  double temperature = 0.0;
  int max_parallel = 1;
  std::string credential_env_var;  // resolved at call time, never stored
  // Credential header shape; Azure-style endpoints use api-key with no scheme.
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  // Static provider-specific headers (never secrets).
  std::vector<std::pair<std::string, std::string>> extra_headers;
};

// One worked example embedded in the prompt. Labels follow the report order
// AC, AV, PR, UI, S, C, I, A.
struct ShotExample {
  std::string description;
  std::array<cvss::MetricValue, cvss::kNumMetrics> labels;
};

// The two bundled examples are hand-written synthetic vulnerabilities, not
// real CVEs.
std::vector<ShotExample> default_shot_examples();

struct PromptSpec {
  int shots = 2;  // 0, 2, 5 or 10
  std::vector<ShotExample> shot_examples;  // size must equal shots
  int batch_size = 20;
};

struct PredictionSet {
  std::string cve_id;
  std::string model_id;
  std::array<cvss::MetricValue, cvss::kNumMetrics> labels;  // MetricKind order
  bool valid = false;  // true iff no label is Unknown

  static PredictionSet all_unknown(std::string cve_id, std::string model_id);
  bool compute_valid() const;
};

// --- prompt construction ------------------------------------------------------

// Builds the two-step expert prompt for one batch of descriptions. CVE
// identifiers are scrubbed from the descriptions; the result never contains
// the "CVE-" pattern. Throws EmptyBatch / OversizedBatch.
std::string build_prompt(const std::vector<std::string>& descriptions,
                         const PromptSpec& spec);

// Case-insensitive single letters and full words; anything else -> Unknown.
cvss::MetricValue normalize_label(std::string_view field,
                                  cvss::MetricKind kind);

// Total: never throws on malformed content. The i-th usable response line
// maps to the i-th cve id; missing or unsplittable lines become all-UNKNOWN
// prediction sets.
std::vector<PredictionSet> parse_response(std::string_view raw,
                                          const std::vector<std::string>& cve_ids,
                                          std::string_view model_id);

// --- replay cache ------------------------------------------------------------

// Append-only disk cache keyed by (model id, prompt hash). Keys are oblivious
// to the cve ids in a batch, so prompt-template changes invalidate stale
// responses automatically.
class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path file);

  static std::string key_for(std::string_view model_id,
                             std::string_view prompt);

  std::optional<std::string> lookup(const std::string& key) const;
  void insert(const std::string& key, std::string_view response);
  std::size_t size() const { return entries_.size(); }
  const std::filesystem::path& file() const { return file_; }

 private:
  std::filesystem::path file_;
  std::map<std::string, std::string> entries_;
};

// --- transport ------------------------------------------------------------------

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string retry_after;      // value of the Retry-After header, if any
  bool transport_error = false;  // connection-level failure
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(
      const std::string& url,
      const std::vector<std::pair<std::string, std::string>>& headers,
      const std::string& body) = 0;
};

// cpp-httplib backed transport for live/record runs.
std::unique_ptr<HttpTransport> make_live_transport();

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  // Injectable for tests; defaults to an actual sleep.
  std::function<void(std::chrono::milliseconds)> sleep;
};

enum class SubmitMode { Live, Replay, Record };
SubmitMode submit_mode_from_string(std::string_view name);  // throws IoFailure

// One chat-completion round trip. Replay reads the cache only (transport may
// be null); record also writes the cache. Retries transient failures with
// exponential backoff and honors Retry-After. Throws CacheMiss, AuthError,
// ProviderError.
std::string submit_batch(const ProviderConfig& cfg, const std::string& prompt,
                         ReplayCache& cache, SubmitMode mode,
                         HttpTransport* transport,
                         const RetryPolicy& retry = {});

// --- prediction pipeline -------------------------------------------------------------

struct PredictionTable {
  std::vector<PredictionSet> rows;  // sorted by (cve_id, model_id)
  std::vector<std::string> model_ids() const;
};

// Runs every provider over the dataset in batches. A provider failure aborts
// only that provider: rows already parsed stay, unfetched ones are flushed as
// all-UNKNOWN, and the error message is appended to `provider_errors`.
PredictionTable run_predictions(const std::vector<ingest::CveEntry>& dataset,
                                const std::vector<ProviderConfig>& providers,
                                const PromptSpec& spec, ReplayCache& cache,
                                SubmitMode mode, HttpTransport* transport,
                                const RetryPolicy& retry = {},
                                std::vector<std::string>* provider_errors = nullptr);

// CSV schema: cve_id,model_id,AC,AV,PR,UI,S,C,I,A,valid
std::string predictions_to_csv(const PredictionTable& table);
void save_predictions_csv(const PredictionTable& table,
                          const std::filesystem::path& path);
PredictionTable load_predictions_csv(const std::filesystem::path& path);

}  // namespace cvsslab::gateway
