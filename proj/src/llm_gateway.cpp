#include "cvsslab/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cvsslab/errors.hpp"
#include "cvsslab/util.hpp"

namespace cvsslab::gateway {

using nlohmann::json;

namespace {

constexpr std::string_view kRedaction = "[REDACTED-ID]";

std::string labels_line(
    const std::array<cvss::MetricValue, cvss::kNumMetrics>& labels) {
  std::string out;
  for (cvss::MetricKind kind : cvss::kAllMetrics) {
    if (!out.empty()) out += " | ";
    out += cvss::value_word(kind, labels[static_cast<std::size_t>(kind)]);
  }
  return out;
}

}  // namespace

std::vector<ShotExample> default_shot_examples() {
  using cvss::MetricValue;
  std::vector<ShotExample> out;
  // Synthetic write-ups covering a spread of levels; deliberately not real
  // vulnerability records.
  out.push_back(ShotExample{
      "A heap-based buffer overflow in the request parsing routine of the "
      "Acme FTP daemon allows unauthenticated remote attackers to execute "
      "arbitrary code by sending a crafted directory listing command. The "
      "flaw is reachable over the network without any user interaction and "
      "fully compromises the confidentiality, integrity, and availability "
      "of the affected host.",
      {MetricValue::L, MetricValue::N, MetricValue::N, MetricValue::N,
       MetricValue::U, MetricValue::H, MetricValue::H, MetricValue::H}});
  out.push_back(ShotExample{
      "An improper access control issue in the maintenance menu of the "
      "Contoso smart thermostat lets a physically present attacker holding "
      "administrator credentials read the stored wireless passphrase after "
      "convincing a victim to unlock the service panel. Exploitation only "
      "works when a non-default hardware debug jumper is set, and no data "
      "can be modified or made unavailable.",
      {MetricValue::H, MetricValue::P, MetricValue::H, MetricValue::R,
       MetricValue::U, MetricValue::H, MetricValue::N, MetricValue::N}});
  return out;
}

PredictionSet PredictionSet::all_unknown(std::string cve_id,
                                         std::string model_id) {
  PredictionSet out;
  out.cve_id = std::move(cve_id);
  out.model_id = std::move(model_id);
  out.labels.fill(cvss::MetricValue::Unknown);
  out.valid = false;
  return out;
}

bool PredictionSet::compute_valid() const {
  return std::none_of(labels.begin(), labels.end(), [](cvss::MetricValue v) {
    return v == cvss::MetricValue::Unknown;
  });
}

// --- prompt construction ---------------------------------------------------

std::string build_prompt(const std::vector<std::string>& descriptions,
                         const PromptSpec& spec) {
  if (descriptions.empty()) throw EmptyBatch("build_prompt: empty batch");
  if (static_cast<int>(descriptions.size()) > spec.batch_size)
    throw OversizedBatch("build_prompt: batch of " +
                         std::to_string(descriptions.size()) +
                         " exceeds batch_size " +
                         std::to_string(spec.batch_size));
  if (spec.shots != 0 && spec.shots != 2 && spec.shots != 5 && spec.shots != 10)
    throw std::invalid_argument("PromptSpec: shots must be 0, 2, 5 or 10");

  std::vector<ShotExample> examples = spec.shot_examples;
  if (examples.empty() && spec.shots > 0) {
    examples = default_shot_examples();
    if (static_cast<int>(examples.size()) > spec.shots)
      examples.resize(static_cast<std::size_t>(spec.shots));
  }
  if (static_cast<int>(examples.size()) != spec.shots)
    throw std::invalid_argument(
        "PromptSpec: shot_examples length must equal shots");

  std::string p;
  p += "You are a cybersecurity expert trained in analyzing vulnerability "
       "descriptions and determining their CVSS v3.1 base metrics: Attack "
       "Complexity, Attack Vector, Privileges Required, User Interaction, "
       "Scope, Confidentiality Impact, Integrity Impact, and Availability "
       "Impact.\n\n";
  p += "Complete the task in two steps.\n";
  p += "Step 1: For each vulnerability description below, determine the "
       "eight CVSS v3.1 base metrics from the text alone.\n";
  p += "Step 2: Output exactly one line per description, in the order the "
       "descriptions are given, with eight pipe-delimited fields in this "
       "fixed format:\n";
  p += "Attack Complexity | Attack Vector | Privileges Required | User "
       "Interaction | Scope | Confidentiality Impact | Integrity Impact | "
       "Availability Impact\n\n";
  p += "Allowed values:\n";
  for (cvss::MetricKind kind : cvss::kAllMetrics) {
    p += cvss::metric_name(kind);
    p += ": ";
    bool first = true;
    for (cvss::MetricValue value : cvss::valid_values(kind)) {
      if (!first) p += ", ";
      p += cvss::value_word(kind, value);
      first = false;
    }
    p += "\n";
  }
  p += "\nOutput only the metric lines, with no numbering and no "
       "explanations.\n";

  for (std::size_t i = 0; i < examples.size(); ++i) {
    p += "\nExample " + std::to_string(i + 1) + ":\n";
    p += "Description: ";
    p += util::redact_cve_ids(examples[i].description, kRedaction);
    p += "\nAnswer: " + labels_line(examples[i].labels) + "\n";
  }

  p += "\nNow analyze the following " + std::to_string(descriptions.size()) +
       " vulnerability description(s) and output " +
       std::to_string(descriptions.size()) + " line(s):\n";
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    p += "\nDescription " + std::to_string(i + 1) + ": ";
    // Identifiers would let a model retrieve known vectors instead of
    // classifying, so they are scrubbed unconditionally.
    p += util::redact_cve_ids(descriptions[i], kRedaction);
    p += "\n";
  }
  return p;
}

cvss::MetricValue normalize_label(std::string_view field,
                                  cvss::MetricKind kind) {
  // Strip surrounding whitespace/punctuation, keep inner structure.
  std::size_t b = 0;
  std::size_t e = field.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(field[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(field[e - 1]))) --e;
  if (b == e) return cvss::MetricValue::Unknown;

  std::string norm = util::to_upper(field.substr(b, e - b));
  // Collapse separators so "ADJACENT_NETWORK" and "ADJACENT  NETWORK" match.
  std::string squeezed;
  for (char c : norm) {
    const char mapped = (c == '_' || c == '-') ? ' ' : c;
    if (mapped == ' ' && !squeezed.empty() && squeezed.back() == ' ') continue;
    squeezed.push_back(mapped);
  }

  for (cvss::MetricValue value : cvss::valid_values(kind)) {
    if (squeezed.size() == 1 && squeezed[0] == cvss::value_letter(value))
      return value;
    if (squeezed == cvss::value_word(kind, value)) return value;
  }
  if (kind == cvss::MetricKind::AV && squeezed == "ADJACENT NETWORK")
    return cvss::MetricValue::A;
  return cvss::MetricValue::Unknown;
}

std::vector<PredictionSet> parse_response(
    std::string_view raw, const std::vector<std::string>& cve_ids,
    std::string_view model_id) {
  if (cve_ids.empty()) throw EmptyBatch("parse_response: empty batch");

  // Usable lines contain at least one alphanumeric character; this drops
  // blank lines and markdown fences without disturbing alignment.
  std::vector<std::string> lines;
  for (std::string& line : util::split(raw, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool usable =
        std::any_of(line.begin(), line.end(), [](unsigned char c) {
          return std::isalnum(c) != 0;
        });
    if (usable) lines.push_back(std::move(line));
  }

  std::vector<PredictionSet> out;
  out.reserve(cve_ids.size());
  for (std::size_t i = 0; i < cve_ids.size(); ++i) {
    PredictionSet ps =
        PredictionSet::all_unknown(cve_ids[i], std::string(model_id));
    if (i < lines.size()) {
      std::string_view line = lines[i];
      // Tolerate "3." / "3)" enumeration prefixes despite the instructions.
      std::size_t pos = 0;
      while (pos < line.size() &&
             std::isdigit(static_cast<unsigned char>(line[pos])))
        ++pos;
      if (pos > 0 && pos < line.size() &&
          (line[pos] == '.' || line[pos] == ')' || line[pos] == ':')) {
        line.remove_prefix(pos + 1);
      }
      const std::vector<std::string> fields = util::split(line, '|');
      if (fields.size() == cvss::kNumMetrics) {
        for (std::size_t f = 0; f < cvss::kNumMetrics; ++f)
          ps.labels[f] =
              normalize_label(fields[f], static_cast<cvss::MetricKind>(f));
      }
    }
    ps.valid = ps.compute_valid();
    out.push_back(std::move(ps));
  }
  return out;
}

// --- replay cache ---------------------------------------------------------------

ReplayCache::ReplayCache(std::filesystem::path file) : file_(std::move(file)) {
  if (!std::filesystem::exists(file_)) return;
  std::istringstream in(util::read_file(file_));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw SchemaMismatch("cache line " + std::to_string(line_no) +
                           ": expected key<TAB>base64");
    entries_[line.substr(0, tab)] = util::base64_decode(line.substr(tab + 1));
  }
}

std::string ReplayCache::key_for(std::string_view model_id,
                                 std::string_view prompt) {
  return std::string(model_id) + ":" + util::sha256_hex(prompt);
}

std::optional<std::string> ReplayCache::lookup(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReplayCache::insert(const std::string& key, std::string_view response) {
  if (entries_.count(key)) return;  // append-only, first write wins
  entries_[key] = std::string(response);
  if (file_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(file_.parent_path(), ec);
  }
  std::ofstream out(file_, std::ios::app | std::ios::binary);
  if (!out) throw IoFailure("cannot append to cache: " + file_.string());
  out << key << '\t' << util::base64_encode(response) << '\n';
  if (!out) throw IoFailure("cache write failed: " + file_.string());
}

// --- submission -----------------------------------------------------------------------

SubmitMode submit_mode_from_string(std::string_view name) {
  if (name == "live") return SubmitMode::Live;
  if (name == "replay") return SubmitMode::Replay;
  if (name == "record") return SubmitMode::Record;
  throw IoFailure("unknown mode '" + std::string(name) +
                  "' (expected live, replay or record)");
}

namespace {

std::string extract_response_text(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) return body;
  // OpenAI-style chat completion.
  if (doc.contains("choices") && doc["choices"].is_array() &&
      !doc["choices"].empty()) {
    const json& choice = doc["choices"][0];
    if (choice.contains("message") && choice["message"].is_object()) {
      const json& msg = choice["message"];
      if (msg.contains("content") && msg["content"].is_string())
        return msg["content"].get<std::string>();
    }
    if (choice.contains("text") && choice["text"].is_string())
      return choice["text"].get<std::string>();
  }
  if (doc.contains("content") && doc["content"].is_string())
    return doc["content"].get<std::string>();
  return body;
}

bool transient_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

std::string submit_batch(const ProviderConfig& cfg, const std::string& prompt,
                         ReplayCache& cache, SubmitMode mode,
                         HttpTransport* transport, const RetryPolicy& retry) {
  const std::string key = ReplayCache::key_for(cfg.provider_id, prompt);

  if (mode == SubmitMode::Replay) {
    if (auto hit = cache.lookup(key)) return *hit;
    throw CacheMiss("replay miss for key " + key);
  }

  if (mode == SubmitMode::Record) {
    // Re-recording an already cached prompt must not hit the network again.
    if (auto hit = cache.lookup(key)) return *hit;
  }

  if (transport == nullptr)
    throw ProviderError("no transport available for live/record mode");
  if (cfg.credential_env_var.empty())
    throw AuthError("provider " + cfg.provider_id +
                    ": no credential_env_var configured");
  const char* credential = std::getenv(cfg.credential_env_var.c_str());
  if (credential == nullptr || *credential == '\0')
    throw AuthError("provider " + cfg.provider_id + ": environment variable " +
                    cfg.credential_env_var + " is not set");

  const json request = {
      {"model", cfg.model_name},
      {"temperature", cfg.temperature},
      {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
  };
  std::vector<std::pair<std::string, std::string>> headers = {
      {cfg.auth_header, cfg.auth_prefix + credential},
      {"Content-Type", "application/json"},
  };
  headers.insert(headers.end(), cfg.extra_headers.begin(),
                 cfg.extra_headers.end());

  std::function<void(std::chrono::milliseconds)> sleep_for = retry.sleep;
  if (!sleep_for)
    sleep_for = [](std::chrono::milliseconds d) {
      std::this_thread::sleep_for(d);
    };

  std::string last_error;
  for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    const HttpResponse response =
        transport->post(cfg.endpoint, headers, request.dump());

    if (!response.transport_error && response.status == 200) {
      const std::string text = extract_response_text(response.body);
      if (mode == SubmitMode::Record) cache.insert(key, text);
      return text;
    }
    if (!response.transport_error && (response.status == 401 || response.status == 403))
      throw AuthError("provider " + cfg.provider_id + ": HTTP " +
                      std::to_string(response.status));
    if (!response.transport_error && !transient_status(response.status))
      throw ProviderError("provider " + cfg.provider_id + ": HTTP " +
                          std::to_string(response.status) + " " +
                          response.body.substr(0, 200));

    last_error = response.transport_error
                     ? response.error
                     : "HTTP " + std::to_string(response.status);
    if (attempt < retry.max_attempts) {
      std::chrono::milliseconds delay(retry.base_delay.count()
                                      << (attempt - 1));
      if (!response.retry_after.empty()) {
        // Rate-limit headers give seconds; trust them when larger.
        const long seconds = std::strtol(response.retry_after.c_str(), nullptr, 10);
        if (seconds > 0)
          delay = std::max(delay, std::chrono::milliseconds(seconds * 1000));
      }
      sleep_for(delay);
    }
  }
  throw ProviderError("provider " + cfg.provider_id + ": giving up after " +
                      std::to_string(retry.max_attempts) +
                      " attempts (last: " + last_error + ")");
}

// --- prediction pipeline -----------------------------------------------------------------

std::vector<std::string> PredictionTable::model_ids() const {
  std::vector<std::string> ids;
  for (const PredictionSet& row : rows)
    if (std::find(ids.begin(), ids.end(), row.model_id) == ids.end())
      ids.push_back(row.model_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

PredictionTable run_predictions(const std::vector<ingest::CveEntry>& dataset,
                                const std::vector<ProviderConfig>& providers,
                                const PromptSpec& spec, ReplayCache& cache,
                                SubmitMode mode, HttpTransport* transport,
                                const RetryPolicy& retry,
                                std::vector<std::string>* provider_errors) {
  if (dataset.empty()) throw EmptyInput("run_predictions: empty dataset");

  // Shot examples must never be drawn from the evaluation set.
  for (const ShotExample& example : spec.shot_examples)
    for (const ingest::CveEntry& entry : dataset)
      if (entry.description == example.description)
        throw std::invalid_argument(
            "PromptSpec: shot example collides with dataset entry " +
            entry.cve_id);

  // Replay is all-or-nothing: scan for gaps up front so the error can list
  // every missing key instead of aborting on the first one.
  if (mode == SubmitMode::Replay) {
    std::string missing;
    for (const ProviderConfig& provider : providers) {
      for (std::size_t start = 0; start < dataset.size();
           start += static_cast<std::size_t>(spec.batch_size)) {
        const std::size_t end =
            std::min(start + static_cast<std::size_t>(spec.batch_size),
                     dataset.size());
        std::vector<std::string> descriptions;
        for (std::size_t i = start; i < end; ++i)
          descriptions.push_back(dataset[i].description);
        const std::string key = ReplayCache::key_for(
            provider.provider_id, build_prompt(descriptions, spec));
        if (!cache.lookup(key)) missing += "\n  " + key;
      }
    }
    if (!missing.empty())
      throw CacheMiss("replay cache is missing keys:" + missing);
  }

  PredictionTable table;
  table.rows.reserve(dataset.size() * providers.size());

  for (const ProviderConfig& provider : providers) {
    std::size_t done = 0;
    try {
      while (done < dataset.size()) {
        const std::size_t end =
            std::min(done + static_cast<std::size_t>(spec.batch_size),
                     dataset.size());
        std::vector<std::string> descriptions;
        std::vector<std::string> ids;
        for (std::size_t i = done; i < end; ++i) {
          descriptions.push_back(dataset[i].description);
          ids.push_back(dataset[i].cve_id);
        }
        const std::string prompt = build_prompt(descriptions, spec);
        const std::string response =
            submit_batch(provider, prompt, cache, mode, transport, retry);
        for (PredictionSet& ps :
             parse_response(response, ids, provider.provider_id))
          table.rows.push_back(std::move(ps));
        done = end;
      }
    } catch (const std::exception& e) {
      if (provider_errors)
        provider_errors->push_back("provider " + provider.provider_id + ": " +
                                   e.what());
      // Flush the unfetched remainder so the table stays rectangular.
      for (std::size_t i = done; i < dataset.size(); ++i)
        table.rows.push_back(PredictionSet::all_unknown(
            dataset[i].cve_id, provider.provider_id));
    }
  }

  std::sort(table.rows.begin(), table.rows.end(),
            [](const PredictionSet& a, const PredictionSet& b) {
              return std::tie(a.cve_id, a.model_id) <
                     std::tie(b.cve_id, b.model_id);
            });
  return table;
}

std::string predictions_to_csv(const PredictionTable& table) {
  std::string out = "cve_id,model_id,AC,AV,PR,UI,S,C,I,A,valid\n";
  for (const PredictionSet& row : table.rows) {
    std::vector<std::string> fields = {row.cve_id, row.model_id};
    for (cvss::MetricKind kind : cvss::kAllMetrics) {
      const cvss::MetricValue v = row.labels[static_cast<std::size_t>(kind)];
      fields.push_back(v == cvss::MetricValue::Unknown
                           ? "UNKNOWN"
                           : std::string(1, cvss::value_letter(v)));
    }
    fields.push_back(row.valid ? "true" : "false");
    out += util::csv_join(fields);
    out.push_back('\n');
  }
  return out;
}

void save_predictions_csv(const PredictionTable& table,
                          const std::filesystem::path& path) {
  util::write_file(path, predictions_to_csv(table));
}

PredictionTable load_predictions_csv(const std::filesystem::path& path) {
  const std::string content = util::read_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) ||
      util::trim(line) != "cve_id,model_id,AC,AV,PR,UI,S,C,I,A,valid")
    throw SchemaMismatch("predictions csv: bad header in " + path.string());

  PredictionTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    const std::vector<std::string> fields = util::csv_split(line);
    if (fields.size() != 11)
      throw SchemaMismatch("predictions csv line " + std::to_string(line_no) +
                           ": expected 11 fields");
    PredictionSet ps;
    ps.cve_id = fields[0];
    ps.model_id = fields[1];
    for (std::size_t f = 0; f < cvss::kNumMetrics; ++f) {
      const cvss::MetricKind kind = static_cast<cvss::MetricKind>(f);
      const std::string& cell = fields[2 + f];
      if (cell == "UNKNOWN") {
        ps.labels[f] = cvss::MetricValue::Unknown;
        continue;
      }
      const cvss::MetricValue v = normalize_label(cell, kind);
      if (v == cvss::MetricValue::Unknown)
        throw SchemaMismatch("predictions csv line " +
                             std::to_string(line_no) + ": bad label '" +
                             cell + "'");
      ps.labels[f] = v;
    }
    const std::string& valid_cell = fields[10];
    if (valid_cell != "true" && valid_cell != "false")
      throw SchemaMismatch("predictions csv line " + std::to_string(line_no) +
                           ": valid must be true/false");
    ps.valid = ps.compute_valid();
    if (ps.valid != (valid_cell == "true"))
      throw SchemaMismatch("predictions csv line " + std::to_string(line_no) +
                           ": valid flag disagrees with labels");
    table.rows.push_back(std::move(ps));
  }
  return table;
}

}  // namespace cvsslab::gateway
