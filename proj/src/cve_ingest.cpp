#include "cvsslab/cve_ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cvsslab/errors.hpp"
#include "cvsslab/util.hpp"

namespace cvsslab::ingest {

using nlohmann::json;

namespace {

bool valid_cve_id(std::string_view id) {
  // CVE-\d{4}-\d{4,}
  if (id.size() < 13 || !util::starts_with(id, "CVE-")) return false;
  for (std::size_t i = 4; i < 8; ++i)
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
  if (id[8] != '-') return false;
  for (std::size_t i = 9; i < id.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
  return id.size() - 9 >= 4;
}

std::optional<int> year_from_date(const std::string& date) {
  if (date.size() < 4) return std::nullopt;
  int year = 0;
  for (int i = 0; i < 4; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(date[i]))) return std::nullopt;
    year = year * 10 + (date[i] - '0');
  }
  return year;
}

void collect_descriptions(const json& node, RawCveRecord& record) {
  if (!node.is_array()) return;
  for (const auto& d : node) {
    if (!d.is_object()) continue;
    std::string lang = d.value("lang", "");
    std::string text = d.value("value", "");
    record.descriptions.emplace_back(std::move(lang), std::move(text));
  }
}

void collect_v31_vector(const json& metrics, RawCveRecord& record) {
  if (record.cvss31_vector || !metrics.is_array()) return;
  for (const auto& m : metrics) {
    if (!m.is_object()) continue;
    auto it = m.find("cvssV3_1");
    if (it == m.end() || !it->is_object()) continue;
    auto vs = it->find("vectorString");
    if (vs != it->end() && vs->is_string()) {
      record.cvss31_vector = vs->get<std::string>();
      return;
    }
  }
}

}  // namespace

std::string_view rejection_name(RejectionReason reason) {
  switch (reason) {
    case RejectionReason::Malformed: return "malformed";
    case RejectionReason::Pre2019: return "pre_2019";
    case RejectionReason::NotV31: return "not_v31";
    case RejectionReason::IncompleteMetrics: return "incomplete_metrics";
    case RejectionReason::EmptyDescription: return "empty_description";
    case RejectionReason::NonEnglish: return "non_english";
  }
  return "malformed";
}

void FilterReport::add(RejectionReason reason) {
  switch (reason) {
    case RejectionReason::Malformed: ++malformed; return;
    case RejectionReason::Pre2019: ++pre_2019; return;
    case RejectionReason::NotV31: ++not_v31; return;
    case RejectionReason::IncompleteMetrics: ++incomplete_metrics; return;
    case RejectionReason::EmptyDescription: ++empty_description; return;
    case RejectionReason::NonEnglish: ++non_english; return;
  }
}

long long FilterReport::rejected() const {
  return malformed + pre_2019 + not_v31 + incomplete_metrics +
         empty_description + non_english;
}

std::string FilterReport::to_csv() const {
  std::string out = "reason,count\n";
  out += "malformed," + std::to_string(malformed) + "\n";
  out += "pre_2019," + std::to_string(pre_2019) + "\n";
  out += "not_v31," + std::to_string(not_v31) + "\n";
  out += "incomplete_metrics," + std::to_string(incomplete_metrics) + "\n";
  out += "empty_description," + std::to_string(empty_description) + "\n";
  out += "non_english," + std::to_string(non_english) + "\n";
  out += "kept," + std::to_string(kept) + "\n";
  return out;
}

RawCveRecord parse_cve_record(std::string_view bytes) {
  json doc = json::parse(bytes, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw MalformedRecord("unparseable record document");

  RawCveRecord record;

  // CVE Record v5 keeps the id under cveMetadata; accept a flat id too.
  if (doc.contains("cveMetadata") && doc["cveMetadata"].is_object()) {
    const json& meta = doc["cveMetadata"];
    record.cve_id = meta.value("cveId", "");
    if (meta.contains("datePublished") && meta["datePublished"].is_string())
      record.published_year = year_from_date(meta["datePublished"]);
  }
  if (record.cve_id.empty()) record.cve_id = doc.value("cveId", "");
  if (record.cve_id.empty()) record.cve_id = doc.value("id", "");
  if (record.cve_id.empty()) throw MalformedRecord("record has no CVE id");

  if (!record.published_year && doc.contains("datePublished") &&
      doc["datePublished"].is_string())
    record.published_year = year_from_date(doc["datePublished"]);

  if (doc.contains("containers") && doc["containers"].is_object()) {
    const json& containers = doc["containers"];
    if (containers.contains("cna") && containers["cna"].is_object()) {
      const json& cna = containers["cna"];
      if (cna.contains("descriptions"))
        collect_descriptions(cna["descriptions"], record);
      if (cna.contains("metrics")) collect_v31_vector(cna["metrics"], record);
    }
    // ADP containers often carry the CVSS data when the CNA omitted it.
    if (containers.contains("adp") && containers["adp"].is_array()) {
      for (const auto& adp : containers["adp"]) {
        if (adp.is_object() && adp.contains("metrics"))
          collect_v31_vector(adp["metrics"], record);
      }
    }
  }
  if (record.descriptions.empty() && doc.contains("descriptions"))
    collect_descriptions(doc["descriptions"], record);
  if (!record.cvss31_vector && doc.contains("metrics"))
    collect_v31_vector(doc["metrics"], record);

  return record;
}

bool detect_english(std::string_view text, std::string_view lang_tag) {
  if (!lang_tag.empty()) {
    const std::string lower = util::to_lower(lang_tag);
    return util::starts_with(lower, "en");
  }

  // Heuristic: >= 90% ASCII bytes and >= 2 distinct common stopwords.
  if (text.empty()) return false;
  std::size_t ascii = 0;
  for (char c : text)
    if (static_cast<unsigned char>(c) < 0x80) ++ascii;
  if (static_cast<double>(ascii) < 0.9 * static_cast<double>(text.size()))
    return false;

  static const std::set<std::string> kStopwords = {
      "the", "be", "to", "of", "and", "a", "in", "that", "have", "it",
      "is", "for", "not", "on", "with", "as", "at", "this", "but", "by"};
  std::set<std::string> seen;
  for (const std::string& token : util::word_tokens(text)) {
    if (kStopwords.count(token)) seen.insert(token);
    if (seen.size() >= 2) return true;
  }
  return false;
}

std::variant<CveEntry, RejectionReason> to_entry(const RawCveRecord& record) {
  if (!valid_cve_id(record.cve_id)) return RejectionReason::Malformed;

  // A record whose publication year cannot be established is treated as
  // pre-2019: the cutoff exists because v3.1 scoring only began then.
  if (!record.published_year || *record.published_year < 2019)
    return RejectionReason::Pre2019;

  if (!record.cvss31_vector) return RejectionReason::NotV31;
  cvss::BaseVector truth;
  try {
    truth = cvss::parse_vector_string(*record.cvss31_vector);
  } catch (const MalformedVector&) {
    return RejectionReason::IncompleteMetrics;
  }

  bool any_nonempty = false;
  for (const auto& [lang, text] : record.descriptions) {
    if (!util::trim(text).empty()) {
      any_nonempty = true;
      break;
    }
  }
  if (!any_nonempty) return RejectionReason::EmptyDescription;

  for (const auto& [lang, text] : record.descriptions) {
    const std::string_view trimmed = util::trim(text);
    if (trimmed.empty()) continue;
    if (detect_english(trimmed, lang)) {
      CveEntry entry;
      entry.cve_id = record.cve_id;
      entry.description = std::string(text);
      entry.truth = truth;
      entry.published_year = *record.published_year;
      return entry;
    }
  }
  return RejectionReason::NonEnglish;
}

std::pair<std::vector<CveEntry>, FilterReport> build_dataset(
    const std::vector<RawCveRecord>& records) {
  std::vector<CveEntry> entries;
  FilterReport report;
  for (const RawCveRecord& record : records) {
    auto result = to_entry(record);
    if (std::holds_alternative<CveEntry>(result)) {
      entries.push_back(std::move(std::get<CveEntry>(result)));
      ++report.kept;
    } else {
      report.add(std::get<RejectionReason>(result));
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const CveEntry& a, const CveEntry& b) {
                     return a.cve_id < b.cve_id;
                   });
  return {std::move(entries), report};
}

void save_dataset(const std::vector<CveEntry>& entries,
                  const std::filesystem::path& path) {
  std::string out;
  for (const CveEntry& e : entries) {
    json line = {{"cve_id", e.cve_id},
                 {"description", e.description},
                 {"vector", cvss::format_vector_string(e.truth)},
                 {"year", e.published_year}};
    out += line.dump();
    out.push_back('\n');
  }
  util::write_file(path, out);
}

std::vector<CveEntry> load_dataset(const std::filesystem::path& path) {
  const std::string content = util::read_file(path);
  std::vector<CveEntry> entries;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      throw SchemaMismatch("dataset line " + std::to_string(line_no) +
                           ": not a JSON object");
    for (const char* key : {"cve_id", "description", "vector", "year"})
      if (!doc.contains(key))
        throw SchemaMismatch("dataset line " + std::to_string(line_no) +
                             ": missing field " + key);
    if (!doc["cve_id"].is_string() || !doc["description"].is_string() ||
        !doc["vector"].is_string() || !doc["year"].is_number_integer())
      throw SchemaMismatch("dataset line " + std::to_string(line_no) +
                           ": wrong field type");
    CveEntry entry;
    entry.cve_id = doc["cve_id"].get<std::string>();
    entry.description = doc["description"].get<std::string>();
    entry.truth = cvss::parse_vector_string(doc["vector"].get<std::string>());
    entry.published_year = doc["year"].get<int>();
    entries.push_back(std::move(entry));
  }
  return entries;
}

IngestResult ingest_path(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw IoFailure("no such path: " + path.string());

  std::vector<RawCveRecord> records;
  long long parse_failures = 0;

  auto consume_document = [&](std::string_view bytes) {
    try {
      records.push_back(parse_cve_record(bytes));
    } catch (const MalformedRecord&) {
      ++parse_failures;
    }
  };

  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".json")
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) consume_document(util::read_file(file));
  } else {
    // One file holding a stream of concatenated JSON documents.
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open: " + path.string());
    in >> std::ws;
    while (in && !in.eof()) {
      try {
        json doc;
        in >> doc;
        consume_document(doc.dump());
      } catch (const json::exception&) {
        // Trailing garbage; the stream cannot be resynchronized.
        ++parse_failures;
        break;
      }
      in >> std::ws;
    }
  }

  IngestResult result;
  auto [entries, report] = build_dataset(records);
  result.entries = std::move(entries);
  result.report = report;
  result.report.malformed += parse_failures;
  return result;
}

}  // namespace cvsslab::ingest
