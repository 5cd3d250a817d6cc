#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cvsslab::util {

// --- hashing / encoding ---------------------------------------------------

std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);
std::string base64_decode(std::string_view encoded);  // throws SchemaMismatch on bad input

// --- strings ----------------------------------------------------------------

std::string_view trim(std::string_view s);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool starts_with(std::string_view s, std::string_view prefix);

// Lowercased alphanumeric token stream ("TLS 1.2 parser" -> tls, 1, 2, parser).
std::vector<std::string> word_tokens(std::string_view text);

// Replaces every CVE identifier (CVE-\d{4}-\d{4,}, case-insensitive) and any
// leftover "CVE-" fragment with `replacement`.
std::string redact_cve_ids(std::string_view text, std::string_view replacement);

// --- numeric formatting -----------------------------------------------------

// Fixed-point decimal, locale independent; the workhorse for all CSV output
// so identical runs produce identical bytes.
std::string format_double(double value, int decimals);

// --- deterministic randomness ------------------------------------------------

// Thin wrappers around mt19937_64 that avoid std distributions, whose output
// is implementation defined; these are stable across platforms.
std::size_t rand_index(std::mt19937_64& rng, std::size_t n);  // [0, n)
double rand_unit(std::mt19937_64& rng);                       // [0, 1)
double rand_normal(std::mt19937_64& rng);
void shuffle_indices(std::mt19937_64& rng, std::vector<std::size_t>& indices);

// --- file io ------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);  // throws IoFailure
void write_file(const std::filesystem::path& path, std::string_view content);

// --- csv ------------------------------------------------------------------------

std::string csv_escape(std::string_view field);
std::string csv_join(const std::vector<std::string>& fields);
// One logical line (no embedded newlines supported); handles quoted fields.
std::vector<std::string> csv_split(std::string_view line);

}  // namespace cvsslab::util
