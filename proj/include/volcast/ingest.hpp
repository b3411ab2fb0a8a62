#pragma once

// Tweet ingestion: relevance filter, raw-JSON flattening into the pruned
// record schema, sentiment annotation and the typed, time-sorted CSV.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "volcast/vader.hpp"

namespace volcast::ingest {

struct TweetRecord {
  std::int64_t created_at = 0;  // seconds since epoch, UTC
  std::int64_t gif_count = 0;
  std::int64_t photo_count = 0;
  std::int64_t video_count = 0;
  bool is_quote_status = false;
  bool possibly_sensitive = false;
  std::string tweet_text;
  std::int64_t favourites_count = 0;
  std::int64_t followers_count = 0;
  std::int64_t friends_count = 0;
  std::int64_t listed_count = 0;
  bool verified = false;
  bool default_profile = false;
  bool default_profile_image = false;
  // Derived at ingest and stored next to the schema fields; rounded to 4
  // decimals like the reference scorer reports it.
  double vader_compound = 0.0;

  bool operator==(const TweetRecord&) const = default;
};

/// The 14 schema fields, in storage order.
inline constexpr const char* kSchemaFields[] = {
    "created_at",       "gif_count",       "photo_count",     "video_count",   "is_quote_status",
    "possibly_sensitive", "tweet_text",    "favourites_count", "followers_count", "friends_count",
    "listed_count",     "verified",        "default_profile", "default_profile_image"};

struct RelevanceRules {
  bool ticker_case_sensitive = true;  // "BTC", "$BTC"
  bool name_case_sensitive = false;   // "Bitcoin"
};

bool filter_relevant(std::string_view text, const RelevanceRules& rules = {});

struct IngestDiagnostics {
  std::size_t lines = 0;
  std::size_t blank = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;    // malformed JSON, non-object, missing/invalid created_at
  std::size_t irrelevant = 0;  // well-formed but failed the relevance filter
  std::size_t defaulted_fields = 0;
  std::vector<std::string> messages;  // first few reject reasons
};

/// Parses "Wed Oct 10 20:19:24 +0000 2018" or ISO-8601 UTC.
std::int64_t parse_tweet_time(std::string_view text);

/// Flattens one raw tweet (general, quote, retweet or reply; or an already
/// flat record) into the schema. Returns nullopt for malformed lines and
/// records the reason in `diag` when given. The sentiment column is left 0.
std::optional<TweetRecord> refactor_prune(std::string_view json_line, IngestDiagnostics* diag = nullptr);

/// Flat JSON form of a record (schema fields only); refactor_prune of it is
/// the identity.
std::string to_flat_json(const TweetRecord& r);

struct IngestOptions {
  bool filter = true;
  RelevanceRules rules;
  bool score_sentiment = true;
};

/// Reads JSON Lines from `in`, appending accepted records to `out`.
void ingest_stream(std::istream& in, const VaderLexicon& lexicon, const IngestOptions& options,
                   std::vector<TweetRecord>& out, IngestDiagnostics& diag);

/// Stable sort by created_at.
void sort_records(std::vector<TweetRecord>& records);

std::string csv_header();
void write_csv(std::ostream& os, const std::vector<TweetRecord>& sorted_records);
/// Sorts (stably) then writes.
void write_sorted(std::vector<TweetRecord> records, const std::filesystem::path& path);
std::vector<TweetRecord> read_records(const std::filesystem::path& path);

}  // namespace volcast::ingest
