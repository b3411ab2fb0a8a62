#include "volcast/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "volcast/table_io.hpp"

namespace volcast::ingest {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxMessages = 20;

void note(IngestDiagnostics* diag, std::string msg) {
  if (diag && diag->messages.size() < kMaxMessages) diag->messages.push_back(std::move(msg));
}

bool contains_ci(std::string_view hay, std::string_view needle) {
  auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end(), [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  });
  return it != hay.end();
}

const json* find(const json& obj, std::string_view key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

const json* find_path(const json& obj, std::initializer_list<std::string_view> keys) {
  const json* cur = &obj;
  for (auto k : keys) {
    cur = find(*cur, k);
    if (!cur) return nullptr;
  }
  return cur;
}

struct FieldReader {
  IngestDiagnostics* diag;

  std::int64_t integer(const json* v, const char* name) const {
    if (v && v->is_number_integer()) return v->get<std::int64_t>();
    if (v && v->is_number()) return static_cast<std::int64_t>(v->get<double>());
    defaulted(name);
    return 0;
  }

  bool boolean(const json* v, const char* name) const {
    if (v && v->is_boolean()) return v->get<bool>();
    defaulted(name);
    return false;
  }

  void defaulted(const char* name) const {
    if (!diag) return;
    ++diag->defaulted_fields;
    note(diag, std::string("defaulted field ") + name);
  }
};

struct MediaCounts {
  std::int64_t gif = 0, photo = 0, video = 0;
  bool found = false;
};

MediaCounts count_media(const json& tweet) {
  MediaCounts c;
  const json* media = find_path(tweet, {"extended_tweet", "extended_entities", "media"});
  if (!media) media = find_path(tweet, {"extended_entities", "media"});
  if (!media) media = find_path(tweet, {"entities", "media"});
  if (!media || !media->is_array()) return c;
  c.found = true;
  for (const auto& m : *media) {
    const json* type = find(m, "type");
    if (!type || !type->is_string()) continue;
    const auto& t = type->get_ref<const std::string&>();
    if (t == "photo") ++c.photo;
    else if (t == "video") ++c.video;
    else if (t == "animated_gif") ++c.gif;
  }
  return c;
}

std::string tweet_text(const json& tweet) {
  for (auto path : {std::initializer_list<std::string_view>{"extended_tweet", "full_text"},
                    std::initializer_list<std::string_view>{"full_text"},
                    std::initializer_list<std::string_view>{"text"}}) {
    if (const json* t = find_path(tweet, path); t && t->is_string()) return t->get<std::string>();
  }
  return {};
}

std::int64_t created_at(const json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_string()) return parse_tweet_time(v.get_ref<const std::string&>());
  throw std::invalid_argument("created_at is neither a string nor an integer");
}

TweetRecord from_flat(const json& obj, const FieldReader& rd) {
  TweetRecord r;
  r.created_at = created_at(obj.at("created_at"));
  r.gif_count = rd.integer(find(obj, "gif_count"), "gif_count");
  r.photo_count = rd.integer(find(obj, "photo_count"), "photo_count");
  r.video_count = rd.integer(find(obj, "video_count"), "video_count");
  r.is_quote_status = rd.boolean(find(obj, "is_quote_status"), "is_quote_status");
  r.possibly_sensitive = rd.boolean(find(obj, "possibly_sensitive"), "possibly_sensitive");
  if (const json* t = find(obj, "tweet_text"); t && t->is_string()) r.tweet_text = t->get<std::string>();
  r.favourites_count = rd.integer(find(obj, "favourites_count"), "favourites_count");
  r.followers_count = rd.integer(find(obj, "followers_count"), "followers_count");
  r.friends_count = rd.integer(find(obj, "friends_count"), "friends_count");
  r.listed_count = rd.integer(find(obj, "listed_count"), "listed_count");
  r.verified = rd.boolean(find(obj, "verified"), "verified");
  r.default_profile = rd.boolean(find(obj, "default_profile"), "default_profile");
  r.default_profile_image = rd.boolean(find(obj, "default_profile_image"), "default_profile_image");
  return r;
}

TweetRecord from_raw(const json& obj, const FieldReader& rd) {
  TweetRecord r;
  r.created_at = created_at(obj.at("created_at"));

  MediaCounts media = count_media(obj);
  if (!media.found) {
    if (const json* rt = find(obj, "retweeted_status")) media = count_media(*rt);
  }
  r.gif_count = media.gif;
  r.photo_count = media.photo;
  r.video_count = media.video;

  // Quotes, retweets and replies all collapse into one flag.
  const json* quote_flag = find(obj, "is_quote_status");
  r.is_quote_status = (quote_flag && quote_flag->is_boolean() && quote_flag->get<bool>()) ||
                      find(obj, "retweeted_status") || find(obj, "quoted_status") ||
                      find(obj, "in_reply_to_status_id") || find(obj, "in_reply_to_status_id_str");
  // Absent unless the tweet carries a link; absence means not sensitive.
  const json* sensitive = find(obj, "possibly_sensitive");
  r.possibly_sensitive = sensitive && sensitive->is_boolean() && sensitive->get<bool>();
  r.tweet_text = tweet_text(obj);

  static const json empty = json::object();
  const json* user = find(obj, "user");
  const json& u = user ? *user : empty;
  r.favourites_count = rd.integer(find(u, "favourites_count"), "user.favourites_count");
  r.followers_count = rd.integer(find(u, "followers_count"), "user.followers_count");
  r.friends_count = rd.integer(find(u, "friends_count"), "user.friends_count");
  r.listed_count = rd.integer(find(u, "listed_count"), "user.listed_count");
  r.verified = rd.boolean(find(u, "verified"), "user.verified");
  r.default_profile = rd.boolean(find(u, "default_profile"), "user.default_profile");
  r.default_profile_image = rd.boolean(find(u, "default_profile_image"), "user.default_profile_image");
  return r;
}

const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

}  // namespace

bool filter_relevant(std::string_view text, const RelevanceRules& rules) {
  const bool ticker = rules.ticker_case_sensitive ? text.find("BTC") != std::string_view::npos
                                                  : contains_ci(text, "BTC");
  // "$BTC" contains "BTC", so the cashtag is covered by the ticker test.
  const bool name = rules.name_case_sensitive ? text.find("Bitcoin") != std::string_view::npos
                                              : contains_ci(text, "Bitcoin");
  return ticker || name;
}

std::int64_t parse_tweet_time(std::string_view s) {
  // Twitter: "Wed Oct 10 20:19:24 +0000 2018"
  if (s.size() == 30 && s[3] == ' ' && s[19] == ' ' && s.substr(20, 5) == "+0000") {
    int month = 0;
    for (int m = 0; m < 12; ++m)
      if (s.substr(4, 3) == kMonths[m]) month = m + 1;
    if (month == 0) throw std::invalid_argument("bad month in '" + std::string(s) + "'");
    const std::string iso = std::string(s.substr(26, 4)) + "-" + (month < 10 ? "0" : "") + std::to_string(month) +
                            "-" + std::string(s.substr(8, 2)) + "T" + std::string(s.substr(11, 8)) + "Z";
    return io::parse_utc(iso);
  }
  return io::parse_utc(s);
}

std::optional<TweetRecord> refactor_prune(std::string_view line, IngestDiagnostics* diag) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    note(diag, std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
  if (!obj.is_object()) {
    note(diag, "line is not a JSON object");
    return std::nullopt;
  }
  const FieldReader rd{diag};
  try {
    if (!find(obj, "created_at")) throw std::invalid_argument("missing created_at");
    const bool flat = obj.contains("tweet_text") && !obj.contains("user");
    return flat ? from_flat(obj, rd) : from_raw(obj, rd);
  } catch (const std::exception& e) {
    note(diag, std::string("invalid tweet: ") + e.what());
    return std::nullopt;
  }
}

std::string to_flat_json(const TweetRecord& r) {
  json j = json::object();
  j["created_at"] = io::format_utc(r.created_at);
  j["gif_count"] = r.gif_count;
  j["photo_count"] = r.photo_count;
  j["video_count"] = r.video_count;
  j["is_quote_status"] = r.is_quote_status;
  j["possibly_sensitive"] = r.possibly_sensitive;
  j["tweet_text"] = r.tweet_text;
  j["favourites_count"] = r.favourites_count;
  j["followers_count"] = r.followers_count;
  j["friends_count"] = r.friends_count;
  j["listed_count"] = r.listed_count;
  j["verified"] = r.verified;
  j["default_profile"] = r.default_profile;
  j["default_profile_image"] = r.default_profile_image;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

void ingest_stream(std::istream& in, const VaderLexicon& lexicon, const IngestOptions& options,
                   std::vector<TweetRecord>& out, IngestDiagnostics& diag) {
  std::string line;
  while (std::getline(in, line)) {
    ++diag.lines;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      ++diag.blank;
      continue;
    }
    auto rec = refactor_prune(line, &diag);
    if (!rec) {
      ++diag.rejected;
      continue;
    }
    if (options.filter && !filter_relevant(rec->tweet_text, options.rules)) {
      ++diag.irrelevant;
      continue;
    }
    if (options.score_sentiment) {
      rec->vader_compound = round_decimal(vader_scores(rec->tweet_text, lexicon).compound, 4);
    }
    ++diag.accepted;
    out.push_back(std::move(*rec));
  }
}

void sort_records(std::vector<TweetRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const TweetRecord& a, const TweetRecord& b) { return a.created_at < b.created_at; });
}

std::string csv_header() {
  std::string h;
  for (const char* f : kSchemaFields) {
    h += f;
    h += ',';
  }
  return h + "vader_compound";
}

void write_csv(std::ostream& os, const std::vector<TweetRecord>& records) {
  os << csv_header() << '\n';
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  for (const auto& r : records) {
    io::write_csv_row(os, {io::format_utc(r.created_at), std::to_string(r.gif_count), std::to_string(r.photo_count),
                           std::to_string(r.video_count), b(r.is_quote_status), b(r.possibly_sensitive), r.tweet_text,
                           std::to_string(r.favourites_count), std::to_string(r.followers_count),
                           std::to_string(r.friends_count), std::to_string(r.listed_count), b(r.verified),
                           b(r.default_profile), b(r.default_profile_image), io::format_double(r.vader_compound)});
  }
}

void write_sorted(std::vector<TweetRecord> records, const std::filesystem::path& path) {
  sort_records(records);
  std::ostringstream os;
  write_csv(os, records);
  io::write_file(path, os.str());
}

std::vector<TweetRecord> read_records(const std::filesystem::path& path) {
  const auto rows = io::read_csv(path);
  if (rows.empty() || rows[0].size() != 15) throw std::runtime_error("tweet table: bad or missing header in '" + path.string() + "'");
  std::vector<TweetRecord> out;
  out.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 15) {
      throw std::runtime_error("tweet table: row " + std::to_string(i + 1) + " has " + std::to_string(f.size()) +
                               " fields");
    }
    TweetRecord r;
    r.created_at = io::parse_utc(f[0]);
    r.gif_count = io::parse_int(f[1]);
    r.photo_count = io::parse_int(f[2]);
    r.video_count = io::parse_int(f[3]);
    r.is_quote_status = io::parse_bool(f[4]);
    r.possibly_sensitive = io::parse_bool(f[5]);
    r.tweet_text = f[6];
    r.favourites_count = io::parse_int(f[7]);
    r.followers_count = io::parse_int(f[8]);
    r.friends_count = io::parse_int(f[9]);
    r.listed_count = io::parse_int(f[10]);
    r.verified = io::parse_bool(f[11]);
    r.default_profile = io::parse_bool(f[12]);
    r.default_profile_image = io::parse_bool(f[13]);
    r.vader_compound = io::parse_double(f[14]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace volcast::ingest
