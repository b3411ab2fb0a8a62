#include "volcast/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "volcast/table_io.hpp"

namespace volcast::features {

std::vector<double> log_returns(std::span<const double> prices) {
  if (prices.size() < 2) throw std::invalid_argument("log_returns: need at least 2 prices");
  for (double p : prices)
    if (!(p > 0.0)) throw std::invalid_argument("log_returns: non-positive price");
  std::vector<double> r(prices.size() - 1);
  for (std::size_t t = 1; t < prices.size(); ++t) r[t - 1] = std::log(prices[t]) - std::log(prices[t - 1]);
  return r;
}

double realized_volatility(std::span<const double> day_returns) {
  if (day_returns.size() != kBinsPerDay)
    throw std::invalid_argument("realized_volatility: expected 96 bins, got " + std::to_string(day_returns.size()));
  double s = 0.0;
  for (double r : day_returns) s += r * r;
  return std::sqrt(s);
}

namespace {

constexpr const char* kColumnNames[kColumnCount] = {
    "count",          "vader_compound",  "gif_count",       "photo_count",   "video_count",
    "is_quote_status", "possibly_sensitive", "favourites_count", "followers_count", "friends_count",
    "listed_count",   "verified",        "default_profile", "default_profile_image"};

struct BinAccumulator {
  std::int64_t n = 0;
  double vader = 0.0;
  std::array<std::int64_t, kColumnCount> ints{};

  void add(const ingest::TweetRecord& r) {
    ++n;
    vader += r.vader_compound;
    ints[kGif] += r.gif_count;
    ints[kPhoto] += r.photo_count;
    ints[kVideo] += r.video_count;
    ints[kIsQuote] += r.is_quote_status;
    ints[kSensitive] += r.possibly_sensitive;
    ints[kFavourites] += r.favourites_count;
    ints[kFollowers] += r.followers_count;
    ints[kFriends] += r.friends_count;
    ints[kListed] += r.listed_count;
    ints[kVerified] += r.verified;
    ints[kDefaultProfile] += r.default_profile;
    ints[kDefaultProfileImage] += r.default_profile_image;
  }

  std::array<double, kColumnCount> values() const {
    std::array<double, kColumnCount> v{};
    if (n == 0) return v;
    const double dn = static_cast<double>(n);
    v[kCount] = dn;
    v[kVader] = vader / dn;
    for (std::size_t c = kGif; c < kColumnCount; ++c) v[c] = static_cast<double>(ints[c]) / dn;
    return v;
  }
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

const char* column_name(std::size_t column) {
  if (column >= kColumnCount) throw std::out_of_range("column_name: bad column");
  return kColumnNames[column];
}

std::vector<FeatureBin> bin_tweets(std::span<const ingest::TweetRecord> sorted_records, std::int64_t grid_start,
                                   std::size_t bins) {
  std::vector<BinAccumulator> acc(bins);
  const std::int64_t end = grid_start + static_cast<std::int64_t>(bins) * kBinSeconds;
  for (const auto& r : sorted_records) {
    if (r.created_at < grid_start || r.created_at >= end) continue;
    acc[static_cast<std::size_t>((r.created_at - grid_start) / kBinSeconds)].add(r);
  }
  std::vector<FeatureBin> out(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    out[i].start = grid_start + static_cast<std::int64_t>(i) * kBinSeconds;
    out[i].values = acc[i].values();
  }
  return out;
}

// ---- feature sets -------------------------------------------------------------

std::vector<std::size_t> FeatureSet::columns() const {
  std::vector<std::size_t> c;
  if (count) c.push_back(kCount);
  if (vader) c.push_back(kVader);
  if (tweet)
    for (std::size_t i = kGif; i <= kSensitive; ++i) c.push_back(i);
  if (user)
    for (std::size_t i = kFavourites; i <= kDefaultProfileImage; ++i) c.push_back(i);
  return c;
}

std::string FeatureSet::label() const {
  std::vector<std::string> parts;
  if (count) parts.push_back("Count");
  if (vader) parts.push_back("VADER");
  if (tweet) parts.push_back("Tweet");
  if (user) parts.push_back("User");
  if (parts.empty()) return "none";
  std::string s = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) s += ", " + parts[i];
  return s;
}

FeatureSet FeatureSet::parse(const std::string& text) {
  FeatureSet fs;
  std::string token;
  auto flush = [&] {
    std::string t;
    for (char ch : token)
      if (!std::isspace(static_cast<unsigned char>(ch))) t += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    token.clear();
    if (t.empty() || t == "none") return;
    if (t == "count") fs.count = true;
    else if (t == "vader") fs.vader = true;
    else if (t == "tweet") fs.tweet = true;
    else if (t == "user") fs.user = true;
    else if (t == "all") fs = FeatureSet{true, true, true, true};
    else throw std::invalid_argument("unknown feature set '" + t + "' (expected Count, VADER, Tweet, User)");
  };
  for (char ch : text) {
    if (ch == ',' || ch == '+' || ch == ';') flush();
    else token += ch;
  }
  flush();
  return fs;
}

std::vector<FeatureSet> all_feature_subsets() {
  // {count, vader, tweet, user}
  return {
      {false, false, false, true},  {false, false, true, false}, {false, true, false, false},
      {true, false, false, false},  {false, true, true, true},   {false, true, true, false},
      {false, true, false, true},   {false, false, true, true},  {true, false, true, true},
      {true, false, true, false},   {true, false, false, true},  {true, true, true, true},
      {true, true, true, false},    {true, true, false, true},   {true, true, false, false},
  };
}

// ---- candles --------------------------------------------------------------------

std::vector<Candle> read_candles(const std::filesystem::path& path) {
  auto rows = io::read_csv(path);
  if (rows.empty()) throw std::invalid_argument("candles: empty file " + path.string());
  const auto& h = rows[0];
  if (h.size() < 2 || h[0] != "timestamp" || h[1] != "close")
    throw std::invalid_argument("candles: header must start with timestamp,close");
  std::vector<Candle> out;
  out.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string where = path.string() + " row " + std::to_string(i + 1);
    if (row.size() < 2) throw std::invalid_argument("candles: short row at " + where);
    Candle c;
    try {
      c.timestamp = io::parse_utc(row[0]);
    } catch (const std::invalid_argument&) {
      c.timestamp = io::parse_int(row[0]);
    }
    c.close = io::parse_double(row[1]);
    if (c.timestamp % kBinSeconds != 0) throw std::invalid_argument("candles: timestamp off the 15-minute grid at " + where);
    if (!(c.close > 0.0) || !std::isfinite(c.close)) throw std::invalid_argument("candles: non-positive price at " + where);
    if (!out.empty() && c.timestamp <= out.back().timestamp)
      throw std::invalid_argument("candles: timestamps not strictly increasing at " + where);
    out.push_back(c);
  }
  return out;
}

void write_candles(const std::filesystem::path& path, std::span<const Candle> candles) {
  std::ostringstream os;
  os << "timestamp,close\n";
  for (const auto& c : candles) os << io::format_utc(c.timestamp) << ',' << io::format_double(c.close) << '\n';
  io::write_file(path, os.str());
}

// ---- panel ---------------------------------------------------------------------

std::span<const double> DailyPanel::day_returns(std::size_t d) const {
  return std::span<const double>(returns).subspan(d * kBinsPerDay, kBinsPerDay);
}

std::span<const double> DailyPanel::day_features(std::size_t d) const {
  return std::span<const double>(features).subspan(d * kBinsPerDay * kColumnCount, kBinsPerDay * kColumnCount);
}

DailyPanel build_panel(std::span<const Candle> candles, std::span<const ingest::TweetRecord> sorted_records,
                       const PanelOptions& options, PanelDiagnostics* diag) {
  PanelDiagnostics local;
  PanelDiagnostics& dg = diag ? *diag : local;
  DailyPanel panel;
  if (candles.empty()) return panel;
  for (std::size_t i = 0; i < candles.size(); ++i) {
    if (candles[i].timestamp % kBinSeconds != 0) throw std::invalid_argument("build_panel: candle off the grid");
    if (!(candles[i].close > 0.0)) throw std::invalid_argument("build_panel: non-positive price");
    if (i > 0 && candles[i].timestamp <= candles[i - 1].timestamp)
      throw std::invalid_argument("build_panel: candle timestamps not strictly increasing");
  }

  const std::int64_t first_day = floor_div(candles.front().timestamp, kDaySeconds) * kDaySeconds;
  const std::int64_t last_day = floor_div(candles.back().timestamp, kDaySeconds) * kDaySeconds;
  const std::size_t n_days = static_cast<std::size_t>((last_day - first_day) / kDaySeconds) + 1;
  const std::size_t n_bins = n_days * kBinsPerDay;

  // Closing price on every grid point from one bin before the first day.
  std::vector<double> close(n_bins + 1, 0.0);
  std::vector<char> filled(n_bins + 1, 1);
  {
    std::size_t ci = 0;
    double last = 0.0;
    for (std::size_t g = 0; g <= n_bins; ++g) {
      const std::int64_t ts = first_day + (static_cast<std::int64_t>(g) - 1) * kBinSeconds;
      while (ci < candles.size() && candles[ci].timestamp < ts) last = candles[ci++].close;
      if (ci < candles.size() && candles[ci].timestamp == ts) {
        last = candles[ci++].close;
        filled[g] = 0;
      }
      close[g] = last;  // 0 before the first candle
    }
  }

  const auto bins = bin_tweets(sorted_records, first_day, n_bins);
  for (const auto& r : sorted_records)
    if (r.created_at < first_day || r.created_at >= first_day + static_cast<std::int64_t>(n_bins) * kBinSeconds)
      ++dg.tweets_outside_grid;

  for (std::size_t d = 0; d < n_days; ++d) {
    std::size_t gaps = 0;
    std::array<double, kBinsPerDay> ret{};
    for (std::size_t k = 0; k < kBinsPerDay; ++k) {
      const std::size_t g = d * kBinsPerDay + k + 1;
      const bool have_prev = close[g - 1] > 0.0;
      if (filled[g] || !have_prev) {
        ++gaps;
        ret[k] = (have_prev && close[g] > 0.0) ? std::log(close[g]) - std::log(close[g - 1]) : 0.0;
      } else {
        ret[k] = std::log(close[g]) - std::log(close[g - 1]);
      }
    }
    const std::int64_t day = first_day + static_cast<std::int64_t>(d) * kDaySeconds;
    if (gaps > options.max_gaps_per_day) {
      dg.dropped_days.push_back(day);
      continue;
    }
    dg.filled_bins += gaps;
    panel.days.push_back(day);
    panel.returns.insert(panel.returns.end(), ret.begin(), ret.end());
    for (std::size_t k = 0; k < kBinsPerDay; ++k) {
      const auto& v = bins[d * kBinsPerDay + k].values;
      panel.features.insert(panel.features.end(), v.begin(), v.end());
    }
  }
  return panel;
}

std::string panel_csv_header() {
  std::string h = "timestamp,log_return";
  for (const char* c : kColumnNames) h += std::string(",") + c;
  return h;
}

void write_panel(const std::filesystem::path& path, const DailyPanel& panel) {
  std::ostringstream os;
  os << panel_csv_header() << '\n';
  for (std::size_t d = 0; d < panel.size(); ++d) {
    auto ret = panel.day_returns(d);
    auto feat = panel.day_features(d);
    for (std::size_t k = 0; k < kBinsPerDay; ++k) {
      os << io::format_utc(panel.days[d] + static_cast<std::int64_t>(k) * kBinSeconds) << ','
         << io::format_double(ret[k]);
      for (std::size_t c = 0; c < kColumnCount; ++c) os << ',' << io::format_double(feat[k * kColumnCount + c]);
      os << '\n';
    }
  }
  io::write_file(path, os.str());
}

DailyPanel read_panel(const std::filesystem::path& path, std::size_t* partial_rows) {
  auto rows = io::read_csv(path);
  if (rows.empty()) throw std::invalid_argument("feature file is empty: " + path.string());
  {
    std::string h;
    for (std::size_t i = 0; i < rows[0].size(); ++i) h += (i ? "," : "") + rows[0][i];
    if (h != panel_csv_header()) throw std::invalid_argument("feature file has an unexpected header: " + path.string());
  }
  DailyPanel panel;
  std::size_t partial = 0;
  std::size_t i = 1;
  while (i < rows.size()) {
    const std::int64_t ts0 = io::parse_utc(rows[i][0]);
    const std::int64_t day = floor_div(ts0, kDaySeconds) * kDaySeconds;
    std::size_t j = i;
    std::vector<double> ret, feat;
    bool complete = true;
    for (std::size_t k = 0; k < kBinsPerDay; ++k, ++j) {
      if (j >= rows.size()) {
        complete = false;
        break;
      }
      const auto& row = rows[j];
      const std::string where = path.string() + " row " + std::to_string(j + 1);
      if (row.size() != 2 + kColumnCount) throw std::invalid_argument("feature file: wrong field count at " + where);
      const std::int64_t ts = io::parse_utc(row[0]);
      if (ts != day + static_cast<std::int64_t>(k) * kBinSeconds) {
        complete = false;
        break;
      }
      ret.push_back(io::parse_double(row[1]));
      for (std::size_t c = 0; c < kColumnCount; ++c) feat.push_back(io::parse_double(row[2 + c]));
    }
    if (!complete) {
      // A day must start at midnight and run to 23:45 without holes.
      if (j < rows.size()) throw std::invalid_argument("feature file: incomplete day " + io::format_date(day));
      partial += j - i;
      break;
    }
    if (!panel.days.empty() && day <= panel.days.back())
      throw std::invalid_argument("feature file: days out of order at " + io::format_date(day));
    panel.days.push_back(day);
    panel.returns.insert(panel.returns.end(), ret.begin(), ret.end());
    panel.features.insert(panel.features.end(), feat.begin(), feat.end());
    i = j;
  }
  if (partial_rows) *partial_rows = partial;
  return panel;
}

// ---- scaler --------------------------------------------------------------------

Scaler Scaler::fit(std::span<const double> rows, std::size_t columns) {
  if (columns == 0) throw std::invalid_argument("Scaler::fit: zero columns");
  if (rows.empty() || rows.size() % columns != 0) throw std::invalid_argument("Scaler::fit: ragged or empty matrix");
  Scaler s;
  s.min.assign(columns, 0.0);
  s.range.assign(columns, 0.0);
  std::vector<double> mx(columns);
  for (std::size_t c = 0; c < columns; ++c) s.min[c] = mx[c] = rows[c];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t c = i % columns;
    if (!std::isfinite(rows[i])) throw std::invalid_argument("Scaler::fit: non-finite value");
    s.min[c] = std::min(s.min[c], rows[i]);
    mx[c] = std::max(mx[c], rows[i]);
  }
  for (std::size_t c = 0; c < columns; ++c) {
    s.range[c] = mx[c] - s.min[c];
    if (!(s.range[c] > 0.0)) {
      s.range[c] = 1.0;
      s.degenerate_columns.push_back(c);
    }
  }
  return s;
}

std::vector<double> Scaler::transform(std::span<const double> rows) const {
  if (rows.size() % columns() != 0) throw std::invalid_argument("Scaler::transform: ragged matrix");
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = transform(rows[i], i % columns());
  return out;
}

std::vector<double> Scaler::inverse(std::span<const double> rows) const {
  if (rows.size() % columns() != 0) throw std::invalid_argument("Scaler::inverse: ragged matrix");
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = inverse(rows[i], i % columns());
  return out;
}

// ---- windows -------------------------------------------------------------------

WindowSet make_day_windows(const DailyPanel& panel, const FeatureSet& feature_set, const Split& split,
                           std::size_t first_day) {
  const std::size_t total = split.train_days + split.test_days;
  if (split.train_days < 2) throw std::invalid_argument("make_day_windows: need at least 2 training days");
  if (first_day + total > panel.size())
    throw std::invalid_argument("make_day_windows: need " + std::to_string(first_day + total) + " complete days, have " +
                                std::to_string(panel.size()));
  WindowSet ws;
  ws.feature_set = feature_set;
  const auto cols = feature_set.columns();
  const std::size_t F = cols.size();

  const std::size_t train_end = first_day + split.train_days;
  std::vector<double> train_returns(panel.returns.begin() + static_cast<std::ptrdiff_t>(first_day * kBinsPerDay),
                                    panel.returns.begin() + static_cast<std::ptrdiff_t>(train_end * kBinsPerDay));
  ws.return_scaler = Scaler::fit(train_returns, 1);

  std::vector<double> selected;  // days x 96 x F
  selected.reserve(panel.size() * kBinsPerDay * F);
  for (std::size_t d = 0; d < panel.size(); ++d) {
    auto feat = panel.day_features(d);
    for (std::size_t k = 0; k < kBinsPerDay; ++k)
      for (std::size_t c : cols) selected.push_back(feat[k * kColumnCount + c]);
  }
  if (F > 0) {
    ws.feature_scaler = Scaler::fit(std::span<const double>(selected).subspan(first_day * kBinsPerDay * F,
                                                                            split.train_days * kBinsPerDay * F),
                                    F);
  }

  for (std::size_t t = first_day + 1; t < first_day + total; ++t) {
    const std::size_t s = t - 1;
    if (panel.days[t] - panel.days[s] != kDaySeconds) {
      ++ws.skipped_pairs;
      continue;
    }
    DayWindow w;
    w.input_index = s;
    w.target_index = t;
    w.input_day = panel.days[s];
    w.target_day = panel.days[t];
    w.feature_dim = F;
    auto in = panel.day_returns(s);
    auto tg = panel.day_returns(t);
    w.inputs.resize(kBinsPerDay);
    w.target.resize(kBinsPerDay);
    w.target_raw.assign(tg.begin(), tg.end());
    for (std::size_t k = 0; k < kBinsPerDay; ++k) {
      w.inputs[k] = ws.return_scaler.transform(in[k], 0);
      w.target[k] = ws.return_scaler.transform(tg[k], 0);
    }
    if (F > 0) {
      w.features.resize(kBinsPerDay * F);
      const std::size_t base = s * kBinsPerDay * F;
      for (std::size_t i = 0; i < kBinsPerDay * F; ++i) w.features[i] = ws.feature_scaler.transform(selected[base + i], i % F);
    }
    (t < train_end ? ws.train : ws.test).push_back(std::move(w));
  }
  return ws;
}

std::vector<double> daily_rv_series(const DailyPanel& panel, std::size_t first, std::size_t count) {
  if (first + count > panel.size()) throw std::out_of_range("daily_rv_series: range past the panel");
  std::vector<double> rv(count);
  for (std::size_t i = 0; i < count; ++i) rv[i] = panel.day_rv(first + i);
  return rv;
}

}  // namespace volcast::features
