#pragma once

// Price and tweet feature engineering on the 15-minute UTC grid: log
// returns, realized volatility, tweet binning, feature-set selection,
// min-max scaling and next-day windows.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "volcast/ingest.hpp"

namespace volcast::features {

inline constexpr std::size_t kBinsPerDay = 96;
inline constexpr std::int64_t kBinSeconds = 900;
inline constexpr std::int64_t kDaySeconds = 86400;

/// r_t = log P_t - log P_{t-1}; throws on fewer than 2 prices or a
/// non-positive price.
std::vector<double> log_returns(std::span<const double> prices);
/// sqrt(sum r^2) over exactly one day of bins.
double realized_volatility(std::span<const double> day_returns);

// ---- tweet bins ---------------------------------------------------------------

/// Fixed column order of the tweet features: Count, VADER, Tweet (5), User (7).
enum Column : std::size_t {
  kCount,
  kVader,
  kGif,
  kPhoto,
  kVideo,
  kIsQuote,
  kSensitive,
  kFavourites,
  kFollowers,
  kFriends,
  kListed,
  kVerified,
  kDefaultProfile,
  kDefaultProfileImage,
  kColumnCount
};
const char* column_name(std::size_t column);

struct FeatureBin {
  std::int64_t start = 0;
  std::array<double, kColumnCount> values{};  // [kCount] is the raw count, the rest are means
};

/// One bin per grid interval [start + i*15min, start + (i+1)*15min); tweets
/// outside the span are ignored. Empty intervals are all zeros.
std::vector<FeatureBin> bin_tweets(std::span<const ingest::TweetRecord> sorted_records, std::int64_t grid_start,
                                   std::size_t bins);

struct FeatureSet {
  bool count = false;
  bool vader = false;
  bool tweet = false;
  bool user = false;

  bool empty() const { return !(count || vader || tweet || user); }
  std::vector<std::size_t> columns() const;
  /// "Count, VADER, Tweet, User" order; "none" when empty.
  std::string label() const;
  /// Comma/plus separated names, case-insensitive; "all" selects everything,
  /// "none" or "" nothing.
  static FeatureSet parse(const std::string& text);
  bool operator==(const FeatureSet&) const = default;
};

/// The 15 non-empty subsets, in the fixed row order of ablation reports.
std::vector<FeatureSet> all_feature_subsets();

// ---- prices and the daily panel ----------------------------------------------

struct Candle {
  std::int64_t timestamp = 0;  // interval open, on the 15-minute grid
  double close = 0.0;          // price at the end of the interval
};

/// Validates grid alignment, strict ordering and positive prices.
std::vector<Candle> read_candles(const std::filesystem::path& path);
void write_candles(const std::filesystem::path& path, std::span<const Candle> candles);

struct PanelOptions {
  std::size_t max_gaps_per_day = 4;
};

/// Complete days on the UTC grid. Returns are raw log returns; features are
/// the unscaled bin values.
struct DailyPanel {
  std::vector<std::int64_t> days;  // UTC midnight of each kept day
  std::vector<double> returns;     // days x 96
  std::vector<double> features;    // days x 96 x kColumnCount

  std::size_t size() const { return days.size(); }
  std::span<const double> day_returns(std::size_t d) const;
  std::span<const double> day_features(std::size_t d) const;
  double day_rv(std::size_t d) const { return realized_volatility(day_returns(d)); }
};

struct PanelDiagnostics {
  std::size_t filled_bins = 0;
  std::vector<std::int64_t> dropped_days;
  std::size_t tweets_outside_grid = 0;
};

/// Missing candles are forward filled (zero return); a day with more than
/// `max_gaps_per_day` filled bins is dropped. A bin whose previous close
/// precedes the data counts as filled.
DailyPanel build_panel(std::span<const Candle> candles, std::span<const ingest::TweetRecord> sorted_records,
                       const PanelOptions& options = {}, PanelDiagnostics* diag = nullptr);

/// One row per bin: timestamp, log_return, then the 14 tweet columns.
std::string panel_csv_header();
void write_panel(const std::filesystem::path& path, const DailyPanel& panel);
/// Trailing partial days are discarded (and counted in `partial_rows`).
DailyPanel read_panel(const std::filesystem::path& path, std::size_t* partial_rows = nullptr);

// ---- scaling -----------------------------------------------------------------

/// Per-column (x - min) / range * 0.5 - 0.25 with min/range learned from
/// training rows only. A zero range is replaced by 1 and reported.
struct Scaler {
  std::vector<double> min;
  std::vector<double> range;
  std::vector<std::size_t> degenerate_columns;

  static Scaler fit(std::span<const double> rows, std::size_t columns);
  std::size_t columns() const { return min.size(); }
  double transform(double x, std::size_t column) const { return (x - min[column]) / range[column] * 0.5 - 0.25; }
  double inverse(double s, std::size_t column) const { return (s + 0.25) / 0.5 * range[column] + min[column]; }
  std::vector<double> transform(std::span<const double> rows) const;
  std::vector<double> inverse(std::span<const double> rows) const;
};

// ---- windows -----------------------------------------------------------------

/// Inputs are the previous day's bins, the target is the next day's returns.
struct DayWindow {
  std::size_t input_index = 0;   // panel day index of the inputs
  std::size_t target_index = 0;  // panel day index of the target
  std::int64_t input_day = 0;
  std::int64_t target_day = 0;
  std::vector<double> inputs;      // 96 scaled returns
  std::vector<double> features;    // 96 x F scaled selected features (row major)
  std::vector<double> target;      // 96 scaled returns
  std::vector<double> target_raw; // 96 raw returns
  std::size_t feature_dim = 0;

  double true_rv() const { return realized_volatility(target_raw); }
};

struct Split {
  std::size_t train_days = 96;
  std::size_t test_days = 48;
};

struct WindowSet {
  std::vector<DayWindow> train;
  std::vector<DayWindow> test;
  Scaler return_scaler;   // one column
  Scaler feature_scaler;  // selected columns only
  FeatureSet feature_set;
  std::size_t skipped_pairs = 0;  // day pairs that are not calendar-consecutive
};

/// Uses panel days [first_day, first_day + train + test). Scalers are fit on
/// the training days; window i pairs day i with day i+1 when they are
/// consecutive calendar days. Training windows have their target inside the
/// training days, test windows inside the test days.
WindowSet make_day_windows(const DailyPanel& panel, const FeatureSet& feature_set, const Split& split,
                           std::size_t first_day = 0);

/// Realized volatility of panel days [first, first + count).
std::vector<double> daily_rv_series(const DailyPanel& panel, std::size_t first, std::size_t count);

}  // namespace volcast::features
