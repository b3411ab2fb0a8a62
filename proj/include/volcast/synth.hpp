#pragma once

// Synthetic 15-minute prices from a stochastic-volatility process with a
// deterministic intraday cycle, plus tweet streams whose field distributions
// can be tied to the next-day volatility shock.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "volcast/features.hpp"
#include "volcast/ingest.hpp"

namespace volcast::synth {

struct SynthConfig {
  std::size_t days = 144;
  std::int64_t start_day = 1546300800;  // 2019-01-01 UTC
  std::uint64_t seed = 1;

  // Daily log-volatility h_k = persistence * h_{k-1} + shock_sd * eta_k; the
  // intraday level interpolates linearly from h_d to h_{d+1}. Each day also
  // opens with a non-persistent surprise surprise_sd * xi_d added to the log
  // level, fading linearly to zero by the close. Prices up to day d-1 carry
  // no information about it.
  double persistence = 0.8;
  double shock_sd = 0.3;
  double surprise_sd = 0.4;
  double base_volatility = 0.003;
  double cycle_amplitude = 0.4;  // multiplicative intraday volatility cycle
  double drift_cycles = 3.0;     // periods per day of the signed return profile
  double noise = 0.2;            // idiosyncratic share of each return
  double start_price = 4000.0;

  double tweets_per_bin = 6.0;
  // Tweets on day d carry xi_{d+1}, the next day's surprise.
  features::FeatureSet coupled{.user = true};
  double coupling = 1.0;
};

struct SynthData {
  std::vector<features::Candle> candles;
  std::vector<ingest::TweetRecord> tweets;  // sorted by time
  std::vector<double> log_volatility;       // h_0 .. h_{days+1}
  std::vector<double> surprises;            // xi_0 .. xi_days (the last one is unused)
};

SynthData generate(const SynthConfig& config);

/// Writes candles.csv and tweets.csv into `dir`.
void write(const SynthData& data, const std::filesystem::path& dir);

}  // namespace volcast::synth
