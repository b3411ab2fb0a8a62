#include "volcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "volcast/table_io.hpp"

namespace volcast::synth {

namespace {

using features::kBinSeconds;
using features::kBinsPerDay;
using features::kDaySeconds;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::int64_t lognormal_count(std::mt19937_64& rng, double log_mean, double sd) {
  std::normal_distribution<double> n(log_mean, sd);
  return static_cast<std::int64_t>(std::llround(std::exp(n(rng))));
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{seed, tag};
  return std::mt19937_64(seq);
}

bool coin(std::mt19937_64& rng, double logit) { return std::bernoulli_distribution(sigmoid(logit))(rng); }

}  // namespace

SynthData generate(const SynthConfig& c) {
  if (c.days == 0) throw std::invalid_argument("synth: days must be positive");
  if (!(std::abs(c.persistence) < 1.0)) throw std::invalid_argument("synth: persistence must lie in (-1, 1)");
  if (!(c.base_volatility > 0.0) || !(c.start_price > 0.0))
    throw std::invalid_argument("synth: base volatility and start price must be positive");
  if (c.tweets_per_bin < 0.0 || c.noise < 0.0 || c.shock_sd < 0.0)
    throw std::invalid_argument("synth: negative rate or scale");
  if (c.start_day % kDaySeconds != 0) throw std::invalid_argument("synth: start_day must be a UTC midnight");

  // Separate streams so that changing the tweet settings leaves prices alone.
  std::mt19937_64 vol_rng = stream(c.seed, 1);
  std::mt19937_64 ret_rng = stream(c.seed, 2);
  std::mt19937_64 tw_rng = stream(c.seed, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthData out;
  const std::size_t n_h = c.days + 2;
  out.log_volatility.resize(n_h);
  out.log_volatility[0] = gauss(vol_rng) * c.shock_sd / std::sqrt(1.0 - c.persistence * c.persistence);
  for (std::size_t k = 1; k < n_h; ++k)
    out.log_volatility[k] = c.persistence * out.log_volatility[k - 1] + c.shock_sd * gauss(vol_rng);
  out.surprises.resize(c.days + 1);
  for (double& x : out.surprises) x = gauss(vol_rng);

  std::vector<double> cycle(kBinsPerDay), profile(kBinsPerDay);
  double ms = 0.0;
  for (std::size_t t = 0; t < kBinsPerDay; ++t) {
    const double phase = 2.0 * std::numbers::pi * (static_cast<double>(t) + 0.5) / kBinsPerDay;
    cycle[t] = 1.0 + c.cycle_amplitude * std::cos(phase - 1.0);
    profile[t] = std::numbers::sqrt2 * std::sin(c.drift_cycles * phase);
    ms += cycle[t] * cycle[t];
  }
  const double norm = std::sqrt(ms / kBinsPerDay);
  for (double& v : cycle) v /= norm;

  out.candles.reserve(c.days * kBinsPerDay + 1);
  double log_price = std::log(c.start_price);
  out.candles.push_back({c.start_day - kBinSeconds, c.start_price});
  for (std::size_t d = 0; d < c.days; ++d) {
    const double h0 = out.log_volatility[d], h1 = out.log_volatility[d + 1];
    const double jump = c.surprise_sd * out.surprises[d];
    for (std::size_t t = 0; t < kBinsPerDay; ++t) {
      const double w = (static_cast<double>(t) + 0.5) / kBinsPerDay;
      const double level = c.base_volatility * std::exp(h0 + w * (h1 - h0) + jump * (1.0 - w)) * cycle[t];
      log_price += level * (profile[t] + c.noise * gauss(ret_rng));
      const std::int64_t ts = c.start_day + static_cast<std::int64_t>(d * kDaySeconds + t * kBinSeconds);
      out.candles.push_back({ts, std::exp(log_price)});
    }
  }

  const double k = c.coupling;
  std::uniform_int_distribution<std::int64_t> offset(0, kBinSeconds - 1);
  for (std::size_t d = 0; d < c.days; ++d) {
    const double z = out.surprises[d + 1];
    const double zc = c.coupled.count ? k * z : 0.0;
    const double zv = c.coupled.vader ? k * z : 0.0;
    const double zt = c.coupled.tweet ? k * z : 0.0;
    const double zu = c.coupled.user ? k * z : 0.0;
    std::poisson_distribution<int> arrivals(c.tweets_per_bin * std::exp(0.5 * zc));
    for (std::size_t t = 0; t < kBinsPerDay; ++t) {
      const std::int64_t bin_start = c.start_day + static_cast<std::int64_t>(d * kDaySeconds + t * kBinSeconds);
      const int n = arrivals(tw_rng);
      std::vector<ingest::TweetRecord> bin(static_cast<std::size_t>(n));
      for (auto& r : bin) {
        r.created_at = bin_start + offset(tw_rng);
        r.tweet_text = "$BTC synthetic update";
        r.vader_compound = ingest::round_decimal(std::clamp(0.1 + 0.3 * zv + 0.4 * gauss(tw_rng), -1.0, 1.0), 4);
        r.gif_count = coin(tw_rng, -3.0 + zt) ? 1 : 0;
        r.photo_count = coin(tw_rng, -1.0 + zt) ? 1 : 0;
        r.video_count = coin(tw_rng, -2.5 + zt) ? 1 : 0;
        r.is_quote_status = coin(tw_rng, -2.0 + zt);
        r.possibly_sensitive = coin(tw_rng, -3.0 + zt);
        r.favourites_count = lognormal_count(tw_rng, 7.0 + 0.5 * zu, 0.5);
        r.followers_count = lognormal_count(tw_rng, 6.0 + 0.5 * zu, 0.5);
        r.friends_count = lognormal_count(tw_rng, 5.5 + 0.5 * zu, 0.5);
        r.listed_count = lognormal_count(tw_rng, 1.5 + 0.5 * zu, 0.5);
        r.verified = coin(tw_rng, -3.0 + zu);
        r.default_profile = coin(tw_rng, 0.0 - zu);
        r.default_profile_image = coin(tw_rng, -2.0 - zu);
      }
      std::sort(bin.begin(), bin.end(), [](const auto& a, const auto& b) { return a.created_at < b.created_at; });
      for (auto& r : bin) out.tweets.push_back(std::move(r));
    }
  }
  return out;
}

void write(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  features::write_candles(dir / "candles.csv", data.candles);
  ingest::write_sorted(data.tweets, dir / "tweets.csv");
}

}  // namespace volcast::synth
