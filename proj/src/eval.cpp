#include "volcast/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "volcast/table_io.hpp"

namespace volcast::eval {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample variance (n - 1 denominator).
double variance_of(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

double t_cdf(double t, double df) {
  if (std::isinf(t)) return t < 0 ? 0.0 : 1.0;
  boost::math::students_t dist(df);
  return boost::math::cdf(dist, t);
}
}  // namespace

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::mape: return "MAPE";
    case Metric::mae: return "MAE";
    case Metric::rmse: return "RMSE";
    case Metric::msle: return "MSLE";
  }
  return "?";
}

double MetricVector::get(Metric m) const {
  switch (m) {
    case Metric::mape: return mape;
    case Metric::mae: return mae;
    case Metric::rmse: return rmse;
    case Metric::msle: return msle;
  }
  return kNaN;
}

MetricVector metrics(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw std::invalid_argument("metrics: length mismatch");
  if (y.empty()) throw std::invalid_argument("metrics: empty input");
  const double n = static_cast<double>(y.size());
  double ape = 0.0, ae = 0.0, se = 0.0, sle = 0.0;
  bool mape_ok = true, msle_ok = true;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - y_hat[i];
    if (y[i] > 0.0) ape += std::abs(e / y[i]);
    else mape_ok = false;
    ae += std::abs(e);
    se += e * e;
    if (y[i] > 0.0 && y_hat[i] > -1.0) {
      const double d = std::log1p(y[i]) - std::log1p(y_hat[i]);
      sle += d * d;
    } else {
      msle_ok = false;
    }
  }
  MetricVector m;
  m.mape = mape_ok ? ape / n : kNaN;
  m.mae = ae / n;
  m.rmse = std::sqrt(se / n);
  m.msle = msle_ok ? sle / n : kNaN;
  return m;
}

double one_sided_t(std::span<const double> baseline, std::span<const double> model, TTest kind) {
  if (model.size() < 2) throw std::invalid_argument("one_sided_t: need at least 2 model scores");
  if (baseline.empty()) throw std::invalid_argument("one_sided_t: empty baseline");
  const double n2 = static_cast<double>(model.size());
  const double m2 = mean_of(model), v2 = variance_of(model, m2);
  const double m1 = mean_of(baseline);

  if (kind == TTest::student && baseline.size() == 1) {
    if (v2 == 0.0) throw std::domain_error("one_sided_t: zero variance in both samples");
    const double t = (m2 - m1) / std::sqrt(v2 / n2);
    return t_cdf(t, n2 - 1.0);
  }
  if (baseline.size() < 2) throw std::invalid_argument("one_sided_t: Welch needs at least 2 baseline scores");
  const double n1 = static_cast<double>(baseline.size());
  const double v1 = variance_of(baseline, m1);
  if (v1 == 0.0 && v2 == 0.0) throw std::domain_error("one_sided_t: zero variance in both samples");
  if (kind == TTest::student) {
    const double sp2 = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
    const double t = (m2 - m1) / std::sqrt(sp2 * (1.0 / n1 + 1.0 / n2));
    return t_cdf(t, n1 + n2 - 2.0);
  }
  const double a = v1 / n1, b = v2 / n2;
  const double t = (m2 - m1) / std::sqrt(a + b);
  double df = (a + b) * (a + b) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
  return t_cdf(t, df);
}

std::string significance_code(double p) {
  if (std::isnan(p)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapBand bootstrap_band(const std::vector<std::vector<double>>& runs_by_day, std::size_t samples, double level,
                             std::uint64_t seed) {
  if (runs_by_day.size() < 2) throw std::invalid_argument("bootstrap_band: need at least 2 runs");
  if (samples == 0) throw std::invalid_argument("bootstrap_band: need at least one sample");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_band: level must be in (0, 1)");
  const std::size_t R = runs_by_day.size(), D = runs_by_day[0].size();
  for (const auto& r : runs_by_day)
    if (r.size() != D) throw std::invalid_argument("bootstrap_band: runs have different lengths");

  BootstrapBand band;
  band.mean.assign(D, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t r = 0; r < R; ++r) band.mean[d] += runs_by_day[r][d];
    band.mean[d] /= static_cast<double>(R);
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, R - 1);
  std::vector<std::vector<double>> per_day(D, std::vector<double>(samples));
  std::vector<std::size_t> draw(R);
  for (std::size_t b = 0; b < samples; ++b) {
    for (auto& i : draw) i = pick(rng);
    for (std::size_t d = 0; d < D; ++d) {
      double s = 0.0;
      for (std::size_t i : draw) s += runs_by_day[i][d];
      per_day[d][b] = s / static_cast<double>(R);
    }
  }
  const double tail = (1.0 - level) / 2.0;
  band.lower.resize(D);
  band.upper.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    band.lower[d] = std::min(quantile(per_day[d], tail), band.mean[d]);
    band.upper[d] = std::max(quantile(per_day[d], 1.0 - tail), band.mean[d]);
  }
  return band;
}

BucketMape percentile_mape(std::span<const double> y, std::span<const double> y_hat, std::size_t buckets) {
  if (y.size() != y_hat.size() || y.empty()) throw std::invalid_argument("percentile_mape: bad lengths");
  if (buckets == 0) throw std::invalid_argument("percentile_mape: need at least one bucket");
  BucketMape out;
  std::vector<double> yv(y.begin(), y.end());
  for (std::size_t b = 0; b <= buckets; ++b)
    out.edges.push_back(quantile(yv, static_cast<double>(b) / static_cast<double>(buckets)));
  out.counts.assign(buckets, 0);
  std::vector<double> sum(buckets, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::size_t b = 0;
    while (b + 1 < buckets && y[i] > out.edges[b + 1]) ++b;
    ++out.counts[b];
    sum[b] += std::abs((y[i] - y_hat[i]) / y[i]);
  }
  for (std::size_t b = 0; b < buckets; ++b)
    out.mape.push_back(out.counts[b] ? sum[b] / static_cast<double>(out.counts[b]) : kNaN);
  return out;
}

SignificanceEntry summarize(const std::string& label, const std::vector<MetricVector>& runs,
                            const std::vector<MetricVector>& baseline, TTest kind) {
  if (runs.empty()) throw std::invalid_argument("summarize: no runs for " + label);
  SignificanceEntry e;
  e.label = label;
  e.runs = runs.size();
  for (std::size_t k = 0; k < kMetrics.size(); ++k) {
    std::vector<double> v, base;
    for (const auto& r : runs) v.push_back(r.get(kMetrics[k]));
    for (const auto& r : baseline) base.push_back(r.get(kMetrics[k]));
    e.mean[k] = mean_of(v);
    e.sd[k] = std::sqrt(variance_of(v, e.mean[k]));
    e.p[k] = kNaN;
    if (!base.empty() && v.size() >= 2 && std::isfinite(e.mean[k]) && std::isfinite(mean_of(base))) {
      try {
        e.p[k] = one_sided_t(base, v, kind);
      } catch (const std::exception&) {
        e.p[k] = kNaN;
      }
    }
    e.code[k] = significance_code(e.p[k]);
  }
  return e;
}

namespace {
std::string fmt4(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}
}  // namespace

std::string render_text(const std::vector<SignificanceEntry>& entries, const std::string& title) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Model", "Runs"});
  for (Metric m : kMetrics) cells[0].push_back(metric_name(m));
  for (const auto& e : entries) {
    std::vector<std::string> row{e.label, std::to_string(e.runs)};
    for (std::size_t k = 0; k < 4; ++k) {
      std::string c = fmt4(e.mean[k]);
      if (e.runs > 1) c += " ± " + fmt4(e.sd[k]);
      if (!e.code[k].empty()) c += " " + e.code[k];
      row.push_back(c);
    }
    cells.push_back(row);
  }
  // Width in code points so the "±" does not skew alignment.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> w(cells[0].size(), 0);
  for (const auto& r : cells)
    for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], width(r[i]));
  std::ostringstream os;
  if (!title.empty()) os << title << '\n';
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      os << cells[r][i] << std::string(w[i] - width(cells[r][i]), ' ');
      if (i + 1 < cells[r].size()) os << "  ";
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto x : w) total += x;
      os << std::string(total + 2 * (w.size() - 1), '-') << '\n';
    }
  }
  os << "Significance codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1\n";
  return os.str();
}

std::string render_csv(const std::vector<SignificanceEntry>& entries) {
  std::ostringstream os;
  os << "model,runs";
  for (Metric m : kMetrics) {
    std::string n = metric_name(m);
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    os << ',' << n << "_mean," << n << "_sd," << n << "_p," << n << "_code";
  }
  os << '\n';
  for (const auto& e : entries) {
    io::write_csv_row(os, [&] {
      std::vector<std::string> row{e.label, std::to_string(e.runs)};
      for (std::size_t k = 0; k < 4; ++k) {
        row.push_back(io::format_double(e.mean[k]));
        row.push_back(io::format_double(e.sd[k]));
        row.push_back(std::isnan(e.p[k]) ? "" : io::format_double(e.p[k]));
        row.push_back(e.code[k]);
      }
      return row;
    }());
  }
  return os.str();
}

// ---- SVG ---------------------------------------------------------------------

namespace {
std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}
}  // namespace

std::string render_svg(const PlotInput& plot) {
  const std::size_t n = plot.truth.size();
  if (n == 0 || plot.prediction.size() != n) throw std::invalid_argument("render_svg: series lengths differ or are empty");
  if (plot.band && (plot.band->lower.size() != n || plot.band->upper.size() != n))
    throw std::invalid_argument("render_svg: band length differs from the series");

  const double W = 900, H = 420, left = 70, right = 20, top = 40, bottom = 60;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto extend = [&](const std::vector<double>& v) {
    for (double x : v)
      if (std::isfinite(x)) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
  };
  extend(plot.truth);
  extend(plot.prediction);
  if (plot.band) {
    extend(plot.band->lower);
    extend(plot.band->upper);
  }
  if (!(hi > lo)) {
    hi = lo + 1.0;
    lo -= 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto X = [&](std::size_t i) {
    return left + (n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1)) * (W - left - right);
  };
  auto Y = [&](double v) { return top + (hi - v) / (hi - lo) * (H - top - bottom); };
  auto polyline = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + num(X(i)) + "," + num(Y(v[i]));
    return s;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << xml_escape(plot.title) << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << num(Y(v) + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\""
       << " font-size=\"11\">" << fmt4(v) << "</text>\n";
  }
  const std::size_t stride = std::max<std::size_t>(1, n / 8);
  for (std::size_t i = 0; i < n && i < plot.x_labels.size(); i += stride) {
    os << "<text x=\"" << num(X(i)) << "\" y=\"" << H - bottom + 18 << "\" text-anchor=\"middle\""
       << " font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(plot.x_labels[i]) << "</text>\n";
  }
  if (plot.band) {
    std::string pts;
    for (std::size_t i = 0; i < n; ++i) pts += (i ? " " : "") + num(X(i)) + "," + num(Y(plot.band->upper[i]));
    for (std::size_t i = n; i-- > 0;) pts += " " + num(X(i)) + "," + num(Y(plot.band->lower[i]));
    os << "<polygon class=\"band\" points=\"" << pts << "\" fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
  }
  os << "<polyline class=\"truth\" points=\"" << polyline(plot.truth)
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  os << "<polyline class=\"prediction\" points=\"" << polyline(plot.prediction)
     << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
  os << "<text x=\"" << W - right - 160 << "\" y=\"" << top + 10
     << "\" font-family=\"sans-serif\" font-size=\"12\">true RV (black), predicted (blue)</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace volcast::eval
