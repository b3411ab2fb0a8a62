#pragma once

// Rule-based VADER sentiment scoring, behaviour-compatible with the
// vaderSentiment 3.3.2 reference package (see data/VADER_LICENSE.txt).

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>

namespace volcast::ingest {

struct SentimentScores {
  double negative = 0.0;
  double neutral = 0.0;
  double positive = 0.0;
  double compound = 0.0;  // unrounded, in [-1, 1]
};

struct VaderConstants {
  double booster_increment = 0.293;
  double caps_increment = 0.733;
  double negation_scalar = -0.74;
  double alpha = 15.0;
};

class VaderLexicon {
 public:
  /// Token<TAB>valence[<TAB>...] lines; emoji<TAB>description lines.
  static VaderLexicon load(const std::filesystem::path& lexicon_path, const std::filesystem::path& emoji_path);
  /// The lexicon files shipped in the data directory.
  static const VaderLexicon& bundled();

  std::size_t size() const { return valence_.size(); }
  const double* valence(const std::string& lower_token) const;
  const std::string* emoji_description(char32_t cp) const;

 private:
  std::unordered_map<std::string, double> valence_;
  std::unordered_map<char32_t, std::string> emoji_;
};

SentimentScores vader_scores(std::string_view utf8_text, const VaderLexicon& lexicon,
                             const VaderConstants& constants = {});

/// Rounds like Python's round(x, ndigits): correctly rounded from the exact
/// binary value, ties to even.
double round_decimal(double x, int ndigits);

}  // namespace volcast::ingest
