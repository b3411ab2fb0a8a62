#include "volcast/vader.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "volcast/table_io.hpp"

namespace volcast::ingest {

namespace {

constexpr const char* kNegate[] = {
    "aint",    "arent",    "cannot",  "cant",    "couldnt", "darent",  "didnt",    "doesnt",  "ain't",
    "aren't",  "can't",    "couldn't", "daren't", "didn't",  "doesn't", "dont",     "hadnt",   "hasnt",
    "havent",  "isnt",     "mightnt", "mustnt",  "neither", "don't",   "hadn't",   "hasn't",  "haven't",
    "isn't",   "mightn't", "mustn't", "neednt",  "needn't", "never",   "none",     "nope",    "nor",
    "not",     "nothing",  "nowhere", "oughtnt", "shant",   "shouldnt", "uhuh",    "wasnt",   "werent",
    "oughtn't", "shan't",  "shouldn't", "uh-uh", "wasn't",  "weren't", "without",  "wont",    "wouldnt",
    "won't",   "wouldn't", "rarely",  "seldom",  "despite"};

constexpr const char* kBoostUp[] = {
    "absolutely", "amazingly",  "awfully",     "completely",    "considerable", "considerably", "decidedly",
    "deeply",     "effing",     "enormous",    "enormously",    "entirely",     "especially",   "exceptional",
    "exceptionally", "extreme", "extremely",   "fabulously",    "flipping",     "flippin",      "frackin",
    "fracking",   "fricking",   "frickin",     "frigging",      "friggin",      "fully",        "fuckin",
    "fucking",    "fuggin",     "fugging",     "greatly",       "hella",        "highly",       "hugely",
    "incredible", "incredibly", "intensely",   "major",         "majorly",      "more",         "most",
    "particularly", "purely",   "quite",       "really",        "remarkably",   "so",           "substantially",
    "thoroughly", "total",      "totally",     "tremendous",    "tremendously", "uber",         "unbelievably",
    "unusually",  "utter",      "utterly",     "very"};

constexpr const char* kBoostDown[] = {
    "almost", "barely",   "hardly",     "just enough", "kind of", "kinda",  "kindof", "kind-of", "less",
    "little", "marginal", "marginally", "occasional",  "occasionally", "partly", "scarce", "scarcely", "slight",
    "slightly", "somewhat", "sort of", "sorta", "sortof", "sort-of"};

const std::unordered_map<std::string, double>& special_cases() {
  static const std::unordered_map<std::string, double> m{
      {"the shit", 3},       {"the bomb", 3},         {"bad ass", 1.5},    {"badass", 1.5},
      {"bus stop", 0.0},     {"yeah right", -2},      {"kiss of death", -1.5}, {"to die for", 3},
      {"beating heart", 3.5}};
  return m;
}

// Booster direction only; the magnitude comes from VaderConstants.
const std::unordered_map<std::string, double>& booster_signs() {
  static const std::unordered_map<std::string, double> m = [] {
    std::unordered_map<std::string, double> b;
    for (const char* w : kBoostUp) b[w] = 1.0;
    for (const char* w : kBoostDown) b[w] = -1.0;
    return b;
  }();
  return m;
}

bool py_isspace(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || (c >= 0x1C && c <= 0x20) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
         c == 0x3000;
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto c = static_cast<unsigned char>(s[i + k]);
      if ((c & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (c & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool is_ascii_punct(char32_t c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

// Cased characters are restricted to ASCII letters.
bool is_upper(const std::string& w) {
  bool cased = false;
  for (char c : w) {
    if (c >= 'a' && c <= 'z') return false;
    if (c >= 'A' && c <= 'Z') cased = true;
  }
  return cased;
}

std::string lower(const std::string& w) {
  std::string out = w;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

bool is_negated(const std::string& lower_word) {
  for (const char* n : kNegate)
    if (lower_word == n) return true;
  return lower_word.find("n't") != std::string::npos;
}

struct Tokens {
  std::vector<std::string> words;
  std::vector<std::string> lowered;
  bool cap_differential = false;
};

Tokens tokenize(const std::u32string& text) {
  Tokens t;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && py_isspace(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !py_isspace(text[j])) ++j;
    std::size_t a = i, b = j;
    while (a < b && is_ascii_punct(text[a])) ++a;
    while (b > a && is_ascii_punct(text[b - 1])) --b;
    // Short remainders were most likely emoticons; keep the raw token.
    if (b - a <= 2) {
      a = i;
      b = j;
    }
    std::string w;
    for (std::size_t k = a; k < b; ++k) append_utf8(w, text[k]);
    t.words.push_back(std::move(w));
    i = j;
  }
  std::size_t caps = 0;
  for (const auto& w : t.words) {
    t.lowered.push_back(lower(w));
    if (is_upper(w)) ++caps;
  }
  const std::size_t diff = t.words.size() - caps;
  t.cap_differential = diff > 0 && diff < t.words.size();
  return t;
}

class Scorer {
 public:
  Scorer(const VaderLexicon& lex, const VaderConstants& k, const Tokens& t)
      : lex_(lex), k_(k), t_(t), boost_(booster_signs()) {}

  std::vector<double> sentiments() const {
    std::vector<double> s;
    const auto& lw = t_.lowered;
    for (std::size_t i = 0; i < lw.size(); ++i) {
      if (boost_.count(lw[i]) || (i + 1 < lw.size() && lw[i] == "kind" && lw[i + 1] == "of")) {
        s.push_back(0.0);
        continue;
      }
      s.push_back(valence(i));
    }
    but_check(s);
    return s;
  }

 private:
  bool in_lexicon(std::size_t idx) const { return lex_.valence(t_.lowered[idx]) != nullptr; }

  double scalar_inc_dec(std::size_t idx, double valence) const {
    auto it = boost_.find(t_.lowered[idx]);
    if (it == boost_.end()) return 0.0;
    double scalar = it->second * k_.booster_increment;
    if (valence < 0) scalar *= -1;
    if (is_upper(t_.words[idx]) && t_.cap_differential) scalar += valence > 0 ? k_.caps_increment : -k_.caps_increment;
    return scalar;
  }

  double valence(std::size_t i) const {
    const auto& lw = t_.lowered;
    const double* base = lex_.valence(lw[i]);
    if (!base) return 0.0;
    double v = *base;
    const std::size_t n = lw.size();
    if (lw[i] == "no" && i != n - 1 && in_lexicon(i + 1)) v = 0.0;
    if ((i > 0 && lw[i - 1] == "no") || (i > 1 && lw[i - 2] == "no") ||
        (i > 2 && lw[i - 3] == "no" && (lw[i - 1] == "or" || lw[i - 1] == "nor"))) {
      v = *base * k_.negation_scalar;
    }
    if (is_upper(t_.words[i]) && t_.cap_differential) v += v > 0 ? k_.caps_increment : -k_.caps_increment;

    for (std::size_t start = 0; start < 3; ++start) {
      if (i > start && !in_lexicon(i - (start + 1))) {
        double s = scalar_inc_dec(i - (start + 1), v);
        if (start == 1 && s != 0) s *= 0.95;
        if (start == 2 && s != 0) s *= 0.9;
        v += s;
        v = negation_check(v, start, i);
        if (start == 2) v = special_idioms_check(v, i);
      }
    }
    return least_check(v, i);
  }

  double negation_check(double v, std::size_t start, std::size_t i) const {
    const auto& w = t_.lowered;
    if (start == 0) {
      if (is_negated(w[i - 1])) v *= k_.negation_scalar;
    } else if (start == 1) {
      if (w[i - 2] == "never" && (w[i - 1] == "so" || w[i - 1] == "this")) {
        v *= 1.25;
      } else if (w[i - 2] == "without" && w[i - 1] == "doubt") {
      } else if (is_negated(w[i - 2])) {
        v *= k_.negation_scalar;
      }
    } else {
      if ((w[i - 3] == "never" && (w[i - 2] == "so" || w[i - 2] == "this")) || w[i - 1] == "so" ||
          w[i - 1] == "this") {
        v *= 1.25;
      } else if (w[i - 3] == "without" && (w[i - 2] == "doubt" || w[i - 1] == "doubt")) {
      } else if (is_negated(w[i - 3])) {
        v *= k_.negation_scalar;
      }
    }
    return v;
  }

  double special_idioms_check(double v, std::size_t i) const {
    const auto& w = t_.lowered;
    const auto& sc = special_cases();
    const std::string onezero = w[i - 1] + " " + w[i];
    const std::string twoonezero = w[i - 2] + " " + w[i - 1] + " " + w[i];
    const std::string twoone = w[i - 2] + " " + w[i - 1];
    const std::string threetwoone = w[i - 3] + " " + w[i - 2] + " " + w[i - 1];
    const std::string threetwo = w[i - 3] + " " + w[i - 2];
    for (const std::string* seq : {&onezero, &twoonezero, &twoone, &threetwoone, &threetwo}) {
      if (auto it = sc.find(*seq); it != sc.end()) {
        v = it->second;
        break;
      }
    }
    if (w.size() - 1 > i) {
      if (auto it = sc.find(w[i] + " " + w[i + 1]); it != sc.end()) v = it->second;
    }
    if (w.size() - 1 > i + 1) {
      if (auto it = sc.find(w[i] + " " + w[i + 1] + " " + w[i + 2]); it != sc.end()) v = it->second;
    }
    for (const std::string* ng : {&threetwoone, &threetwo, &twoone}) {
      if (auto it = boost_.find(*ng); it != boost_.end()) v += it->second * k_.booster_increment;
    }
    return v;
  }

  double least_check(double v, std::size_t i) const {
    const auto& w = t_.lowered;
    if (i > 1 && !in_lexicon(i - 1) && w[i - 1] == "least") {
      if (w[i - 2] != "at" && w[i - 2] != "very") v *= k_.negation_scalar;
    } else if (i > 0 && !in_lexicon(i - 1) && w[i - 1] == "least") {
      v *= k_.negation_scalar;
    }
    return v;
  }

  // Reproduces the reference loop exactly, including its lookup of each
  // value's first occurrence while the list is being rewritten.
  void but_check(std::vector<double>& s) const {
    const auto& w = t_.lowered;
    const auto it = std::find(w.begin(), w.end(), "but");
    if (it == w.end()) return;
    const auto bi = static_cast<std::size_t>(it - w.begin());
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double value = s[k];
      const auto si = static_cast<std::size_t>(std::find(s.begin(), s.end(), value) - s.begin());
      if (si < bi) s[si] = value * 0.5;
      else if (si > bi) s[si] = value * 1.5;
    }
  }

  const VaderLexicon& lex_;
  const VaderConstants& k_;
  const Tokens& t_;
  const std::unordered_map<std::string, double>& boost_;
};

double punctuation_emphasis(const std::u32string& text) {
  const auto ep = std::min<std::ptrdiff_t>(std::count(text.begin(), text.end(), U'!'), 4);
  const auto qm = std::count(text.begin(), text.end(), U'?');
  double qm_amp = 0.0;
  if (qm > 1) qm_amp = qm <= 3 ? static_cast<double>(qm) * 0.18 : 0.96;
  return static_cast<double>(ep) * 0.292 + qm_amp;
}

}  // namespace

VaderLexicon VaderLexicon::load(const std::filesystem::path& lexicon_path, const std::filesystem::path& emoji_path) {
  VaderLexicon lex;
  auto lines = [](const std::string& content, auto&& fn) {
    std::size_t pos = 0;
    while (pos < content.size()) {
      std::size_t end = content.find('\n', pos);
      if (end == std::string::npos) end = content.size();
      std::string line = content.substr(pos, end - pos);
      pos = end + 1;
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
      std::size_t lead = 0;
      while (lead < line.size() && (line[lead] == ' ' || line[lead] == '\t')) ++lead;
      line.erase(0, lead);
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw std::runtime_error("vader: malformed lexicon line '" + line + "'");
      const auto tab2 = line.find('\t', tab + 1);
      fn(line.substr(0, tab), line.substr(tab + 1, tab2 == std::string::npos ? std::string::npos : tab2 - tab - 1));
    }
  };
  lines(io::read_file(lexicon_path), [&](std::string token, const std::string& measure) {
    const double v = std::strtod(measure.c_str(), nullptr);
    if (!std::isfinite(v)) throw std::runtime_error("vader: non-finite valence for '" + token + "'");
    lex.valence_[std::move(token)] = v;
  });
  lines(io::read_file(emoji_path), [&](const std::string& emoji, const std::string& description) {
    // Multi-code-point keys can never match the per-character replacement.
    const auto cps = decode_utf8(emoji);
    if (cps.size() == 1) lex.emoji_[cps[0]] = description;
  });
  if (lex.valence_.empty()) throw std::runtime_error("vader: empty lexicon '" + lexicon_path.string() + "'");
  return lex;
}

const VaderLexicon& VaderLexicon::bundled() {
  static const VaderLexicon lex = load(std::filesystem::path(VOLCAST_DATA_DIR) / "vader_lexicon.txt",
                                       std::filesystem::path(VOLCAST_DATA_DIR) / "emoji_utf8_lexicon.txt");
  return lex;
}

const double* VaderLexicon::valence(const std::string& lower_token) const {
  auto it = valence_.find(lower_token);
  return it == valence_.end() ? nullptr : &it->second;
}

const std::string* VaderLexicon::emoji_description(char32_t cp) const {
  auto it = emoji_.find(cp);
  return it == emoji_.end() ? nullptr : &it->second;
}

SentimentScores vader_scores(std::string_view utf8_text, const VaderLexicon& lexicon, const VaderConstants& constants) {
  std::u32string text;
  bool prev_space = true;
  for (char32_t c : decode_utf8(utf8_text)) {
    if (const std::string* d = lexicon.emoji_description(c)) {
      if (!prev_space) text.push_back(U' ');
      text += decode_utf8(*d);
      prev_space = false;
    } else {
      text.push_back(c);
      prev_space = c == U' ';
    }
  }
  std::size_t a = 0, b = text.size();
  while (a < b && py_isspace(text[a])) ++a;
  while (b > a && py_isspace(text[b - 1])) --b;
  text = text.substr(a, b - a);

  const Tokens tokens = tokenize(text);
  const std::vector<double> s = Scorer(lexicon, constants, tokens).sentiments();

  SentimentScores out;
  if (s.empty()) {
    out.neutral = 1.0;
    return out;
  }
  double sum = 0.0;
  for (double v : s) sum += v;
  const double punct = punctuation_emphasis(text);
  if (sum > 0) sum += punct;
  else if (sum < 0) sum -= punct;
  out.compound = std::clamp(sum / std::sqrt(sum * sum + constants.alpha), -1.0, 1.0);

  double pos = 0.0, neg = 0.0;
  std::size_t neu = 0;
  for (double v : s) {
    if (v > 0) pos += v + 1;
    if (v < 0) neg += v - 1;
    if (v == 0) ++neu;
  }
  if (pos > std::fabs(neg)) pos += punct;
  else if (pos < std::fabs(neg)) neg -= punct;
  const double total = pos + std::fabs(neg) + static_cast<double>(neu);
  out.positive = std::fabs(pos / total);
  out.negative = std::fabs(neg / total);
  out.neutral = std::fabs(static_cast<double>(neu) / total);
  return out;
}

double round_decimal(double x, int ndigits) {
  if (!std::isfinite(x)) return x;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.*f", ndigits, x);
  return std::strtod(buf, nullptr);
}

}  // namespace volcast::ingest
