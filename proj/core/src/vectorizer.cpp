#include "ttm/vectorizer.hpp"

#include <cmath>
#include <optional>

#include "ttm/error.hpp"
#include "ttm/random.hpp"

namespace ttm {

namespace {

// Decodes one UTF-8 sequence starting at text[i]. Returns nullopt and
// advances one byte on malformed input.
std::optional<char32_t> next_code_point(std::string_view text, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++i;
    return std::nullopt;
  }
  if (i + extra >= text.size()) {
    ++i;
    return std::nullopt;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return std::nullopt;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[] = {0, 0x80, 0x800, 0x10000};
  if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++i;
    return std::nullopt;
  }
  i += extra + 1;
  return cp;
}

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return in(cp, U'0', U'9') || in(cp, U'a', U'z') || in(cp, U'A', U'Z');
  }
  if (in(cp, 0x80, 0xBF)) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (in(cp, 0x2000, 0x2BFF)) return false;  // punctuation, currency, arrows, math, shapes
  if (in(cp, 0x2E00, 0x2E7F)) return false;
  if (in(cp, 0x3000, 0x303F)) return false;  // CJK punctuation
  if (in(cp, 0xE000, 0xF8FF)) return false;  // private use
  if (in(cp, 0xFE00, 0xFE0F) || in(cp, 0xFE10, 0xFE1F) || in(cp, 0xFE30, 0xFE4F)) return false;
  if (in(cp, 0xFF00, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) || in(cp, 0xFF3B, 0xFF40) ||
      in(cp, 0xFF5B, 0xFF65)) {
    return false;
  }
  if (in(cp, 0x1F000, 0x1FAFF)) return false;  // emoji and pictographs
  if (cp == 0xFEFF) return false;
  return true;
}

char32_t fold_case(char32_t cp) {
  if (in(cp, U'A', U'Z')) return cp + 0x20;
  if (in(cp, 0xC0, 0xDE) && cp != 0xD7) return cp + 0x20;
  if (in(cp, 0x100, 0x137) || in(cp, 0x14A, 0x177)) return cp | 1;
  if ((in(cp, 0x139, 0x148) || in(cp, 0x179, 0x17E)) && (cp & 1)) return cp + 1;
  if (in(cp, 0x391, 0x3A9) && cp != 0x3A2) return cp + 0x20;
  if (in(cp, 0x410, 0x42F)) return cp + 0x20;
  if (in(cp, 0x400, 0x40F)) return cp + 0x50;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

template <typename Lookup>
ActionVector weighted_average(CorpusStats& stats, std::string_view text, Lookup&& lookup) {
  const auto tokens = tokenize(text);
  stats.add_document(tokens);

  ActionVector out;
  if (tokens.empty()) return out;

  // Sorted term order makes the sum independent of token order.
  std::map<std::string, std::uint64_t> tf;
  for (const auto& t : tokens) ++tf[t];

  double total_weight = 0.0;
  for (const auto& [token, count] : tf) {
    const double w = tfidf_weight(stats, token, count, tokens.size());
    if (w == 0.0) continue;
    const WordVector& v = lookup(token);
    for (std::size_t i = 0; i < kActionDim; ++i) out.values[i] += w * v[i];
    total_weight += w;
  }
  if (total_weight == 0.0) return ActionVector{};
  for (double& x : out.values) x /= total_weight;
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto cp = next_code_point(text, i);
    if (cp && is_word_char(*cp)) {
      append_utf8(current, fold_case(*cp));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

void CorpusStats::add_document(std::span<const std::string> tokens) {
  if (tokens.empty()) return;
  ++doc_count;
  std::map<std::string_view, bool> seen;
  for (const auto& t : tokens) {
    if (seen.emplace(t, true).second) ++doc_frequency[t];
  }
}

std::uint64_t CorpusStats::df(const std::string& token) const {
  auto it = doc_frequency.find(token);
  return it == doc_frequency.end() ? 0 : it->second;
}

double tfidf_weight(const CorpusStats& stats, const std::string& token, std::uint64_t tf,
                    std::uint64_t len) {
  if (len == 0) throw Error(Errc::InvalidArgument, "tfidf_weight requires len >= 1");
  if (stats.doc_count == 0) return 0.0;
  std::uint64_t df = stats.df(token);
  if (df == 0) df = stats.doc_count;
  const double n = static_cast<double>(stats.doc_count);
  return (static_cast<double>(tf) / static_cast<double>(len)) * std::log(n / static_cast<double>(df));
}

WordVector word_vector(std::string_view token) {
  if (token.empty()) throw Error(Errc::EmptyToken, "word_vector of empty token");
  Rng rng(fnv1a64(token));
  WordVector v;
  double norm2 = 0.0;
  for (double& x : v) {
    x = rng.gaussian();
    norm2 += x * x;
  }
  const double norm = std::sqrt(norm2);
  for (double& x : v) x /= norm;
  return v;
}

bool ActionVector::is_zero() const noexcept {
  for (double x : values) {
    if (x != 0.0) return false;
  }
  return true;
}

ActionVector action_vector(CorpusStats& stats, std::string_view text) {
  WordVector scratch;
  return weighted_average(stats, text, [&](const std::string& token) -> const WordVector& {
    scratch = word_vector(token);
    return scratch;
  });
}

ActionVector Vectorizer::embed(std::string_view text) {
  return weighted_average(stats_, text,
                          [&](const std::string& token) -> const WordVector& {
                            return cached_word_vector(token);
                          });
}

const WordVector& Vectorizer::cached_word_vector(const std::string& token) {
  auto it = cache_.find(token);
  if (it == cache_.end()) it = cache_.emplace(token, word_vector(token)).first;
  return it->second;
}

}  // namespace ttm
