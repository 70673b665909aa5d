#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ttm/types.hpp"

namespace ttm {

/// Lowercased runs of letters and digits; everything else separates tokens.
/// UTF-8 aware: non-ASCII code points count as word characters unless they
/// fall in a punctuation, symbol, space or emoji block. Invalid UTF-8 bytes
/// are separators.
std::vector<std::string> tokenize(std::string_view text);

/// Streaming document-frequency statistics. One chat message is one document.
struct CorpusStats {
  std::uint64_t doc_count = 0;
  std::map<std::string, std::uint64_t> doc_frequency;

  /// Counts each distinct token once. Token lists with no tokens are ignored.
  void add_document(std::span<const std::string> tokens);

  [[nodiscard]] std::uint64_t df(const std::string& token) const;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// (tf / len) * ln(N / df). Unseen tokens take df = N, and N = 0 yields 0.
double tfidf_weight(const CorpusStats& stats, const std::string& token, std::uint64_t tf,
                    std::uint64_t len);

using WordVector = std::array<double, kActionDim>;

/// Unit-length pseudo-random Gaussian vector seeded by the token's FNV-1a hash.
/// Throws EmptyToken.
WordVector word_vector(std::string_view token);

struct ActionVector {
  std::array<double, kActionDim> values{};

  [[nodiscard]] bool is_zero() const noexcept;
  friend bool operator==(const ActionVector&, const ActionVector&) = default;
};

/// Adds `text` to `stats` as one document, then returns the TF-IDF weighted
/// average of its distinct tokens' word vectors (zero vector if every weight is 0).
ActionVector action_vector(CorpusStats& stats, std::string_view text);

/// Per-room vectorizer: corpus statistics plus a memo of word vectors.
class Vectorizer {
 public:
  ActionVector embed(std::string_view text);

  [[nodiscard]] const CorpusStats& stats() const noexcept { return stats_; }
  void set_stats(CorpusStats stats) { stats_ = std::move(stats); }

 private:
  const WordVector& cached_word_vector(const std::string& token);

  CorpusStats stats_;
  std::unordered_map<std::string, WordVector> cache_;
};

}  // namespace ttm
