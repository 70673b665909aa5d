#pragma once

#include <array>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

#include "ttm/types.hpp"

namespace ttm {

/// Positive probability, negative probability and confidence, each in [0, 1].
struct SentimentScore {
  double positive = 0.0;
  double negative = 0.0;
  double confidence = 0.0;
};

/// Lowercase token -> polarity (+1 / -1).
class Lexicon {
 public:
  Lexicon() = default;

  /// Parses `token<TAB>+1|-1` lines. Blank lines and `#` comments are skipped.
  /// Tokens are casefolded; a token listed twice with different polarity is
  /// a ConfigInvalid error.
  static Lexicon parse(std::istream& in);
  static Lexicon load(const std::filesystem::path& path);

  void add(std::string_view token, int polarity);
  /// 0 when the token is not in the lexicon.
  [[nodiscard]] int polarity(const std::string& token) const;
  [[nodiscard]] std::size_t size() const noexcept { return polarity_.size(); }
  [[nodiscard]] std::size_t count(int polarity) const noexcept;

 private:
  std::unordered_map<std::string, int> polarity_;
};

class SentimentScorer {
 public:
  virtual ~SentimentScorer() = default;
  [[nodiscard]] virtual SentimentScore score(std::string_view text) const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

/// P = p/max(t,1), N = n/max(t,1), C = (p+n)/max(t,1) over t tokens with p
/// positive and n negative lexicon hits.
class LexiconScorer final : public SentimentScorer {
 public:
  explicit LexiconScorer(std::shared_ptr<const Lexicon> lexicon);
  [[nodiscard]] SentimentScore score(std::string_view text) const override;
  [[nodiscard]] std::string name() const override { return "lexicon"; }

 private:
  std::shared_ptr<const Lexicon> lexicon_;
};

/// Returns the same score for every text.
class ConstantScorer final : public SentimentScorer {
 public:
  explicit ConstantScorer(SentimentScore score);
  [[nodiscard]] SentimentScore score(std::string_view) const override { return score_; }
  [[nodiscard]] std::string name() const override { return "constant"; }

 private:
  SentimentScore score_;
};

/// Scores produced offline by an external model, looked up by exact text.
/// File format: `text<TAB>P<TAB>N<TAB>C` per line. Unknown texts score (0,0,0).
class ExternalScorer final : public SentimentScorer {
 public:
  static ExternalScorer load(const std::filesystem::path& path);
  static ExternalScorer parse(std::istream& in);

  [[nodiscard]] SentimentScore score(std::string_view text) const override;
  [[nodiscard]] std::string name() const override { return "external"; }

 private:
  std::map<std::string, SentimentScore, std::less<>> table_;
};

/// (P - N) * C. Throws OutOfRange if any field lies outside [0, 1].
double atmosphere_value(const SentimentScore& score);

/// The window's ten values, oldest first.
std::array<double, kAtmosphereDim> atmosphere_vector(const AtmosphereWindow& window);

}  // namespace ttm
