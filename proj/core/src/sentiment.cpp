#include "ttm/sentiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ttm/error.hpp"
#include "ttm/vectorizer.hpp"

namespace ttm {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(Errc::ConfigInvalid, "bad number for " + std::string(what) + ": " + std::string(s));
  }
  return v;
}

}  // namespace

Lexicon Lexicon::parse(std::istream& in) {
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(Errc::ConfigInvalid, "lexicon line " + std::to_string(lineno) + ": missing tab");
    }
    const std::string_view pol = std::string_view(line).substr(tab + 1);
    int polarity = 0;
    if (pol == "+1" || pol == "1") {
      polarity = 1;
    } else if (pol == "-1") {
      polarity = -1;
    } else {
      throw Error(Errc::ConfigInvalid,
                  "lexicon line " + std::to_string(lineno) + ": polarity must be +1 or -1");
    }
    lex.add(std::string_view(line).substr(0, tab), polarity);
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open lexicon " + path.string());
  return parse(in);
}

void Lexicon::add(std::string_view token, int polarity) {
  if (polarity != 1 && polarity != -1) {
    throw Error(Errc::InvalidArgument, "polarity must be +1 or -1");
  }
  const auto tokens = tokenize(token);
  if (tokens.size() != 1) {
    throw Error(Errc::ConfigInvalid, "lexicon entry is not a single token: " + std::string(token));
  }
  auto [it, inserted] = polarity_.emplace(tokens.front(), polarity);
  if (!inserted && it->second != polarity) {
    throw Error(Errc::ConfigInvalid, "conflicting polarity for " + tokens.front());
  }
}

int Lexicon::polarity(const std::string& token) const {
  auto it = polarity_.find(token);
  return it == polarity_.end() ? 0 : it->second;
}

std::size_t Lexicon::count(int polarity) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      polarity_.begin(), polarity_.end(), [&](const auto& kv) { return kv.second == polarity; }));
}

LexiconScorer::LexiconScorer(std::shared_ptr<const Lexicon> lexicon) : lexicon_(std::move(lexicon)) {
  if (!lexicon_) throw Error(Errc::InvalidArgument, "lexicon scorer needs a lexicon");
}

SentimentScore LexiconScorer::score(std::string_view text) const {
  const auto tokens = tokenize(text);
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (const auto& t : tokens) {
    const int p = lexicon_->polarity(t);
    if (p > 0) ++pos;
    if (p < 0) ++neg;
  }
  const double total = static_cast<double>(std::max<std::size_t>(tokens.size(), 1));
  return {static_cast<double>(pos) / total, static_cast<double>(neg) / total,
          static_cast<double>(pos + neg) / total};
}

ConstantScorer::ConstantScorer(SentimentScore score) : score_(score) {
  if (!in_unit(score.positive) || !in_unit(score.negative) || !in_unit(score.confidence)) {
    throw Error(Errc::OutOfRange, "constant score fields must lie in [0, 1]");
  }
}

ExternalScorer ExternalScorer::parse(std::istream& in) {
  ExternalScorer scorer;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    for (std::size_t tab; (tab = rest.rfind('\t')) != std::string_view::npos && cols.size() < 3;) {
      cols.push_back(rest.substr(tab + 1));
      rest = rest.substr(0, tab);
    }
    if (cols.size() != 3) throw Error(Errc::ConfigInvalid, "external score line needs 4 columns");
    SentimentScore s{parse_double(cols[2], "P"), parse_double(cols[1], "N"),
                     parse_double(cols[0], "C")};
    if (!in_unit(s.positive) || !in_unit(s.negative) || !in_unit(s.confidence)) {
      throw Error(Errc::OutOfRange, "external score outside [0, 1]");
    }
    scorer.table_.insert_or_assign(std::string(rest), s);
  }
  return scorer;
}

ExternalScorer ExternalScorer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open external scores " + path.string());
  return parse(in);
}

SentimentScore ExternalScorer::score(std::string_view text) const {
  auto it = table_.find(text);
  return it == table_.end() ? SentimentScore{} : it->second;
}

double atmosphere_value(const SentimentScore& score) {
  if (!in_unit(score.positive) || !in_unit(score.negative) || !in_unit(score.confidence)) {
    throw Error(Errc::OutOfRange, "sentiment score fields must lie in [0, 1]");
  }
  return (score.positive - score.negative) * score.confidence;
}

std::array<double, kAtmosphereDim> atmosphere_vector(const AtmosphereWindow& window) {
  return window.values();
}

}  // namespace ttm
