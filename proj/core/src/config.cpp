#include "ttm/config.hpp"

#include <charconv>
#include <fstream>

#include "ttm/error.hpp"

namespace ttm {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ConfigInvalid, origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw Error(Errc::ConfigInvalid, origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.entries_[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) { return load_nested(path, 0); }

KeyValueConfig KeyValueConfig::load_nested(const std::filesystem::path& path, int depth) {
  if (depth > 8) throw Error(Errc::ConfigInvalid, "include nesting too deep at " + path.string());
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path.string());
  KeyValueConfig cfg = parse(in, path.string());
  cfg.base_dir_ = path.parent_path();
  for (const auto& [key, _] : cfg.entries_) cfg.dirs_[key] = cfg.base_dir_;
  auto inc = cfg.entries_.find("include");
  if (inc == cfg.entries_.end()) return cfg;

  // Included entries act as defaults and keep resolving paths against their own file.
  std::filesystem::path inc_path(inc->second);
  if (inc_path.is_relative()) inc_path = cfg.base_dir_ / inc_path;
  cfg.entries_.erase(inc);
  cfg.dirs_.erase("include");
  KeyValueConfig merged = load_nested(inc_path, depth + 1);
  for (const auto& [key, value] : cfg.entries_) {
    merged.entries_[key] = value;
    merged.dirs_[key] = cfg.base_dir_;
  }
  merged.base_dir_ = cfg.base_dir_;
  merged.origin_ = cfg.origin_;
  return merged;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
  dirs_.erase(key);
}

bool KeyValueConfig::contains(const std::string& key) const { return entries_.count(key) != 0; }

const std::string* KeyValueConfig::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw Error(Errc::ConfigInvalid, origin_ + ": " + key + " is not a number: '" + *v + "'");
  }
  return out;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw Error(Errc::ConfigInvalid, origin_ + ": " + key + " is not an integer: '" + *v + "'");
  }
  return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw Error(Errc::ConfigInvalid, origin_ + ": " + key + " is not a boolean: '" + *v + "'");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const std::string* v = find(key);
  if (!v) return out;
  std::string_view rest(*v);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string item = trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::filesystem::path KeyValueConfig::get_path(const std::string& key) const {
  const std::string* v = find(key);
  if (!v || v->empty()) return {};
  std::filesystem::path p(*v);
  auto dir = dirs_.find(key);
  if (p.is_relative() && dir != dirs_.end() && !dir->second.empty()) p = dir->second / p;
  return std::filesystem::absolute(p).lexically_normal();
}

void KeyValueConfig::require_all_used() const {
  std::string unknown;
  for (const auto& [key, _] : entries_) {
    if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw Error(Errc::ConfigInvalid, origin_ + ": unknown keys: " + unknown);
}

RoomSettings room_settings_from_config(const KeyValueConfig& cfg) {
  RoomSettings s;
  s.room_id = cfg.get_string("room.id", s.room_id);
  s.topic = cfg.get_string("room.topic", s.topic);

  auto& e = s.engine;
  e.refill_rate = cfg.get_double("engine.refill_rate", e.refill_rate);
  e.budget_cap = cfg.get_double("engine.budget_cap", e.budget_cap);
  e.initial_vote_tokens = cfg.get_int("engine.vote_tokens", e.initial_vote_tokens);
  e.ticks_per_minute = cfg.get_double("engine.ticks_per_minute", e.ticks_per_minute);
  e.election_ticks = cfg.get_int("engine.election_ticks", e.election_ticks);
  auto non_negative = [](std::int64_t v, const char* key) {
    if (v < 0) throw Error(Errc::ConfigInvalid, std::string(key) + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  e.history_window = non_negative(
      cfg.get_int("engine.history_window", static_cast<std::int64_t>(e.history_window)), "engine.history_window");
  e.task_quorum =
      non_negative(cfg.get_int("engine.task_quorum", static_cast<std::int64_t>(e.task_quorum)), "engine.task_quorum");
  e.max_members =
      non_negative(cfg.get_int("engine.max_members", static_cast<std::int64_t>(e.max_members)), "engine.max_members");
  e.validate();

  s.scorer = cfg.get_string("sentiment.scorer", s.scorer);
  s.lexicon_path = cfg.get_path("sentiment.lexicon").string();
  const auto constant = cfg.get_list("sentiment.constant");
  if (!constant.empty()) {
    if (constant.size() != 3) throw Error(Errc::ConfigInvalid, "sentiment.constant needs P, N, C");
    try {
      s.constant_score = {std::stod(constant[0]), std::stod(constant[1]), std::stod(constant[2])};
    } catch (const std::logic_error&) {
      throw Error(Errc::ConfigInvalid, "sentiment.constant entries must be numbers");
    }
  }
  s.external_scores_path = cfg.get_path("sentiment.external_scores").string();

  s.matrix = cfg.get_string("matrix.kind", s.matrix);
  s.rule.banned_tokens = cfg.get_list("matrix.rule.banned");
  s.rule.mute_duration = cfg.get_int("matrix.rule.mute_duration", s.rule.mute_duration);
  if (s.rule.mute_duration < 0) throw Error(Errc::ConfigInvalid, "matrix.rule.mute_duration must be >= 0");
  s.heuristic.k_atm = cfg.get_double("matrix.heuristic.k_atm", s.heuristic.k_atm);
  s.heuristic.k_eq = cfg.get_double("matrix.heuristic.k_eq", s.heuristic.k_eq);
  if (cfg.contains("matrix.heuristic.target_share")) {
    s.heuristic.target_share = cfg.get_double("matrix.heuristic.target_share", 0.0);
  }
  try {
    s.heuristic.validate();
  } catch (const Error& err) {
    throw Error(Errc::ConfigInvalid, err.what());
  }
  s.weights_path = cfg.get_path("matrix.weights").string();
  return s;
}

}  // namespace ttm
