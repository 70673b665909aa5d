#include "ttm/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ttm/error.hpp"
#include "ttm/random.hpp"

namespace ttm {

namespace {

using nlohmann::json;

constexpr double kBudgetEpsilon = 1e-9;

class StateHasher {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<unsigned char>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    for (char c : s) byte(static_cast<unsigned char>(c));
  }
  [[nodiscard]] std::uint64_t value() const noexcept { return h_; }

 private:
  void byte(unsigned char c) {
    h_ ^= c;
    h_ *= 0x100000001b3ULL;
  }
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

double refill_budget(const MemberResources& r, double minutes) {
  return std::min(r.budget_cap, r.budget + r.refill_rate * std::max(0.0, minutes));
}

// ---- JSON conversion -------------------------------------------------------

json settings_to_json(const RoomSettings& s) {
  json j;
  j["room_id"] = s.room_id;
  j["topic"] = s.topic;
  const auto& e = s.engine;
  j["engine"] = {{"refill_rate", e.refill_rate},         {"budget_cap", e.budget_cap},
                 {"initial_vote_tokens", e.initial_vote_tokens},
                 {"ticks_per_minute", e.ticks_per_minute}, {"election_ticks", e.election_ticks},
                 {"history_window", e.history_window},     {"task_quorum", e.task_quorum},
                 {"max_members", e.max_members}};
  j["scorer"] = s.scorer;
  j["lexicon_path"] = s.lexicon_path;
  j["constant_score"] = {s.constant_score.positive, s.constant_score.negative,
                         s.constant_score.confidence};
  j["external_scores_path"] = s.external_scores_path;
  j["matrix"] = s.matrix;
  j["rule"] = {{"banned_tokens", s.rule.banned_tokens}, {"mute_duration", s.rule.mute_duration}};
  j["heuristic"] = {{"k_atm", s.heuristic.k_atm}, {"k_eq", s.heuristic.k_eq}};
  if (s.heuristic.target_share) j["heuristic"]["target_share"] = *s.heuristic.target_share;
  j["weights_path"] = s.weights_path;
  return j;
}

RoomSettings settings_from_json(const json& j) {
  RoomSettings s;
  s.room_id = j.at("room_id").get<std::string>();
  s.topic = j.at("topic").get<std::string>();
  const auto& e = j.at("engine");
  s.engine.refill_rate = e.at("refill_rate").get<double>();
  s.engine.budget_cap = e.at("budget_cap").get<double>();
  s.engine.initial_vote_tokens = e.at("initial_vote_tokens").get<std::int64_t>();
  s.engine.ticks_per_minute = e.at("ticks_per_minute").get<double>();
  s.engine.election_ticks = e.at("election_ticks").get<LogicalTime>();
  s.engine.history_window = e.at("history_window").get<std::size_t>();
  s.engine.task_quorum = e.at("task_quorum").get<std::size_t>();
  s.engine.max_members = e.at("max_members").get<std::size_t>();
  s.scorer = j.at("scorer").get<std::string>();
  s.lexicon_path = j.at("lexicon_path").get<std::string>();
  const auto& cs = j.at("constant_score");
  s.constant_score = {cs.at(0).get<double>(), cs.at(1).get<double>(), cs.at(2).get<double>()};
  s.external_scores_path = j.at("external_scores_path").get<std::string>();
  s.matrix = j.at("matrix").get<std::string>();
  s.rule.banned_tokens = j.at("rule").at("banned_tokens").get<std::vector<std::string>>();
  s.rule.mute_duration = j.at("rule").at("mute_duration").get<LogicalTime>();
  s.heuristic.k_atm = j.at("heuristic").at("k_atm").get<double>();
  s.heuristic.k_eq = j.at("heuristic").at("k_eq").get<double>();
  if (j.at("heuristic").contains("target_share")) {
    s.heuristic.target_share = j.at("heuristic").at("target_share").get<double>();
  }
  s.weights_path = j.at("weights_path").get<std::string>();
  return s;
}

}  // namespace

void EngineConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::ConfigInvalid, "engine: " + m); };
  if (!(refill_rate >= 0.0)) fail("refill_rate must be >= 0");
  if (!(budget_cap > 0.0)) fail("budget_cap must be positive");
  if (initial_vote_tokens < 0) fail("vote tokens must be >= 0");
  if (!(ticks_per_minute > 0.0)) fail("ticks_per_minute must be positive");
  if (election_ticks < 1) fail("election_ticks must be >= 1");
  if (history_window < 1) fail("history_window must be >= 1");
  if (task_quorum < 1) fail("task_quorum must be >= 1");
  if (max_members < 1) fail("max_members must be >= 1");
}

ActionCost cost(ActionType type) noexcept {
  switch (type) {
    case ActionType::Speak: return {1.0, 0};
    case ActionType::Withdraw: return {1.0, 0};
    case ActionType::IssueTask: return {2.0, 0};
    case ActionType::Vote: return {0.0, 1};
  }
  return {};
}

ResourceLedger refill(ResourceLedger ledger, double elapsed_minutes) {
  if (!(elapsed_minutes >= 0.0)) throw Error(Errc::InvalidArgument, "elapsed time must be >= 0");
  for (auto& [_, r] : ledger) r.budget = refill_budget(r, elapsed_minutes);
  return ledger;
}

std::string_view to_string(OutcomeReason reason) noexcept {
  switch (reason) {
    case OutcomeReason::Ok: return "Ok";
    case OutcomeReason::BudgetExhausted: return "BudgetExhausted";
    case OutcomeReason::UnknownMember: return "UnknownMember";
    case OutcomeReason::InvalidTarget: return "InvalidTarget";
  }
  return "Unknown";
}

std::shared_ptr<const SentimentScorer> make_scorer(const RoomSettings& s) {
  if (s.scorer == "lexicon") {
    if (s.lexicon_path.empty()) throw Error(Errc::ConfigInvalid, "sentiment.lexicon is required");
    return std::make_shared<LexiconScorer>(std::make_shared<const Lexicon>(Lexicon::load(s.lexicon_path)));
  }
  if (s.scorer == "constant") return std::make_shared<ConstantScorer>(s.constant_score);
  if (s.scorer == "external") {
    return std::make_shared<ExternalScorer>(ExternalScorer::load(s.external_scores_path));
  }
  throw Error(Errc::ConfigInvalid, "unknown sentiment.scorer '" + s.scorer + "'");
}

MatrixKind make_matrix(const RoomSettings& s) {
  if (s.matrix == "noop") return NoOpMatrix{};
  if (s.matrix == "rule") return RuleMatrix{s.rule};
  if (s.matrix == "heuristic") {
    s.heuristic.validate();
    return HeuristicMatrix{s.heuristic};
  }
  if (s.matrix == "learned") {
    if (s.weights_path.empty()) throw Error(Errc::WeightsMissing, "matrix.weights is required");
    return LearnedMatrix{std::make_shared<const nn::ModelWeights>(nn::load_weights(s.weights_path))};
  }
  throw Error(Errc::ConfigInvalid, "unknown matrix.kind '" + s.matrix + "'");
}

Room::Room(RoomSettings settings, std::shared_ptr<const SentimentScorer> scorer, MatrixKind matrix)
    : settings_(std::move(settings)), scorer_(std::move(scorer)), matrix_(std::move(matrix)) {
  settings_.engine.validate();
  if (!scorer_) throw Error(Errc::InvalidArgument, "room needs a sentiment scorer");
  field_.room_id = settings_.room_id;
  field_.topic = settings_.topic;
}

Room Room::create(const RoomSettings& settings) {
  return Room(settings, make_scorer(settings), make_matrix(settings));
}

void Room::add_member(const MemberId& member) {
  if (member.empty()) throw Error(Errc::InvalidArgument, "member id must be nonempty");
  if (field_.has_member(member)) throw Error(Errc::InvalidArgument, "duplicate member " + member.str());
  if (field_.tribe.size() >= settings_.engine.max_members) throw Error(Errc::RoomFull, settings_.room_id);
  field_.tribe.push_back(member);
  MemberResources r;
  r.budget = settings_.engine.budget_cap;
  r.budget_cap = settings_.engine.budget_cap;
  r.refill_rate = settings_.engine.refill_rate;
  r.vote_tokens = settings_.engine.initial_vote_tokens;
  ledger_.add(member, r);
}

void Room::remove_member(const MemberId& member) {
  auto it = std::find(field_.tribe.begin(), field_.tribe.end(), member);
  if (it == field_.tribe.end()) throw Error(Errc::UnknownMember, member.str());
  field_.tribe.erase(it);
  ledger_.remove(member);
}

void Room::refill_to(ResourceLedger& ledger, LogicalTime now) const {
  const double tpm = settings_.engine.ticks_per_minute;
  for (auto& [_, r] : ledger) {
    const LogicalTime from = std::max(refilled_at_, r.muted_until);
    if (now > from) r.budget = refill_budget(r, static_cast<double>(now - from) / tpm);
  }
}

ResourceLedger Room::ledger_at(LogicalTime now) const {
  ResourceLedger copy = ledger_;
  refill_to(copy, now);
  return copy;
}

ResourceStructure Room::resources_at(const MemberId& member, LogicalTime now) const {
  return resource_structure(ledger_at(now), member);
}

const Message* Room::find_message(MessageId id) const {
  if (id == 0 || id > field_.transcript.size()) return nullptr;
  return &field_.transcript[id - 1];
}

ActionOutcome Room::submit(const Action& action) {
  const LogicalTime now = action.logical_time;
  if (now <= clock_) {
    throw Error(Errc::InvalidArgument, "logical time " + std::to_string(now) +
                                           " does not exceed room clock " + std::to_string(clock_));
  }
  ActionOutcome out;
  auto reject = [&](OutcomeReason reason) {
    out.accepted = false;
    out.reason = reason;
    return out;
  };
  if (!field_.has_member(action.actor)) return reject(OutcomeReason::UnknownMember);

  ResourceLedger refilled = ledger_;
  refill_to(refilled, now);
  const ActionCost price = cost(action.type());
  {
    const MemberResources& r = refilled.at(action.actor);
    if (r.budget + kBudgetEpsilon < price.budget || r.vote_tokens < price.vote_tokens) {
      return reject(OutcomeReason::BudgetExhausted);
    }
  }

  // Target validation happens before anything is committed.
  if (const auto* w = std::get_if<Withdraw>(&action.kind)) {
    const Message* m = find_message(w->message_id);
    if (!m || m->author != action.actor || m->withdrawn) return reject(OutcomeReason::InvalidTarget);
  } else if (const auto* v = std::get_if<Vote>(&action.kind)) {
    if (const auto* candidate = std::get_if<MemberId>(&v->target)) {
      if (!field_.has_member(*candidate)) return reject(OutcomeReason::InvalidTarget);
    } else {
      const TaskId tid = std::get<TaskId>(v->target);
      if (tid == 0 || tid > tasks_.size()) return reject(OutcomeReason::InvalidTarget);
      const TaskRecord& t = tasks_[tid - 1];
      if (t.status != TaskStatus::Open || t.issuer == action.actor ||
          std::find(t.closers.begin(), t.closers.end(), action.actor) != t.closers.end()) {
        return reject(OutcomeReason::InvalidTarget);
      }
    }
  }

  // Commit: refill, effect, matrix, cost.
  ledger_ = std::move(refilled);
  refilled_at_ = now;
  clock_ = now;
  const AtmosphereWindow preceding = field_.atmosphere;

  ActionVector action_vec;
  std::visit(
      [&](const auto& kind) {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, Speak>) {
          Message m;
          m.id = next_message_id_++;
          m.author = action.actor;
          m.text = kind.text;
          m.logical_time = now;
          m.atmosphere_value = std::clamp(atmosphere_value(scorer_->score(kind.text)), -1.0, 1.0);
          field_.atmosphere.push(m.atmosphere_value);
          message_hashes_.push_back(message_hash(m));
          field_.transcript.push_back(std::move(m));
          out.message_id = field_.transcript.back().id;
          action_vec = vectorizer_.embed(kind.text);
        } else if constexpr (std::is_same_v<K, Withdraw>) {
          Message& m = field_.transcript[kind.message_id - 1];
          m.withdrawn = true;
          message_hashes_[kind.message_id - 1] = message_hash(m);
          rebuild_atmosphere();
          out.message_id = kind.message_id;
        } else if constexpr (std::is_same_v<K, IssueTask>) {
          TaskRecord t;
          t.id = next_task_id_++;
          t.description = kind.description;
          t.issuer = action.actor;
          t.issued_at = now;
          tasks_.push_back(std::move(t));
          out.task_id = tasks_.back().id;
          action_vec = vectorizer_.embed(kind.description);
        } else {
          if (const auto* candidate = std::get_if<MemberId>(&kind.target)) {
            if (!votes_.open) {
              votes_.open = true;
              votes_.deadline = now + settings_.engine.election_ticks;
              votes_.tallies.clear();
              votes_.spent.clear();
            }
            ++votes_.tallies[*candidate];
            ++votes_.spent[action.actor];
          } else {
            TaskRecord& t = tasks_[std::get<TaskId>(kind.target) - 1];
            t.closers.push_back(action.actor);
            out.task_id = t.id;
            if (t.closers.size() >= settings_.engine.task_quorum) {
              t.status = TaskStatus::Completed;
              t.completed_at = now;
              for (const auto& closer : t.closers) {
                if (ledger_.contains(closer)) ++ledger_.at(closer).vote_tokens;
              }
            }
          }
        }
      },
      action.kind);

  const ResourceStructure rs = resource_structure(ledger_, action.actor);
  const FeatureVector features = assemble_features(action_vec, rs, atmosphere_vector(preceding));
  const std::vector<FeatureVector> history(history_.begin(), history_.end());
  const AllocationContext ctx{action.actor, ledger_.at(action.actor).budget_cap, field_.tribe.size()};
  const MatrixDecision decision = allocate(matrix_, features, history, action, rs, ctx);

  MemberResources& r = ledger_.at(action.actor);
  r.budget = decision.new_budget;
  if (decision.mute_ticks > 0) r.muted_until = std::max(r.muted_until, now + decision.mute_ticks);
  r.budget = std::max(0.0, r.budget - price.budget);
  r.vote_tokens -= price.vote_tokens;

  history_.push_back(features);
  while (history_.size() > settings_.engine.history_window - 1) history_.pop_front();

  out.accepted = true;
  out.reason = OutcomeReason::Ok;
  out.decision = decision;
  out.resources = rs;
  return out;
}

void Room::rebuild_atmosphere() {
  std::vector<double> recent;
  for (auto it = field_.transcript.rbegin(); it != field_.transcript.rend() && recent.size() < kAtmosphereDim; ++it) {
    if (!it->withdrawn) recent.push_back(it->atmosphere_value);
  }
  field_.atmosphere.clear();
  for (auto it = recent.rbegin(); it != recent.rend(); ++it) field_.atmosphere.push(*it);
}

std::optional<ElectionResult> Room::advance(LogicalTime now) {
  if (votes_.open && now >= votes_.deadline) return tally_votes(now);
  return std::nullopt;
}

ElectionResult Room::tally_votes(LogicalTime now) {
  if (!votes_.open) throw Error(Errc::NoOpenElection, "no election is open");
  if (now < votes_.deadline) throw Error(Errc::NoOpenElection, "election deadline has not passed");

  ElectionResult result;
  result.tallies = votes_.tallies;
  std::int64_t cast = 0;
  for (const auto& [_, n] : votes_.tallies) cast += n;

  std::optional<MemberId> winner;
  for (const auto& [candidate, n] : votes_.tallies) {
    if (2 * n > cast) winner = candidate;
  }
  if (winner && ledger_.contains(*winner)) {
    auto spent = votes_.spent.find(*winner);
    const std::int64_t refund = spent == votes_.spent.end() ? 0 : spent->second;
    ledger_.at(*winner).vote_tokens += refund + 2;
    result.refunded_tokens = refund;
    votes_.admin = winner;
    result.winner = winner;
  } else {
    for (const auto& [voter, n] : votes_.spent) {
      if (ledger_.contains(voter)) {
        ledger_.at(voter).vote_tokens += n;
        result.refunded_tokens += n;
      }
    }
  }
  votes_.open = false;
  votes_.deadline = 0;
  votes_.tallies.clear();
  votes_.spent.clear();
  return result;
}

std::uint64_t Room::message_hash(const Message& m) const {
  StateHasher h;
  h.u64(m.id);
  h.str(m.author.str());
  h.str(m.text);
  h.i64(m.logical_time);
  h.u64(m.withdrawn ? 1 : 0);
  h.f64(m.atmosphere_value);
  return h.value();
}

std::uint64_t Room::state_hash() const {
  StateHasher h;
  h.str(field_.room_id);
  h.str(field_.topic);
  h.u64(field_.tribe.size());
  for (const auto& m : field_.tribe) h.str(m.str());
  for (double v : field_.atmosphere.values()) h.f64(v);
  h.u64(message_hashes_.size());
  for (std::uint64_t mh : message_hashes_) h.u64(mh);
  h.u64(ledger_.size());
  for (const auto& [id, r] : ledger_) {
    h.str(id.str());
    h.f64(r.budget);
    h.i64(r.vote_tokens);
    h.f64(r.refill_rate);
    h.f64(r.budget_cap);
    h.i64(r.muted_until);
  }
  h.u64(vectorizer_.stats().doc_count);
  h.u64(vectorizer_.stats().doc_frequency.size());
  for (const auto& [tok, df] : vectorizer_.stats().doc_frequency) {
    h.str(tok);
    h.u64(df);
  }
  h.u64(votes_.open ? 1 : 0);
  h.i64(votes_.deadline);
  for (const auto& [c, n] : votes_.tallies) {
    h.str(c.str());
    h.i64(n);
  }
  for (const auto& [c, n] : votes_.spent) {
    h.str(c.str());
    h.i64(n);
  }
  h.str(votes_.admin ? votes_.admin->str() : std::string());
  h.u64(tasks_.size());
  for (const auto& t : tasks_) {
    h.u64(t.id);
    h.str(t.description);
    h.str(t.issuer.str());
    h.u64(t.status == TaskStatus::Completed ? 1 : 0);
    h.u64(t.closers.size());
    for (const auto& c : t.closers) h.str(c.str());
    h.i64(t.issued_at);
    h.i64(t.completed_at);
  }
  h.u64(history_.size());
  for (const auto& f : history_) {
    for (double v : f.values) h.f64(v);
  }
  h.i64(clock_);
  h.i64(refilled_at_);
  h.u64(next_message_id_);
  h.u64(next_task_id_);
  return h.value();
}

std::string Room::serialize() const {
  json j;
  j["format"] = "ttm-room";
  j["version"] = 1;
  j["settings"] = settings_to_json(settings_);
  json tribe = json::array();
  for (const auto& m : field_.tribe) tribe.push_back(m.str());
  j["tribe"] = tribe;
  j["atmosphere"] = field_.atmosphere.values();
  json transcript = json::array();
  for (const auto& m : field_.transcript) {
    transcript.push_back({m.id, m.author.str(), m.text, m.logical_time, m.withdrawn, m.atmosphere_value});
  }
  j["transcript"] = transcript;
  json ledger = json::array();
  for (const auto& [id, r] : ledger_) {
    ledger.push_back({id.str(), r.budget, r.vote_tokens, r.refill_rate, r.budget_cap, r.muted_until});
  }
  j["ledger"] = ledger;
  json df = json::object();
  for (const auto& [tok, n] : vectorizer_.stats().doc_frequency) df[tok] = n;
  j["corpus"] = {{"doc_count", vectorizer_.stats().doc_count}, {"doc_frequency", df}};
  json tallies = json::object();
  for (const auto& [c, n] : votes_.tallies) tallies[c.str()] = n;
  json spent = json::object();
  for (const auto& [c, n] : votes_.spent) spent[c.str()] = n;
  j["votes"] = {{"open", votes_.open}, {"deadline", votes_.deadline}, {"tallies", tallies},
                {"spent", spent}, {"admin", votes_.admin ? votes_.admin->str() : std::string()}};
  json tasks = json::array();
  for (const auto& t : tasks_) {
    json closers = json::array();
    for (const auto& c : t.closers) closers.push_back(c.str());
    tasks.push_back({{"id", t.id}, {"description", t.description}, {"issuer", t.issuer.str()},
                     {"completed", t.status == TaskStatus::Completed}, {"closers", closers},
                     {"issued_at", t.issued_at}, {"completed_at", t.completed_at}});
  }
  j["tasks"] = tasks;
  json history = json::array();
  for (const auto& f : history_) history.push_back(f.values);
  j["history"] = history;
  j["clock"] = clock_;
  j["refilled_at"] = refilled_at_;
  j["next_message_id"] = next_message_id_;
  j["next_task_id"] = next_task_id_;
  return j.dump();
}

Room Room::deserialize(std::string_view snapshot) {
  json j;
  try {
    j = json::parse(snapshot);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptLog, std::string("room snapshot is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "ttm-room" || j.at("version") != 1) {
      throw Error(Errc::VersionMismatch, "unsupported room snapshot");
    }
    Room room = Room::create(settings_from_json(j.at("settings")));
    for (const auto& m : j.at("tribe")) room.field_.tribe.emplace_back(m.get<std::string>());
    const auto atm = j.at("atmosphere").get<std::vector<double>>();
    if (atm.size() != kAtmosphereDim) throw Error(Errc::CorruptLog, "atmosphere window size");
    for (double v : atm) room.field_.atmosphere.push(v);
    for (const auto& m : j.at("transcript")) {
      Message msg;
      msg.id = m.at(0).get<MessageId>();
      msg.author = MemberId(m.at(1).get<std::string>());
      msg.text = m.at(2).get<std::string>();
      msg.logical_time = m.at(3).get<LogicalTime>();
      msg.withdrawn = m.at(4).get<bool>();
      msg.atmosphere_value = m.at(5).get<double>();
      room.message_hashes_.push_back(room.message_hash(msg));
      room.field_.transcript.push_back(std::move(msg));
    }
    for (const auto& e : j.at("ledger")) {
      MemberResources r;
      r.budget = e.at(1).get<double>();
      r.vote_tokens = e.at(2).get<std::int64_t>();
      r.refill_rate = e.at(3).get<double>();
      r.budget_cap = e.at(4).get<double>();
      r.muted_until = e.at(5).get<LogicalTime>();
      room.ledger_.add(MemberId(e.at(0).get<std::string>()), r);
    }
    CorpusStats stats;
    stats.doc_count = j.at("corpus").at("doc_count").get<std::uint64_t>();
    for (const auto& [tok, n] : j.at("corpus").at("doc_frequency").items()) {
      stats.doc_frequency[tok] = n.get<std::uint64_t>();
    }
    room.vectorizer_.set_stats(std::move(stats));
    const auto& v = j.at("votes");
    room.votes_.open = v.at("open").get<bool>();
    room.votes_.deadline = v.at("deadline").get<LogicalTime>();
    for (const auto& [c, n] : v.at("tallies").items()) room.votes_.tallies[MemberId(c)] = n.get<std::int64_t>();
    for (const auto& [c, n] : v.at("spent").items()) room.votes_.spent[MemberId(c)] = n.get<std::int64_t>();
    const auto admin = v.at("admin").get<std::string>();
    if (!admin.empty()) room.votes_.admin = MemberId(admin);
    for (const auto& t : j.at("tasks")) {
      TaskRecord rec;
      rec.id = t.at("id").get<TaskId>();
      rec.description = t.at("description").get<std::string>();
      rec.issuer = MemberId(t.at("issuer").get<std::string>());
      rec.status = t.at("completed").get<bool>() ? TaskStatus::Completed : TaskStatus::Open;
      for (const auto& c : t.at("closers")) rec.closers.emplace_back(c.get<std::string>());
      rec.issued_at = t.at("issued_at").get<LogicalTime>();
      rec.completed_at = t.at("completed_at").get<LogicalTime>();
      room.tasks_.push_back(std::move(rec));
    }
    for (const auto& f : j.at("history")) {
      const auto values = f.get<std::vector<double>>();
      if (values.size() != kFeatureDim) throw Error(Errc::CorruptLog, "history feature width");
      FeatureVector fv;
      std::copy(values.begin(), values.end(), fv.values.begin());
      room.history_.push_back(fv);
    }
    room.clock_ = j.at("clock").get<LogicalTime>();
    room.refilled_at_ = j.at("refilled_at").get<LogicalTime>();
    room.next_message_id_ = j.at("next_message_id").get<MessageId>();
    room.next_task_id_ = j.at("next_task_id").get<TaskId>();
    return room;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptLog, std::string("room snapshot is malformed: ") + e.what());
  }
}

}  // namespace ttm
