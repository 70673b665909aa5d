#include "ttm/hub.hpp"

#include <algorithm>
#include <chrono>

#include <nlohmann/json.hpp>

#include "ttm/error.hpp"

namespace ttm::service {

namespace {

using nlohmann::json;

constexpr std::size_t kMaxTextBytes = 4000;
constexpr std::size_t kMaxNameBytes = 64;

json envelope(std::string_view type, const json& id, const std::string& room, json payload) {
  json j;
  j["type"] = type;
  if (!id.is_null()) j["id"] = id;
  if (!room.empty()) j["room"] = room;
  j["payload"] = std::move(payload);
  return j;
}

std::string reject(const json& id, std::string_view code, const std::string& message) {
  json j;
  j["type"] = "reject";
  j["id"] = id;
  j["payload"] = {{"code", code}, {"message", message}};
  return j.dump();
}

json message_json(const Message& m) {
  return {{"id", m.id},
          {"author", m.author.str()},
          {"text", m.withdrawn ? std::string() : m.text},
          {"time", m.logical_time},
          {"atmosphere", m.atmosphere_value},
          {"withdrawn", m.withdrawn}};
}

json task_json(const TaskRecord& t) {
  json closers = json::array();
  for (const auto& c : t.closers) closers.push_back(c.str());
  return {{"id", t.id},
          {"description", t.description},
          {"issuer", t.issuer.str()},
          {"status", t.status == TaskStatus::Open ? "open" : "completed"},
          {"closers", closers}};
}

json tallies_json(const std::map<MemberId, std::int64_t>& tallies) {
  json j = json::object();
  for (const auto& [c, n] : tallies) j[c.str()] = n;
  return j;
}

std::function<LogicalTime()> wall_clock(double ticks_per_minute) {
  const auto start = std::chrono::steady_clock::now();
  return [start, ticks_per_minute] {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return static_cast<LogicalTime>(elapsed.count() * ticks_per_minute / 60.0);
  };
}

}  // namespace

bool valid_room_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

struct ChatHub::Connection {
  std::optional<MemberId> member;
  std::string room;
  std::set<std::string> seen_ids;
};

struct ChatHub::RoomSlot {
  std::string id;
  std::optional<Room> memory;
  std::optional<PersistentRoom> persistent;
  std::map<MemberId, ConnId> members;
  LogicalTime last_time = 0;
  std::size_t since_snapshot = 0;

  [[nodiscard]] const Room& room() const { return persistent ? persistent->room() : *memory; }
  void add(const MemberId& m) { persistent ? persistent->add_member(m) : memory->add_member(m); }
  void remove(const MemberId& m) { persistent ? persistent->remove_member(m) : memory->remove_member(m); }
  ActionOutcome submit(const Action& a) { return persistent ? persistent->submit(a) : memory->submit(a); }
  std::optional<ElectionResult> advance(LogicalTime now) {
    return persistent ? persistent->advance(now) : memory->advance(now);
  }
};

ChatHub::ChatHub(HubConfig config) : config_(std::move(config)) {
  config_.room_template.engine.validate();
  if (!config_.clock) config_.clock = wall_clock(config_.room_template.engine.ticks_per_minute);
}

ChatHub::~ChatHub() = default;

ConnId ChatHub::connect() {
  const ConnId id = next_conn_++;
  conns_.emplace(id, std::make_unique<Connection>());
  return id;
}

ChatHub::RoomSlot& ChatHub::open_room(const std::string& room_id) {
  if (auto it = rooms_.find(room_id); it != rooms_.end()) return *it->second;
  auto slot = std::make_unique<RoomSlot>();
  slot->id = room_id;
  RoomSettings settings = config_.room_template;
  settings.room_id = room_id;
  if (config_.data_dir.empty()) {
    slot->memory.emplace(Room::create(settings));
  } else {
    const auto dir = config_.data_dir / room_id;
    if (PersistentRoom::exists(dir)) {
      slot->persistent.emplace(PersistentRoom::open(dir));
      // Nobody is connected to a room that was just reopened.
      const auto stale = slot->persistent->room().field().tribe;
      for (const auto& m : stale) slot->persistent->remove_member(m);
    } else {
      slot->persistent.emplace(PersistentRoom::create(dir, Room::create(settings)));
    }
  }
  slot->last_time = slot->room().clock();
  return *rooms_.emplace(room_id, std::move(slot)).first->second;
}

LogicalTime ChatHub::next_time(RoomSlot& slot) {
  slot.last_time = std::max({slot.last_time + 1, slot.room().clock() + 1, config_.clock()});
  return slot.last_time;
}

void ChatHub::after_commit(RoomSlot& slot) {
  if (!slot.persistent) return;
  if (++slot.since_snapshot >= config_.snapshot_every) {
    slot.persistent->snapshot();
    slot.since_snapshot = 0;
  }
}

void ChatHub::broadcast(const RoomSlot& slot, const std::string& text, std::vector<Outbound>& out) const {
  for (const auto& [_, conn] : slot.members) out.push_back({conn, text});
}

void ChatHub::push_state(const RoomSlot& slot, std::vector<Outbound>& out) const {
  const Room& room = slot.room();
  const ResourceLedger ledger = room.ledger_at(slot.last_time);
  json members = json::array();
  for (const auto& m : room.field().tribe) members.push_back(m.str());
  const auto& atm = room.field().atmosphere.values();
  for (const auto& [member, conn] : slot.members) {
    const ResourceStructure rs = resource_structure(ledger, member);
    const MemberResources& r = ledger.at(member);
    json payload{{"member", member.str()},
                 {"budget", rs.count},
                 {"proportion", rs.proportion},
                 {"budget_cap", r.budget_cap},
                 {"refill_rate", r.refill_rate},
                 {"vote_tokens", r.vote_tokens},
                 {"muted_until", r.muted_until},
                 {"atmosphere", std::vector<double>(atm.begin(), atm.end())},
                 {"time", slot.last_time},
                 {"members", members},
                 {"admin", room.votes().admin ? json(room.votes().admin->str()) : json(nullptr)}};
    out.push_back({conn, envelope("state_update", nullptr, slot.id, std::move(payload)).dump()});
  }
}

void ChatHub::close_due_elections(RoomSlot& slot, LogicalTime now, std::vector<Outbound>& out) {
  auto result = slot.advance(now);
  if (!result) return;
  after_commit(slot);
  json payload{{"open", false},
               {"winner", result->winner ? json(result->winner->str()) : json(nullptr)},
               {"tallies", tallies_json(result->tallies)},
               {"refunded_tokens", result->refunded_tokens}};
  broadcast(slot, envelope("election_result", nullptr, slot.id, std::move(payload)).dump(), out);
  push_state(slot, out);
}

std::vector<Outbound> ChatHub::tick() {
  std::vector<Outbound> out;
  for (auto& [_, slot] : rooms_) {
    if (!slot->room().votes().open) continue;
    const LogicalTime now = std::max(slot->last_time, config_.clock());
    if (now < slot->room().votes().deadline) continue;
    slot->last_time = std::max(slot->last_time, now);
    close_due_elections(*slot, now, out);
  }
  return out;
}

std::vector<Outbound> ChatHub::disconnect(ConnId conn) {
  std::vector<Outbound> out;
  auto it = conns_.find(conn);
  if (it == conns_.end()) return out;
  if (it->second->member) {
    auto room = rooms_.find(it->second->room);
    if (room != rooms_.end()) {
      RoomSlot& slot = *room->second;
      slot.members.erase(*it->second->member);
      slot.remove(*it->second->member);
      after_commit(slot);
      push_state(slot, out);
    }
  }
  conns_.erase(it);
  return out;
}

std::vector<Outbound> ChatHub::handle(ConnId conn_id, std::string_view frame) {
  std::vector<Outbound> out;
  auto cit = conns_.find(conn_id);
  if (cit == conns_.end()) return out;
  Connection& conn = *cit->second;
  auto reply = [&](std::string text) { out.push_back({conn_id, std::move(text)}); };

  json env;
  try {
    env = json::parse(frame);
  } catch (const json::exception&) {
    reply(reject(nullptr, "MalformedEnvelope", "frame is not JSON"));
    return out;
  }
  const json id = env.is_object() && env.contains("id") ? env["id"] : json(nullptr);
  if (!env.is_object() || !env.contains("type") || !env["type"].is_string()) {
    reply(reject(id, "MalformedEnvelope", "envelope needs a string type"));
    return out;
  }
  if (!(id.is_string() || id.is_number_integer())) {
    reply(reject(id, "MalformedEnvelope", "envelope needs a string or integer id"));
    return out;
  }
  if (!conn.seen_ids.insert(id.dump()).second) {
    reply(reject(id, "MalformedEnvelope", "duplicate request id"));
    return out;
  }
  const std::string type = env["type"].get<std::string>();
  const json payload = env.contains("payload") ? env["payload"] : json::object();
  if (!payload.is_object()) {
    reply(reject(id, "MalformedEnvelope", "payload must be an object"));
    return out;
  }
  const std::string room_field = env.contains("room") && env["room"].is_string() ? env["room"].get<std::string>() : "";

  auto string_field = [&](const char* key, std::size_t max_len) -> std::optional<std::string> {
    auto it = payload.find(key);
    if (it == payload.end() || !it->is_string()) return std::nullopt;
    std::string v = it->get<std::string>();
    if (v.empty() || v.size() > max_len) return std::nullopt;
    return v;
  };
  auto id_field = [&](const char* key) -> std::optional<std::uint64_t> {
    auto it = payload.find(key);
    if (it == payload.end() || !it->is_number_unsigned()) return std::nullopt;
    return it->get<std::uint64_t>();
  };

  if (type == "ping") {
    reply(envelope("pong", id, "", json::object()).dump());
    return out;
  }

  if (type == "join") {
    if (conn.member) {
      reply(reject(id, "InvalidArgument", "connection already joined room " + conn.room));
      return out;
    }
    const auto name = string_field("name", kMaxNameBytes);
    if (!name || name->find('#') != std::string::npos) {
      reply(reject(id, "MalformedEnvelope", "join needs payload.name (1-64 bytes, no '#')"));
      return out;
    }
    if (!valid_room_id(room_field)) {
      reply(reject(id, "MalformedEnvelope", "join needs a room id of [A-Za-z0-9_-], 1-64 chars"));
      return out;
    }
    RoomSlot* slot = nullptr;
    try {
      slot = &open_room(room_field);
    } catch (const Error& e) {
      reply(reject(id, to_string(e.code()), e.what()));
      return out;
    }
    MemberId member;
    do {
      member = MemberId(*name + "#" + std::to_string(next_member_++));
    } while (slot->room().field().has_member(member));
    try {
      slot->add(member);
    } catch (const Error& e) {
      reply(reject(id, to_string(e.code()), e.what()));
      return out;
    }
    after_commit(*slot);
    next_time(*slot);
    conn.member = member;
    conn.room = room_field;
    slot->members.emplace(member, conn_id);
    reply(envelope("ack", id, slot->id, {{"member", member.str()}, {"time", slot->last_time}}).dump());
    push_state(*slot, out);
    return out;
  }

  static const std::set<std::string> kActions = {"leave", "speak", "withdraw", "issue_task", "vote"};
  if (!kActions.count(type)) {
    reply(reject(id, "MalformedEnvelope", "unknown envelope type '" + type + "'"));
    return out;
  }
  if (!conn.member || (!room_field.empty() && room_field != conn.room)) {
    reply(reject(id, "NotJoined", "join the room first"));
    return out;
  }
  RoomSlot& slot = *rooms_.at(conn.room);
  const MemberId member = *conn.member;

  if (type == "leave") {
    slot.members.erase(member);
    slot.remove(member);
    after_commit(slot);
    conn.member.reset();
    conn.room.clear();
    reply(envelope("ack", id, slot.id, json::object()).dump());
    push_state(slot, out);
    return out;
  }

  Action action;
  action.actor = member;
  if (type == "speak") {
    auto text = string_field("text", kMaxTextBytes);
    if (!text) {
      reply(reject(id, "MalformedEnvelope", "speak needs payload.text"));
      return out;
    }
    action.kind = Speak{*text};
  } else if (type == "withdraw") {
    auto mid = id_field("message_id");
    if (!mid) {
      reply(reject(id, "MalformedEnvelope", "withdraw needs payload.message_id"));
      return out;
    }
    action.kind = Withdraw{*mid};
  } else if (type == "issue_task") {
    auto desc = string_field("description", kMaxTextBytes);
    if (!desc) {
      reply(reject(id, "MalformedEnvelope", "issue_task needs payload.description"));
      return out;
    }
    action.kind = IssueTask{*desc};
  } else {
    auto candidate = string_field("candidate", kMaxNameBytes + 24);
    auto task = id_field("task_id");
    if (candidate.has_value() == task.has_value()) {
      reply(reject(id, "MalformedEnvelope", "vote needs exactly one of payload.candidate, payload.task_id"));
      return out;
    }
    if (candidate) {
      action.kind = Vote{MemberId(*candidate)};
    } else {
      action.kind = Vote{*task};
    }
  }

  const LogicalTime now = next_time(slot);
  close_due_elections(slot, now, out);
  action.logical_time = now;
  const ActionOutcome outcome = slot.submit(action);
  if (!outcome.accepted) {
    reply(reject(id, to_string(outcome.reason), "action rejected"));
    return out;
  }
  after_commit(slot);

  json ack{{"time", now}, {"budget", slot.room().ledger().at(member).budget}};
  if (outcome.message_id) ack["message_id"] = *outcome.message_id;
  if (outcome.task_id) ack["task_id"] = *outcome.task_id;
  reply(envelope("ack", id, slot.id, std::move(ack)).dump());

  const Room& room = slot.room();
  switch (action.type()) {
    case ActionType::Speak:
    case ActionType::Withdraw: {
      const Message& m = room.field().transcript.at(*outcome.message_id - 1);
      broadcast(slot, envelope("message", nullptr, slot.id, message_json(m)).dump(), out);
      break;
    }
    case ActionType::IssueTask:
      broadcast(slot, envelope("task_update", nullptr, slot.id, task_json(room.tasks().at(*outcome.task_id - 1))).dump(),
                out);
      break;
    case ActionType::Vote:
      if (outcome.task_id) {
        broadcast(slot,
                  envelope("task_update", nullptr, slot.id, task_json(room.tasks().at(*outcome.task_id - 1))).dump(),
                  out);
      } else {
        json payload{{"open", true},
                     {"deadline", room.votes().deadline},
                     {"tallies", tallies_json(room.votes().tallies)}};
        broadcast(slot, envelope("election_result", nullptr, slot.id, std::move(payload)).dump(), out);
      }
      break;
  }
  push_state(slot, out);
  return out;
}

const Room* ChatHub::room(const std::string& room_id) const {
  auto it = rooms_.find(room_id);
  return it == rooms_.end() ? nullptr : &it->second->room();
}

std::optional<MemberId> ChatHub::member_of(ConnId conn) const {
  auto it = conns_.find(conn);
  if (it == conns_.end()) return std::nullopt;
  return it->second->member;
}

}  // namespace ttm::service
