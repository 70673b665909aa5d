#include "ttm/persistence.hpp"

#include <cstdio>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttm/error.hpp"
#include "ttm/random.hpp"

namespace ttm {

namespace {

using nlohmann::json;

constexpr const char* kLogName = "room.log";
constexpr const char* kSnapName = "room.snap";

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::optional<std::uint64_t> parse_hex(std::string_view s) {
  if (s.size() != 16) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') {
      v |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      return std::nullopt;
    }
  }
  return v;
}

std::uint64_t chain_seed() { return fnv1a64(kLogMagic); }

json action_json(const Action& a) {
  json j;
  j["actor"] = a.actor.str();
  j["time"] = a.logical_time;
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Speak>) {
          j["type"] = "speak";
          j["text"] = k.text;
        } else if constexpr (std::is_same_v<K, Withdraw>) {
          j["type"] = "withdraw";
          j["message_id"] = k.message_id;
        } else if constexpr (std::is_same_v<K, IssueTask>) {
          j["type"] = "issue_task";
          j["description"] = k.description;
        } else {
          j["type"] = "vote";
          if (const auto* m = std::get_if<MemberId>(&k.target)) {
            j["candidate"] = m->str();
          } else {
            j["task_id"] = std::get<TaskId>(k.target);
          }
        }
      },
      a.kind);
  return j;
}

Action action_from_json(const json& j) {
  Action a;
  a.actor = MemberId(j.at("actor").get<std::string>());
  a.logical_time = j.at("time").get<LogicalTime>();
  const auto type = j.at("type").get<std::string>();
  if (type == "speak") {
    a.kind = Speak{j.at("text").get<std::string>()};
  } else if (type == "withdraw") {
    a.kind = Withdraw{j.at("message_id").get<MessageId>()};
  } else if (type == "issue_task") {
    a.kind = IssueTask{j.at("description").get<std::string>()};
  } else if (type == "vote") {
    if (j.contains("candidate")) {
      a.kind = Vote{MemberId(j.at("candidate").get<std::string>())};
    } else {
      a.kind = Vote{j.at("task_id").get<TaskId>()};
    }
  } else {
    throw Error(Errc::InvalidArgument, "unknown action type '" + type + "'");
  }
  return a;
}

struct Record {
  std::uint64_t seq = 0;
  std::uint64_t chain = 0;
  json body;
};

struct LogContents {
  std::vector<Record> records;
  std::uintmax_t good_bytes = 0;  // length of the intact prefix
  bool torn = false;
};

LogContents read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  LogContents out;
  std::size_t pos = data.find('\n');
  if (pos == std::string::npos || std::string_view(data).substr(0, pos) != kLogMagic) {
    throw Error(Errc::CorruptLog, path.string() + ": missing log header");
  }
  ++pos;
  out.good_bytes = pos;
  std::uint64_t chain = chain_seed();
  std::uint64_t seq = 0;
  while (pos < data.size()) {
    const std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) {
      out.torn = true;
      break;
    }
    const std::string_view line(data.data() + pos, end - pos);
    const auto sp1 = line.find(' ');
    const auto sp2 = sp1 == std::string_view::npos ? sp1 : line.find(' ', sp1 + 1);
    if (sp2 == std::string_view::npos) {
      throw Error(Errc::CorruptLog, path.string() + ": malformed record after seq " + std::to_string(seq));
    }
    const std::string_view seq_text = line.substr(0, sp1);
    const auto chain_value = parse_hex(line.substr(sp1 + 1, sp2 - sp1 - 1));
    const std::string_view body = line.substr(sp2 + 1);
    if (seq_text != std::to_string(seq + 1) || !chain_value) {
      throw Error(Errc::CorruptLog, path.string() + ": bad sequence number after " + std::to_string(seq));
    }
    chain = fnv1a64(body, chain);
    if (chain != *chain_value) {
      throw Error(Errc::CorruptLog, path.string() + ": hash chain broken at record " + std::to_string(seq + 1));
    }
    Record rec;
    rec.seq = ++seq;
    rec.chain = chain;
    try {
      rec.body = json::parse(body);
    } catch (const json::exception&) {
      throw Error(Errc::CorruptLog, path.string() + ": record " + std::to_string(seq) + " is not JSON");
    }
    out.records.push_back(std::move(rec));
    pos = end + 1;
    out.good_bytes = pos;
  }
  return out;
}

struct Snapshot {
  std::uint64_t seq = 0;
  std::uint64_t chain = 0;
  std::string room_json;
};

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string magic, seq_line, chain_line, sum_line, body;
  std::getline(in, magic);
  std::getline(in, seq_line);
  std::getline(in, chain_line);
  std::getline(in, sum_line);
  std::getline(in, body);
  if (magic != kSnapshotMagic) throw Error(Errc::CorruptLog, path.string() + ": not a room snapshot");
  const auto chain = parse_hex(chain_line);
  const auto sum = parse_hex(sum_line);
  if (!chain || !sum || *sum != fnv1a64(body)) throw Error(Errc::CorruptLog, path.string() + ": checksum mismatch");
  Snapshot s;
  try {
    s.seq = std::stoull(seq_line);
  } catch (const std::logic_error&) {
    throw Error(Errc::CorruptLog, path.string() + ": bad sequence number");
  }
  s.chain = *chain;
  s.room_json = std::move(body);
  return s;
}

void replay(Room& room, const Record& rec) {
  const json& j = rec.body;
  try {
    const auto op = j.at("op").get<std::string>();
    if (op == "join") {
      room.add_member(MemberId(j.at("member").get<std::string>()));
    } else if (op == "leave") {
      room.remove_member(MemberId(j.at("member").get<std::string>()));
    } else if (op == "action") {
      const ActionOutcome out = room.submit(action_from_json(j.at("action")));
      if (!out.accepted) throw Error(Errc::CorruptLog, "logged action is rejected on replay");
    } else if (op == "advance") {
      if (!room.advance(j.at("time").get<LogicalTime>())) {
        throw Error(Errc::CorruptLog, "logged election close does not replay");
      }
    } else {
      throw Error(Errc::CorruptLog, "unknown record op '" + op + "'");
    }
    const auto post = parse_hex(j.at("post").get<std::string>());
    if (!post || *post != room.state_hash()) throw Error(Errc::CorruptLog, "post-state hash mismatch");
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptLog, "record " + std::to_string(rec.seq) + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptLog) {
      throw Error(Errc::CorruptLog, "record " + std::to_string(rec.seq) + ": " + e.what());
    }
    throw Error(Errc::CorruptLog, "record " + std::to_string(rec.seq) + " fails on replay: " + e.what());
  }
}

}  // namespace

std::string encode_action(const Action& action) { return action_json(action).dump(); }

Action decode_action(std::string_view text) {
  try {
    return action_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed action: ") + e.what());
  }
}

PersistentRoom::PersistentRoom(std::filesystem::path dir, Room room) : dir_(std::move(dir)), room_(std::move(room)) {}

bool PersistentRoom::exists(const std::filesystem::path& dir) { return std::filesystem::exists(dir / kLogName); }

PersistentRoom PersistentRoom::create(const std::filesystem::path& dir, Room room) {
  if (exists(dir)) throw Error(Errc::Io, dir.string() + " already holds a room log");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());

  PersistentRoom pr(dir, std::move(room));
  pr.log_.open(dir / kLogName, std::ios::binary | std::ios::trunc);
  if (!pr.log_) throw Error(Errc::Io, "cannot write " + (dir / kLogName).string());
  pr.log_ << kLogMagic << '\n';
  pr.chain_ = chain_seed();
  json rec;
  rec["op"] = "create";
  rec["room"] = json::parse(pr.room_.serialize());
  rec["post"] = hex(pr.room_.state_hash());
  pr.append(rec.dump());
  return pr;
}

PersistentRoom PersistentRoom::open(const std::filesystem::path& dir) {
  const auto log_path = dir / kLogName;
  LogContents log = read_log(log_path);
  if (log.records.empty()) throw Error(Errc::CorruptLog, log_path.string() + ": no create record");

  std::size_t next = 0;
  std::optional<Room> room;
  if (std::filesystem::exists(dir / kSnapName)) {
    Snapshot snap = read_snapshot(dir / kSnapName);
    if (snap.seq == 0 || snap.seq > log.records.size() || log.records[snap.seq - 1].chain != snap.chain) {
      throw Error(Errc::CorruptLog, "snapshot does not match the log");
    }
    room = Room::deserialize(snap.room_json);
    next = snap.seq;
  } else {
    const json& first = log.records.front().body;
    if (first.value("op", "") != "create") throw Error(Errc::CorruptLog, "log does not start with create");
    room = Room::deserialize(first.at("room").dump());
    const auto post = parse_hex(first.value("post", ""));
    if (!post || *post != room->state_hash()) throw Error(Errc::CorruptLog, "record 1: post-state hash mismatch");
    next = 1;
  }
  for (std::size_t i = next; i < log.records.size(); ++i) replay(*room, log.records[i]);

  if (log.torn) std::filesystem::resize_file(log_path, log.good_bytes);
  PersistentRoom pr(dir, std::move(*room));
  pr.seq_ = log.records.back().seq;
  pr.chain_ = log.records.back().chain;
  pr.log_.open(log_path, std::ios::binary | std::ios::app);
  if (!pr.log_) throw Error(Errc::Io, "cannot append to " + log_path.string());
  return pr;
}

void PersistentRoom::append(const std::string& record_json) {
  chain_ = fnv1a64(record_json, chain_);
  ++seq_;
  log_ << seq_ << ' ' << hex(chain_) << ' ' << record_json << '\n';
  log_.flush();
  if (!log_) throw Error(Errc::Io, "write to " + (dir_ / kLogName).string() + " failed");
}

void PersistentRoom::add_member(const MemberId& member) {
  room_.add_member(member);
  json rec{{"op", "join"}, {"member", member.str()}, {"post", hex(room_.state_hash())}};
  append(rec.dump());
}

void PersistentRoom::remove_member(const MemberId& member) {
  room_.remove_member(member);
  json rec{{"op", "leave"}, {"member", member.str()}, {"post", hex(room_.state_hash())}};
  append(rec.dump());
}

ActionOutcome PersistentRoom::submit(const Action& action) {
  ActionOutcome out = room_.submit(action);
  if (!out.accepted) return out;
  json rec;
  rec["op"] = "action";
  rec["action"] = action_json(action);
  rec["outcome"] = {{"new_budget", out.decision->new_budget}, {"mute_ticks", out.decision->mute_ticks}};
  rec["post"] = hex(room_.state_hash());
  append(rec.dump());
  return out;
}

std::optional<ElectionResult> PersistentRoom::advance(LogicalTime now) {
  auto result = room_.advance(now);
  if (!result) return result;
  json rec{{"op", "advance"},
           {"time", now},
           {"winner", result->winner ? result->winner->str() : std::string()},
           {"post", hex(room_.state_hash())}};
  append(rec.dump());
  return result;
}

void PersistentRoom::snapshot() {
  const std::string body = room_.serialize();
  const auto tmp = dir_ / (std::string(kSnapName) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out << kSnapshotMagic << '\n' << seq_ << '\n' << hex(chain_) << '\n' << hex(fnv1a64(body)) << '\n' << body << '\n';
    out.flush();
    if (!out) throw Error(Errc::Io, "write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, dir_ / kSnapName);
}

}  // namespace ttm
