#include <filesystem>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ttm/hub.hpp"

namespace ttm::service {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct FakeClock {
  LogicalTime now = 0;
};

HubConfig hub_config(FakeClock& clock) {
  HubConfig c;
  c.room_template.scorer = "constant";
  c.room_template.constant_score = {0.8, 0.1, 0.5};
  c.room_template.matrix = "noop";
  c.room_template.engine.max_members = 2;
  c.room_template.engine.election_ticks = 10;
  c.clock = [&clock] { return clock.now; };
  return c;
}

std::vector<json> frames_for(const std::vector<Outbound>& out, ConnId conn) {
  std::vector<json> r;
  for (const auto& o : out) {
    if (o.conn == conn) r.push_back(json::parse(o.text));
  }
  return r;
}

const json* find_type(const std::vector<json>& frames, const std::string& type) {
  for (const auto& f : frames) {
    if (f["type"] == type) return &f;
  }
  return nullptr;
}

std::string env(const std::string& type, int id, const std::string& room, json payload) {
  json j{{"type", type}, {"id", id}, {"payload", std::move(payload)}};
  if (!room.empty()) j["room"] = room;
  return j.dump();
}

std::string join(ChatHub& hub, ConnId c, const std::string& name, int id = 1) {
  const auto out = frames_for(hub.handle(c, env("join", id, "lobby", {{"name", name}})), c);
  const json* ack = find_type(out, "ack");
  EXPECT_NE(ack, nullptr);
  return ack ? (*ack)["payload"]["member"].get<std::string>() : "";
}

TEST(Hub, RoomIdValidation) {
  EXPECT_TRUE(valid_room_id("a-b_C9"));
  EXPECT_FALSE(valid_room_id(""));
  EXPECT_FALSE(valid_room_id("with space"));
  EXPECT_FALSE(valid_room_id(std::string(65, 'a')));
}

TEST(Hub, SpeakBeforeJoinIsNotJoined) {
  FakeClock clock;
  ChatHub hub(hub_config(clock));
  const auto c = hub.connect();
  const auto out = frames_for(hub.handle(c, env("speak", 7, "", {{"text", "hi"}})), c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0]["type"], "reject");
  EXPECT_EQ(out[0]["id"], 7);
  EXPECT_EQ(out[0]["payload"]["code"], "NotJoined");
}

TEST(Hub, JoinAcksAndPushesState) {
  FakeClock clock;
  ChatHub hub(hub_config(clock));
  const auto c = hub.connect();
  const auto out = frames_for(hub.handle(c, env("join", 1, "lobby", {{"name", "ann"}})), c);
  const json* ack = find_type(out, "ack");
  ASSERT_NE(ack, nullptr);
  EXPECT_EQ((*ack)["room"], "lobby");
  EXPECT_EQ((*ack)["payload"]["member"], "ann#1");
  const json* state = find_type(out, "state_update");
  ASSERT_NE(state, nullptr);
  EXPECT_EQ((*state)["payload"]["budget"], 5.0);
  EXPECT_EQ((*state)["payload"]["proportion"], 1.0);
  EXPECT_EQ((*state)["payload"]["atmosphere"].size(), 10u);
  EXPECT_TRUE((*state)["payload"]["admin"].is_null());
  EXPECT_EQ(hub.member_of(c)->str(), "ann#1");
}

TEST(Hub, SpeakAcksAndBroadcasts) {
  FakeClock clock;
  ChatHub hub(hub_config(clock));
  const auto a = hub.connect();
  const auto b = hub.connect();
  const auto ann = join(hub, a, "ann");
  (void)join(hub, b, "bob");
  const auto out = hub.handle(a, env("speak", 2, "lobby", {{"text", "nice work"}}));
  const auto to_a = frames_for(out, a);
  const auto to_b = frames_for(out, b);
  ASSERT_FALSE(to_a.empty());
  EXPECT_EQ(to_a[0]["type"], "ack");
  EXPECT_EQ(to_a[0]["id"], 2);
  EXPECT_EQ(to_a[0]["payload"]["message_id"], 1);
  EXPECT_DOUBLE_EQ(to_a[0]["payload"]["budget"].get<double>(), 4.0);
  const json* msg = find_type(to_b, "message");
  ASSERT_NE(msg, nullptr);
  EXPECT_EQ((*msg)["payload"]["author"], ann);
  EXPECT_EQ((*msg)["payload"]["text"], "nice work");
  EXPECT_NEAR((*msg)["payload"]["atmosphere"].get<double>(), 0.35, 1e-12);
  EXPECT_NE(find_type(to_b, "state_update"), nullptr);
}

TEST(Hub, MalformedFramesEchoId) {
  FakeClock clock;
  ChatHub hub(hub_config(clock));
  const auto c = hub.connect();
  auto first = [&](std::string_view frame) { return frames_for(hub.handle(c, frame), c).at(0); };
  auto r = first("not json");
  EXPECT_EQ(r["payload"]["code"], "MalformedEnvelope");
  EXPECT_TRUE(r["id"].is_null());
  r = first(R"({"id":"x1","payload":{}})");
  EXPECT_EQ(r["payload"]["code"], "MalformedEnvelope");
  EXPECT_EQ(r["id"], "x1");
  r = first(R"({"type":"dance","id":5})");
  EXPECT_EQ(r["payload"]["code"], "MalformedEnvelope");
  EXPECT_EQ(r["id"], 5);
  r = first(R"({"type":"ping","id":5})");
  EXPECT_EQ(r["payload"]["code"], "MalformedEnvelope");  // duplicate id
  r = first(R"({"type":"join","id":6,"room":"bad room","payload":{"name":"a"}})");
  EXPECT_EQ(r["payload"]["code"], "MalformedEnvelope");
  r = first(R"({"type":"ping","id":7,"payload":[]})");
  EXPECT_EQ(r["payload"]["code"], "MalformedEnvelope");
}

TEST(Hub, PingPong) {
  FakeClock clock;
  ChatHub hub(hub_config(clock));
  const auto c = hub.connect();
  const auto out = frames_for(hub.handle(c, env("ping", 9, "", json::object())), c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0]["type"], "pong");
  EXPECT_EQ(out[0]["id"], 9);
}

TEST(Hub, RoomFull) {
  FakeClock clock;
  ChatHub hub(hub_config(clock));
  for (int i = 0; i < 2; ++i) (void)join(hub, hub.connect(), "m");
  const auto c = hub.connect();
  const auto out = frames_for(hub.handle(c, env("join", 1, "lobby", {{"name", "late"}})), c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0]["payload"]["code"], "RoomFull");
}

TEST(Hub, BudgetRejectCarriesReason) {
  FakeClock clock;
  auto cfg = hub_config(clock);
  cfg.room_template.engine.ticks_per_minute = 1000.0;
  ChatHub hub(cfg);
  const auto c = hub.connect();
  (void)join(hub, c, "ann");
  for (int i = 0; i < 5; ++i) (void)hub.handle(c, env("speak", 10 + i, "", {{"text", "x"}}));
  const auto out = frames_for(hub.handle(c, env("speak", 20, "", {{"text", "x"}})), c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0]["payload"]["code"], "BudgetExhausted");
}

TEST(Hub, ElectionClosesOnTick) {
  FakeClock clock;
  ChatHub hub(hub_config(clock));
  const auto a = hub.connect();
  const auto b = hub.connect();
  const auto ann = join(hub, a, "ann");
  (void)join(hub, b, "bob");
  const auto opened = frames_for(hub.handle(b, env("vote", 2, "", {{"candidate", ann}})), a);
  const json* open = find_type(opened, "election_result");
  ASSERT_NE(open, nullptr);
  EXPECT_EQ((*open)["payload"]["open"], true);
  EXPECT_TRUE(hub.tick().empty());
  clock.now = 100;
  const auto closed = frames_for(hub.tick(), a);
  const json* result = find_type(closed, "election_result");
  ASSERT_NE(result, nullptr);
  EXPECT_EQ((*result)["payload"]["open"], false);
  EXPECT_EQ((*result)["payload"]["winner"], ann);
  EXPECT_EQ((*result)["payload"]["refunded_tokens"], 0);
  EXPECT_EQ((*find_type(closed, "state_update"))["payload"]["admin"], ann);
}

TEST(Hub, TaskFlow) {
  FakeClock clock;
  ChatHub hub(hub_config(clock));
  const auto a = hub.connect();
  const auto b = hub.connect();
  (void)join(hub, a, "ann");
  (void)join(hub, b, "bob");
  const auto issued = frames_for(hub.handle(a, env("issue_task", 2, "", {{"description", "notes"}})), b);
  ASSERT_NE(find_type(issued, "task_update"), nullptr);
  const auto closed = frames_for(hub.handle(b, env("vote", 3, "", {{"task_id", 1}})), a);
  const json* t = find_type(closed, "task_update");
  ASSERT_NE(t, nullptr);
  EXPECT_EQ((*t)["payload"]["status"], "completed");
}

TEST(Hub, DisconnectLeavesRoom) {
  FakeClock clock;
  ChatHub hub(hub_config(clock));
  const auto a = hub.connect();
  const auto b = hub.connect();
  (void)join(hub, a, "ann");
  (void)join(hub, b, "bob");
  const auto out = frames_for(hub.disconnect(a), b);
  const json* state = find_type(out, "state_update");
  ASSERT_NE(state, nullptr);
  EXPECT_EQ((*state)["payload"]["members"].size(), 1u);
  EXPECT_EQ(hub.connection_count(), 1u);
}

TEST(Hub, PersistentRoomsSurviveRestart) {
  const auto dir = fs::temp_directory_path() / "ttm_hub_persist";
  fs::remove_all(dir);
  FakeClock clock;
  {
    auto cfg = hub_config(clock);
    cfg.data_dir = dir;
    cfg.snapshot_every = 2;
    ChatHub hub(cfg);
    const auto c = hub.connect();
    (void)join(hub, c, "ann");
    (void)hub.handle(c, env("speak", 2, "", {{"text", "remember me"}}));
    (void)hub.handle(c, env("speak", 3, "", {{"text", "and me"}}));
  }
  auto cfg = hub_config(clock);
  cfg.data_dir = dir;
  ChatHub hub(cfg);
  const auto c = hub.connect();
  (void)join(hub, c, "ann");
  ASSERT_NE(hub.room("lobby"), nullptr);
  EXPECT_EQ(hub.room("lobby")->field().transcript.size(), 2u);
  EXPECT_EQ(hub.room("lobby")->field().tribe.size(), 1u);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace ttm::service
