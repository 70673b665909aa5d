#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ttm/config.hpp"
#include "ttm/error.hpp"

namespace ttm {
namespace {

namespace fs = std::filesystem;

KeyValueConfig parse(const std::string& text) {
  std::istringstream in(text);
  return KeyValueConfig::parse(in);
}

class ConfigFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ttm_cfg_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "base");
  }
  void TearDown() override { fs::remove_all(dir_); }
  void write(const fs::path& rel, const std::string& text) {
    std::ofstream(dir_ / rel) << text;
  }
  fs::path dir_;
};

TEST(KeyValue, ParsesCommentsAndWhitespace) {
  const auto cfg = parse("# header\n  a = 1  \nb=two # trailing\n\nc = 1.5\n");
  EXPECT_EQ(cfg.get_int("a", 0), 1);
  EXPECT_EQ(cfg.get_string("b", ""), "two");
  EXPECT_DOUBLE_EQ(cfg.get_double("c", 0.0), 1.5);
  EXPECT_EQ(cfg.get_int("missing", 7), 7);
}

TEST(KeyValue, LaterAssignmentWins) {
  EXPECT_EQ(parse("a = 1\na = 2\n").get_int("a", 0), 2);
}

TEST(KeyValue, Lists) {
  const auto v = parse("l = x, y ,, z\n").get_list("l");
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[1], "y");
}

TEST(KeyValue, Booleans) {
  const auto cfg = parse("a = true\nb = 0\nc = maybe\n");
  EXPECT_TRUE(cfg.get_bool("a", false));
  EXPECT_FALSE(cfg.get_bool("b", true));
  EXPECT_THROW((void)cfg.get_bool("c", false), Error);
}

TEST(KeyValue, BadNumbersThrow) {
  const auto cfg = parse("a = 1x\n");
  try {
    (void)cfg.get_double("a", 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigInvalid);
  }
  EXPECT_THROW((void)cfg.get_int("a", 0), Error);
}

TEST(KeyValue, LineWithoutEqualsThrows) {
  EXPECT_THROW((void)parse("just words\n"), Error);
}

TEST(KeyValue, UnusedKeysAreReported) {
  const auto cfg = parse("used = 1\nunused = 2\n");
  (void)cfg.get_int("used", 0);
  try {
    cfg.require_all_used();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigInvalid);
    EXPECT_NE(std::string(e.what()).find("unused"), std::string::npos);
    EXPECT_EQ(std::string(e.what()).find("used,"), std::string::npos);
  }
  (void)cfg.get_int("unused", 0);
  EXPECT_NO_THROW(cfg.require_all_used());
}

TEST(KeyValue, SetOverridesFile) {
  auto cfg = parse("a = 1\n");
  cfg.set("a", "5");
  EXPECT_EQ(cfg.get_int("a", 0), 5);
}

TEST_F(ConfigFiles, MissingFileIsIo) {
  try {
    (void)KeyValueConfig::load(dir_ / "none.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
  }
}

TEST_F(ConfigFiles, IncludeGivesDefaultsAndOwnPaths) {
  write("base/common.cfg", "a = 1\nb = 1\nfile = data.txt\n");
  write("top.cfg", "include = base/common.cfg\nb = 2\nmine = local.txt\n");
  const auto cfg = KeyValueConfig::load(dir_ / "top.cfg");
  EXPECT_EQ(cfg.get_int("a", 0), 1);
  EXPECT_EQ(cfg.get_int("b", 0), 2);
  EXPECT_EQ(cfg.get_path("file"), fs::absolute(dir_ / "base/data.txt").lexically_normal());
  EXPECT_EQ(cfg.get_path("mine"), fs::absolute(dir_ / "local.txt").lexically_normal());
  EXPECT_FALSE(cfg.contains("include"));
}

TEST_F(ConfigFiles, IncludeCycleThrows) {
  write("a.cfg", "include = b.cfg\n");
  write("b.cfg", "include = a.cfg\n");
  EXPECT_THROW((void)KeyValueConfig::load(dir_ / "a.cfg"), Error);
}

TEST(RoomSettingsConfig, ReadsAllGroups) {
  const auto cfg = parse(
      "room.id = r1\nroom.topic = t\nengine.refill_rate = 3\nengine.budget_cap = 4\n"
      "engine.vote_tokens = 2\nengine.ticks_per_minute = 20\nengine.election_ticks = 9\n"
      "engine.task_quorum = 2\nengine.max_members = 7\nsentiment.scorer = constant\n"
      "sentiment.constant = 0.5, 0.25, 1\nmatrix.kind = heuristic\nmatrix.heuristic.k_atm = 1.5\n"
      "matrix.heuristic.k_eq = 0.5\nmatrix.rule.banned = a, b\nmatrix.rule.mute_duration = 3\n");
  const auto s = room_settings_from_config(cfg);
  EXPECT_EQ(s.room_id, "r1");
  EXPECT_EQ(s.topic, "t");
  EXPECT_EQ(s.engine.refill_rate, 3.0);
  EXPECT_EQ(s.engine.budget_cap, 4.0);
  EXPECT_EQ(s.engine.initial_vote_tokens, 2);
  EXPECT_EQ(s.engine.ticks_per_minute, 20.0);
  EXPECT_EQ(s.engine.election_ticks, 9);
  EXPECT_EQ(s.engine.task_quorum, 2u);
  EXPECT_EQ(s.engine.max_members, 7u);
  EXPECT_EQ(s.scorer, "constant");
  EXPECT_EQ(s.constant_score.negative, 0.25);
  EXPECT_EQ(s.matrix, "heuristic");
  EXPECT_EQ(s.heuristic.k_atm, 1.5);
  EXPECT_EQ(s.heuristic.k_eq, 0.5);
  EXPECT_EQ(s.rule.banned_tokens.size(), 2u);
  EXPECT_EQ(s.rule.mute_duration, 3);
  EXPECT_NO_THROW(cfg.require_all_used());
}

TEST(RoomSettingsConfig, RejectsBadValues) {
  EXPECT_THROW((void)room_settings_from_config(parse("engine.max_members = -1\n")), Error);
  EXPECT_THROW((void)room_settings_from_config(parse("sentiment.constant = 1, 2\n")), Error);
  EXPECT_THROW((void)room_settings_from_config(parse("matrix.heuristic.k_eq = -1\n")), Error);
}

TEST(RoomSettingsConfig, ShippedScenarioLoads) {
  const auto cfg = KeyValueConfig::load(fs::path(TTM_SCENARIO_DIR) / "serve.cfg");
  const auto s = room_settings_from_config(cfg);
  EXPECT_EQ(s.matrix, "heuristic");
  EXPECT_TRUE(fs::exists(s.lexicon_path));
}

}  // namespace
}  // namespace ttm
