#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>

#include "ttm/engine.hpp"

namespace ttm {

inline constexpr std::string_view kLogMagic = "TTMLOG1";
inline constexpr std::string_view kSnapshotMagic = "TTMSNAP1";

/// JSON form used in the room log: type, actor, time plus the kind's fields.
std::string encode_action(const Action& action);
/// Throws InvalidArgument on malformed input.
Action decode_action(std::string_view text);

/// A room whose state changes are appended to `<dir>/room.log`.
///
/// Log: the magic line, then one record per line,
/// `<seq> <chain> <json>`, where chain is the FNV-1a hash of the json seeded
/// with the previous record's chain. Each record names its operation (create,
/// join, leave, action, advance) and the state hash after applying it.
/// Snapshot: `<dir>/room.snap` holds the magic line, the sequence number and
/// chain of the last record it covers, a checksum, and the room JSON.
class PersistentRoom {
 public:
  /// Starts a new log. Throws Io if the directory already holds one.
  static PersistentRoom create(const std::filesystem::path& dir, Room room);
  /// Loads the snapshot when present and replays the rest of the log. A
  /// final line without its newline is treated as a torn write and dropped.
  /// Throws CorruptLog on a chain break or a replay that diverges.
  static PersistentRoom open(const std::filesystem::path& dir);
  [[nodiscard]] static bool exists(const std::filesystem::path& dir);

  PersistentRoom(PersistentRoom&&) noexcept = default;
  PersistentRoom& operator=(PersistentRoom&&) noexcept = default;

  void add_member(const MemberId& member);
  void remove_member(const MemberId& member);
  /// Accepted actions are logged; rejections change nothing and are not.
  ActionOutcome submit(const Action& action);
  std::optional<ElectionResult> advance(LogicalTime now);

  /// Writes the snapshot atomically (temp file + rename).
  void snapshot();

  [[nodiscard]] const Room& room() const noexcept { return room_; }
  [[nodiscard]] std::uint64_t sequence() const noexcept { return seq_; }
  [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  PersistentRoom(std::filesystem::path dir, Room room);
  void append(const std::string& record_json);

  std::filesystem::path dir_;
  Room room_;
  std::ofstream log_;
  std::uint64_t seq_ = 0;
  std::uint64_t chain_ = 0;
};

}  // namespace ttm
