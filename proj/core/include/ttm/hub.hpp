#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ttm/engine.hpp"
#include "ttm/persistence.hpp"

namespace ttm::service {

using ConnId = std::uint64_t;

/// One text frame for one connection.
struct Outbound {
  ConnId conn = 0;
  std::string text;
};

struct HubConfig {
  /// Settings for rooms created on first join; room_id is replaced per room.
  RoomSettings room_template;
  /// Empty keeps rooms in memory only. Otherwise each room persists under
  /// `<data_dir>/<room_id>/` and is reopened on first join after a restart.
  std::filesystem::path data_dir;
  std::size_t snapshot_every = 256;  // log records between snapshots
  /// Current logical time; the hub keeps per-room time strictly increasing.
  std::function<LogicalTime()> clock;
};

/// Turns client envelopes into engine actions and engine results into server
/// envelopes. Not thread-safe: the caller runs every call on one strand, which
/// gives each room a single ordered queue.
class ChatHub {
 public:
  explicit ChatHub(HubConfig config);
  ~ChatHub();
  ChatHub(const ChatHub&) = delete;
  ChatHub& operator=(const ChatHub&) = delete;

  ConnId connect();
  /// Leaves the joined room, if any, and forgets the connection.
  std::vector<Outbound> disconnect(ConnId conn);
  /// Every request yields exactly one ack or reject to `conn`, plus any
  /// broadcasts the commit caused.
  std::vector<Outbound> handle(ConnId conn, std::string_view frame);
  /// Closes elections whose deadline passed.
  std::vector<Outbound> tick();

  [[nodiscard]] const Room* room(const std::string& room_id) const;
  [[nodiscard]] std::optional<MemberId> member_of(ConnId conn) const;
  [[nodiscard]] std::size_t connection_count() const noexcept { return conns_.size(); }

 private:
  struct Connection;
  struct RoomSlot;

  RoomSlot& open_room(const std::string& room_id);
  LogicalTime next_time(RoomSlot& slot);
  void after_commit(RoomSlot& slot);
  void broadcast(const RoomSlot& slot, const std::string& text, std::vector<Outbound>& out) const;
  void push_state(const RoomSlot& slot, std::vector<Outbound>& out) const;
  void close_due_elections(RoomSlot& slot, LogicalTime now, std::vector<Outbound>& out);

  HubConfig config_;
  std::map<ConnId, std::unique_ptr<Connection>> conns_;
  std::map<std::string, std::unique_ptr<RoomSlot>> rooms_;
  ConnId next_conn_ = 1;
  std::uint64_t next_member_ = 1;
};

/// True for 1..64 characters from [A-Za-z0-9_-].
bool valid_room_id(std::string_view id);

}  // namespace ttm::service
