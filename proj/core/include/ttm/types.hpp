#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ttm {

inline constexpr std::size_t kActionDim = 1024;
inline constexpr std::size_t kResourceDim = 2;
inline constexpr std::size_t kAtmosphereDim = 10;
inline constexpr std::size_t kFeatureDim = kActionDim + kResourceDim + kAtmosphereDim;
static_assert(kFeatureDim == 1036);

using LogicalTime = std::int64_t;
using MessageId = std::uint64_t;
using TaskId = std::uint64_t;

/// Opaque member identifier, unique within a room.
class MemberId {
 public:
  MemberId() = default;
  explicit MemberId(std::string value);

  [[nodiscard]] const std::string& str() const noexcept { return value_; }
  [[nodiscard]] bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const MemberId&, const MemberId&) = default;
  friend bool operator==(const MemberId&, const MemberId&) = default;

 private:
  std::string value_;
};

/// The ten most recent atmosphere values, oldest first. Starts zero-filled.
class AtmosphereWindow {
 public:
  using Values = std::array<double, kAtmosphereDim>;

  AtmosphereWindow() { values_.fill(0.0); }

  /// Appends a value in [-1, 1], evicting the oldest. Throws OutOfRange otherwise.
  void push(double value);
  void clear() { values_.fill(0.0); }

  [[nodiscard]] const Values& values() const noexcept { return values_; }
  [[nodiscard]] double mean() const noexcept;

  friend bool operator==(const AtmosphereWindow&, const AtmosphereWindow&) = default;

 private:
  Values values_{};
};

struct MemberResources {
  double budget = 0.0;
  std::int64_t vote_tokens = 0;
  double refill_rate = 5.0;  // messages per minute
  double budget_cap = 5.0;
  LogicalTime muted_until = 0;  // no refill accrues before this time

  friend bool operator==(const MemberResources&, const MemberResources&) = default;
};

/// Per-member speech budget and vote tokens, keyed in member order.
class ResourceLedger {
 public:
  void add(const MemberId& member, MemberResources resources);
  /// Throws UnknownMember.
  void remove(const MemberId& member);

  [[nodiscard]] bool contains(const MemberId& member) const;
  /// Throws UnknownMember.
  [[nodiscard]] const MemberResources& at(const MemberId& member) const;
  MemberResources& at(const MemberId& member);

  [[nodiscard]] double total_budget() const noexcept;
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

  [[nodiscard]] auto begin() const { return entries_.begin(); }
  [[nodiscard]] auto end() const { return entries_.end(); }
  [[nodiscard]] auto begin() { return entries_.begin(); }
  [[nodiscard]] auto end() { return entries_.end(); }

  friend bool operator==(const ResourceLedger&, const ResourceLedger&) = default;

 private:
  std::map<MemberId, MemberResources> entries_;
};

struct ResourceStructure {
  double count = 0.0;
  double proportion = 0.0;
};

/// count = actor budget; proportion = budget / total (0 when the total is 0).
ResourceStructure resource_structure(const ResourceLedger& ledger, const MemberId& actor);

struct Speak {
  std::string text;
};
struct Withdraw {
  MessageId message_id = 0;
};
struct IssueTask {
  std::string description;
};
/// A ballot either for an election candidate or to close an open task.
struct Vote {
  std::variant<MemberId, TaskId> target;
};

using ActionKind = std::variant<Speak, Withdraw, IssueTask, Vote>;

enum class ActionType { Speak, Withdraw, IssueTask, Vote };

struct Action {
  ActionKind kind;
  MemberId actor;
  LogicalTime logical_time = 0;

  [[nodiscard]] ActionType type() const noexcept { return static_cast<ActionType>(kind.index()); }
};

struct Message {
  MessageId id = 0;
  MemberId author;
  std::string text;
  LogicalTime logical_time = 0;
  bool withdrawn = false;
  double atmosphere_value = 0.0;

  friend bool operator==(const Message&, const Message&) = default;
};

struct Field {
  std::string room_id;
  std::vector<MemberId> tribe;  // join order
  std::string topic;
  AtmosphereWindow atmosphere;
  std::vector<Message> transcript;

  [[nodiscard]] bool has_member(const MemberId& member) const;
};

}  // namespace ttm

template <>
struct std::hash<ttm::MemberId> {
  std::size_t operator()(const ttm::MemberId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
