#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ttm/matrix.hpp"
#include "ttm/sentiment.hpp"
#include "ttm/types.hpp"
#include "ttm/vectorizer.hpp"

namespace ttm {

struct EngineConfig {
  double refill_rate = 5.0;        // messages per minute
  double budget_cap = 5.0;
  std::int64_t initial_vote_tokens = 3;
  double ticks_per_minute = 10.0;  // logical ticks that make one minute of refill
  LogicalTime election_ticks = 30;
  std::size_t history_window = 16;  // feature vectors fed to the learned matrix, current included
  std::size_t task_quorum = 1;      // distinct closing votes that complete a task
  std::size_t max_members = 64;

  void validate() const;
};

struct ActionCost {
  double budget = 0.0;
  std::int64_t vote_tokens = 0;
};

/// Speak 1, Withdraw 1, IssueTask 2, Vote 0 budget plus 1 vote token.
ActionCost cost(ActionType type) noexcept;

/// Adds refill_rate * elapsed_minutes to every budget, clamped to its cap.
ResourceLedger refill(ResourceLedger ledger, double elapsed_minutes);

enum class OutcomeReason { Ok, BudgetExhausted, UnknownMember, InvalidTarget };

std::string_view to_string(OutcomeReason reason) noexcept;

struct ActionOutcome {
  bool accepted = false;
  OutcomeReason reason = OutcomeReason::Ok;
  std::optional<MatrixDecision> decision;
  std::optional<MessageId> message_id;
  std::optional<TaskId> task_id;
  ResourceStructure resources;  // actor's structure the matrix saw (accepted actions)
};

struct VoteState {
  bool open = false;
  LogicalTime deadline = 0;
  std::map<MemberId, std::int64_t> tallies;
  std::map<MemberId, std::int64_t> spent;  // tokens spent per voter in the open election
  std::optional<MemberId> admin;

  friend bool operator==(const VoteState&, const VoteState&) = default;
};

struct ElectionResult {
  std::optional<MemberId> winner;
  std::map<MemberId, std::int64_t> tallies;
  std::int64_t refunded_tokens = 0;
};

enum class TaskStatus { Open, Completed };

struct TaskRecord {
  TaskId id = 0;
  std::string description;
  MemberId issuer;
  TaskStatus status = TaskStatus::Open;
  std::vector<MemberId> closers;
  LogicalTime issued_at = 0;
  LogicalTime completed_at = 0;

  friend bool operator==(const TaskRecord&, const TaskRecord&) = default;
};

/// Everything needed to rebuild a room: engine parameters plus the names of
/// the sentiment scorer and matrix and the files they load from.
struct RoomSettings {
  std::string room_id = "room";
  std::string topic;
  EngineConfig engine;

  std::string scorer = "lexicon";  // lexicon | constant | external
  std::string lexicon_path;
  SentimentScore constant_score;
  std::string external_scores_path;

  std::string matrix = "noop";  // noop | rule | heuristic | learned
  RuleConfig rule;
  HeuristicConfig heuristic;
  std::string weights_path;
};

std::shared_ptr<const SentimentScorer> make_scorer(const RoomSettings& settings);
MatrixKind make_matrix(const RoomSettings& settings);

/// One chat room. Actions are applied strictly one at a time; callers that
/// share a room across threads must serialize access.
class Room {
 public:
  Room(RoomSettings settings, std::shared_ptr<const SentimentScorer> scorer, MatrixKind matrix);
  /// Builds the scorer and matrix named in the settings.
  static Room create(const RoomSettings& settings);

  /// New members start with a full budget. Throws RoomFull or InvalidArgument
  /// for a duplicate id.
  void add_member(const MemberId& member);
  /// Throws UnknownMember.
  void remove_member(const MemberId& member);

  /// Refill, budget check, effect, feature assembly, matrix allocation and
  /// cost deduction. Rejections leave the room untouched. Throws
  /// InvalidArgument if logical_time does not exceed the last accepted time.
  ActionOutcome submit(const Action& action);

  /// Closes the open election if its deadline has passed at `now`.
  std::optional<ElectionResult> advance(LogicalTime now);
  /// Throws NoOpenElection when nothing is open or the deadline is still ahead.
  ElectionResult tally_votes(LogicalTime now);

  /// The actor's resource structure as of `now`, without mutating the room.
  [[nodiscard]] ResourceStructure resources_at(const MemberId& member, LogicalTime now) const;
  [[nodiscard]] ResourceLedger ledger_at(LogicalTime now) const;

  [[nodiscard]] const RoomSettings& settings() const noexcept { return settings_; }
  [[nodiscard]] const Field& field() const noexcept { return field_; }
  [[nodiscard]] const ResourceLedger& ledger() const noexcept { return ledger_; }
  [[nodiscard]] const VoteState& votes() const noexcept { return votes_; }
  [[nodiscard]] const std::vector<TaskRecord>& tasks() const noexcept { return tasks_; }
  [[nodiscard]] const CorpusStats& corpus() const noexcept { return vectorizer_.stats(); }
  [[nodiscard]] const std::deque<FeatureVector>& history() const noexcept { return history_; }
  [[nodiscard]] LogicalTime clock() const noexcept { return clock_; }
  [[nodiscard]] const MatrixKind& matrix() const noexcept { return matrix_; }
  [[nodiscard]] const SentimentScorer& scorer() const noexcept { return *scorer_; }

  /// Hash over the full room state. Equal states give equal hashes.
  [[nodiscard]] std::uint64_t state_hash() const;

  /// Canonical JSON snapshot of settings and state.
  [[nodiscard]] std::string serialize() const;
  /// Rebuilds scorer and matrix from the embedded settings. Throws CorruptLog
  /// on malformed input.
  static Room deserialize(std::string_view snapshot);

 private:
  void refill_to(ResourceLedger& ledger, LogicalTime now) const;
  void rebuild_atmosphere();
  [[nodiscard]] std::uint64_t message_hash(const Message& m) const;
  [[nodiscard]] const Message* find_message(MessageId id) const;

  RoomSettings settings_;
  std::shared_ptr<const SentimentScorer> scorer_;
  MatrixKind matrix_;

  Field field_;
  ResourceLedger ledger_;
  Vectorizer vectorizer_;
  VoteState votes_;
  std::vector<TaskRecord> tasks_;
  std::deque<FeatureVector> history_;
  LogicalTime clock_ = 0;
  LogicalTime refilled_at_ = 0;
  MessageId next_message_id_ = 1;
  TaskId next_task_id_ = 1;
  std::vector<std::uint64_t> message_hashes_;
};

}  // namespace ttm
