#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ttm/config.hpp"
#include "ttm/engine.hpp"
#include "ttm/random.hpp"
#include "ttm/ttransformer.hpp"

namespace ttm::sim {

enum class Persona { Cooperative, Antagonist, Lurker, TaskFocused };
inline constexpr std::array<Persona, 4> kPersonas = {Persona::Cooperative, Persona::Antagonist, Persona::Lurker,
                                                     Persona::TaskFocused};

std::string_view to_string(Persona p) noexcept;

/// Habitus: how one persona turns an observation into an action.
struct AgentPolicy {
  Persona persona = Persona::Cooperative;
  double speak_probability = 0.5;
  double sentiment_bias = 0.0;      // baseline tone in [-1, 1]
  bool budget_aware = true;         // holds back when the budget cannot cover a message
  double resource_weight = 1.0;     // how strongly a low budget damps speaking
  double contagion = 0.5;           // pull of the room atmosphere on tone
  double resentment = 0.5;          // tone lost per unit of frustration
  double chill = 0.0;               // tone lost per unit of visible muting in the room
  double tone_noise = 0.2;          // half-width of the uniform tone jitter
  double task_probability = 0.0;    // per turn, issue a task
  double close_probability = 0.0;   // per turn, cast a closing vote on someone else's open task
  double election_probability = 0.0;
  double withdraw_probability = 0.0;
  double frustration_on_reject = 0.3;
  double frustration_on_cut = 0.2;  // when the matrix takes away more than the action cost
  double frustration_decay = 0.9;

  /// Throws ConfigInvalid for probabilities outside [0, 1] or bias outside [-1, 1].
  void validate() const;
  static AgentPolicy defaults(Persona persona);
};

/// Phrase lists aligned with the lexicon, one file per tone.
struct Templates {
  std::vector<std::string> positive;
  std::vector<std::string> neutral;
  std::vector<std::string> negative;
  std::vector<std::string> hostile;
  std::vector<std::string> tasks;

  /// Reads positive.txt, neutral.txt, negative.txt, hostile.txt and tasks.txt.
  static Templates load(const std::filesystem::path& dir);
};

enum class Regime { HighControl, LowControl, TtmHeuristic, TtmLearned };

std::string_view to_string(Regime r) noexcept;
Regime parse_regime(std::string_view name);
/// HighControl -> rule, LowControl -> noop, TTM -> heuristic or learned.
std::string regime_matrix(Regime r);

struct ScenarioConfig {
  std::string name = "scenario";
  Regime regime = Regime::TtmHeuristic;
  std::array<std::size_t, 4> roster{};  // agents per persona, indexed like kPersonas
  std::array<AgentPolicy, 4> policies{
      AgentPolicy::defaults(Persona::Cooperative), AgentPolicy::defaults(Persona::Antagonist),
      AgentPolicy::defaults(Persona::Lurker), AgentPolicy::defaults(Persona::TaskFocused)};
  std::int64_t ticks = 100;
  std::uint64_t seed = 1;
  RoomSettings room;
  Templates templates;

  [[nodiscard]] std::size_t agent_count() const noexcept;
  /// Throws ConfigInvalid.
  void validate() const;
};

/// Parses scenario.*, agents.*, persona.<name>.* and every room key. Unknown
/// keys are rejected. The regime decides matrix.kind unless it is set.
ScenarioConfig scenario_from_config(const KeyValueConfig& cfg);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// What an agent can see before it acts.
struct Observation {
  MemberId self;
  AtmosphereWindow atmosphere;
  ResourceStructure resources;
  double budget_cap = 5.0;
  std::int64_t vote_tokens = 0;
  double mute_pressure = 0.0;             // share of other members currently muted
  std::vector<TaskId> closable_tasks;     // open, issued by someone else, not yet voted on by self
  std::vector<MemberId> candidates;       // other members
  bool election_open = false;
  std::vector<MessageId> own_messages;    // not yet withdrawn
};

struct AgentState {
  double frustration = 0.0;
};

/// One turn of the habitus: Action = f(habitus + resource) + field.
/// Returns nothing when the agent stays silent.
std::optional<ActionKind> agent_step(const AgentPolicy& policy, const AgentState& state, const Observation& obs,
                                     const Templates& templates, Rng& rng);

/// Frustration update after the engine answered.
void settle(const AgentPolicy& policy, AgentState& state, const ActionOutcome* outcome, double budget_before);

/// Gini coefficient of nonnegative counts; 0 when all are zero.
double gini(std::span<const double> counts);

struct SimulationReport {
  std::string scenario;
  Regime regime = Regime::TtmHeuristic;
  std::uint64_t seed = 0;
  std::int64_t ticks = 0;
  std::size_t agents = 0;
  std::size_t submitted = 0;
  std::size_t accepted = 0;
  std::size_t rejected_budget = 0;
  std::size_t rejected_other = 0;
  std::size_t messages = 0;
  std::size_t withdrawn = 0;
  std::size_t matrix_adjustments = 0;  // accepted actions whose budget the matrix changed
  std::size_t mutes = 0;
  std::size_t elections = 0;
  std::size_t admins_elected = 0;
  std::size_t tasks_issued = 0;
  std::size_t tasks_completed = 0;
  double mean_atmosphere = 0.0;
  double participation_gini = 0.0;
  double mute_event_rate = 0.0;
  double interactive_freedom = 0.0;  // accepted / submitted
  double task_completion = 0.0;      // completed / issued
  std::vector<double> trajectory;    // window mean after each tick
};

/// Called after every submitted action with the room state right after it.
/// Returning false ends the run early.
using StepObserver = std::function<bool(const Room&, const Action&, const ActionOutcome&)>;

/// Runs `ticks` rounds of round-robin agent turns. Fully determined by cfg.
SimulationReport run_scenario(const ScenarioConfig& cfg, const StepObserver& observer = {});

void write_report(std::ostream& out, const SimulationReport& report);
void write_trajectory_csv(std::ostream& out, const SimulationReport& report);

/// Runs seeds derived from cfg.seed until `n` accepted actions were seen and
/// labels each with the Heuristic allocator acting as synthetic admin.
nn::Dataset generate_dataset(const ScenarioConfig& cfg, std::size_t n, std::size_t seq_len = 16,
                             const HeuristicConfig& oracle = {});

}  // namespace ttm::sim
