#include "ttm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "ttm/error.hpp"

namespace ttm::sim {

namespace {

constexpr std::array<std::string_view, 4> kPersonaKeys = {"cooperative", "antagonist", "lurker", "task_focused"};

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open template file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.below(items.size())];
}

void check_probability(double p, std::string_view what) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::ConfigInvalid, std::string(what) + " must lie in [0, 1]");
}

}  // namespace

std::string_view to_string(Persona p) noexcept {
  switch (p) {
    case Persona::Cooperative: return "Cooperative";
    case Persona::Antagonist: return "Antagonist";
    case Persona::Lurker: return "Lurker";
    case Persona::TaskFocused: return "TaskFocused";
  }
  return "Unknown";
}

void AgentPolicy::validate() const {
  check_probability(speak_probability, "speak_probability");
  check_probability(task_probability, "task_probability");
  check_probability(close_probability, "close_probability");
  check_probability(election_probability, "election_probability");
  check_probability(withdraw_probability, "withdraw_probability");
  check_probability(frustration_decay, "frustration_decay");
  if (!(sentiment_bias >= -1.0 && sentiment_bias <= 1.0)) {
    throw Error(Errc::ConfigInvalid, "sentiment_bias must lie in [-1, 1]");
  }
  for (double v : {resource_weight, contagion, resentment, chill, tone_noise, frustration_on_reject,
                   frustration_on_cut}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(Errc::ConfigInvalid, "persona weights must be finite and >= 0");
  }
}

AgentPolicy AgentPolicy::defaults(Persona persona) {
  AgentPolicy p;
  p.persona = persona;
  switch (persona) {
    case Persona::Cooperative:
      p.speak_probability = 0.5;
      p.sentiment_bias = 0.3;
      p.contagion = 0.6;
      p.resentment = 0.6;
      p.chill = 2.5;
      p.tone_noise = 0.3;
      p.election_probability = 0.01;
      p.withdraw_probability = 0.01;
      break;
    case Persona::Antagonist:
      p.speak_probability = 0.7;
      p.sentiment_bias = -0.8;
      p.budget_aware = false;
      p.contagion = 0.3;
      p.resentment = 0.8;
      p.tone_noise = 0.3;
      break;
    case Persona::Lurker:
      p.speak_probability = 0.03;
      p.sentiment_bias = 0.1;
      p.chill = 2.5;
      break;
    case Persona::TaskFocused:
      p.speak_probability = 0.3;
      p.sentiment_bias = 0.3;
      p.task_probability = 0.05;
      p.close_probability = 0.2;
      break;
  }
  return p;
}

Templates Templates::load(const std::filesystem::path& dir) {
  Templates t;
  t.positive = read_lines(dir / "positive.txt");
  t.neutral = read_lines(dir / "neutral.txt");
  t.negative = read_lines(dir / "negative.txt");
  t.hostile = read_lines(dir / "hostile.txt");
  t.tasks = read_lines(dir / "tasks.txt");
  for (const auto* list : {&t.positive, &t.neutral, &t.negative, &t.hostile, &t.tasks}) {
    if (list->empty()) throw Error(Errc::ConfigInvalid, "template file in " + dir.string() + " is empty");
  }
  return t;
}

std::string_view to_string(Regime r) noexcept {
  switch (r) {
    case Regime::HighControl: return "high_control";
    case Regime::LowControl: return "low_control";
    case Regime::TtmHeuristic: return "ttm_heuristic";
    case Regime::TtmLearned: return "ttm_learned";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::HighControl, Regime::LowControl, Regime::TtmHeuristic, Regime::TtmLearned}) {
    if (name == to_string(r)) return r;
  }
  throw Error(Errc::ConfigInvalid, "unknown regime '" + std::string(name) + "'");
}

std::string regime_matrix(Regime r) {
  switch (r) {
    case Regime::HighControl: return "rule";
    case Regime::LowControl: return "noop";
    case Regime::TtmHeuristic: return "heuristic";
    case Regime::TtmLearned: return "learned";
  }
  return "noop";
}

std::size_t ScenarioConfig::agent_count() const noexcept {
  return std::accumulate(roster.begin(), roster.end(), std::size_t{0});
}

void ScenarioConfig::validate() const {
  if (agent_count() < 2) throw Error(Errc::ConfigInvalid, "a scenario needs at least 2 agents");
  if (ticks < 1) throw Error(Errc::ConfigInvalid, "scenario.ticks must be >= 1");
  if (agent_count() > room.engine.max_members) throw Error(Errc::ConfigInvalid, "roster exceeds engine.max_members");
  room.engine.validate();
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (roster[i] == 0) continue;
    policies[i].validate();
    if (policies[i].persona != kPersonas[i]) throw Error(Errc::ConfigInvalid, "policy/persona mismatch");
  }
  if (room.matrix != regime_matrix(regime)) {
    throw Error(Errc::ConfigInvalid, "matrix.kind '" + room.matrix + "' contradicts regime " +
                                         std::string(to_string(regime)));
  }
  for (const auto* list : {&templates.positive, &templates.neutral, &templates.negative, &templates.hostile,
                           &templates.tasks}) {
    if (list->empty()) throw Error(Errc::ConfigInvalid, "scenario templates are missing");
  }
}

ScenarioConfig scenario_from_config(const KeyValueConfig& cfg) {
  ScenarioConfig s;
  s.name = cfg.get_string("scenario.name", s.name);
  s.regime = parse_regime(cfg.get_string("scenario.regime", std::string(to_string(s.regime))));
  s.ticks = cfg.get_int("scenario.ticks", s.ticks);
  const std::int64_t seed = cfg.get_int("scenario.seed", static_cast<std::int64_t>(s.seed));
  if (seed < 0) throw Error(Errc::ConfigInvalid, "scenario.seed must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);

  for (std::size_t i = 0; i < kPersonas.size(); ++i) {
    const std::string key(kPersonaKeys[i]);
    const std::int64_t n = cfg.get_int("agents." + key, 0);
    if (n < 0) throw Error(Errc::ConfigInvalid, "agents." + key + " must be >= 0");
    s.roster[i] = static_cast<std::size_t>(n);

    AgentPolicy& p = s.policies[i];
    const std::string pre = "persona." + key + ".";
    p.speak_probability = cfg.get_double(pre + "speak_probability", p.speak_probability);
    p.sentiment_bias = cfg.get_double(pre + "sentiment_bias", p.sentiment_bias);
    p.budget_aware = cfg.get_bool(pre + "budget_aware", p.budget_aware);
    p.resource_weight = cfg.get_double(pre + "resource_weight", p.resource_weight);
    p.contagion = cfg.get_double(pre + "contagion", p.contagion);
    p.resentment = cfg.get_double(pre + "resentment", p.resentment);
    p.chill = cfg.get_double(pre + "chill", p.chill);
    p.tone_noise = cfg.get_double(pre + "tone_noise", p.tone_noise);
    p.task_probability = cfg.get_double(pre + "task_probability", p.task_probability);
    p.close_probability = cfg.get_double(pre + "close_probability", p.close_probability);
    p.election_probability = cfg.get_double(pre + "election_probability", p.election_probability);
    p.withdraw_probability = cfg.get_double(pre + "withdraw_probability", p.withdraw_probability);
    p.frustration_on_reject = cfg.get_double(pre + "frustration_on_reject", p.frustration_on_reject);
    p.frustration_on_cut = cfg.get_double(pre + "frustration_on_cut", p.frustration_on_cut);
    p.frustration_decay = cfg.get_double(pre + "frustration_decay", p.frustration_decay);
  }

  const auto templates_dir = cfg.get_path("scenario.templates");
  if (templates_dir.empty()) throw Error(Errc::ConfigInvalid, "scenario.templates is required");
  s.templates = Templates::load(templates_dir);

  s.room = room_settings_from_config(cfg);
  if (!cfg.contains("matrix.kind")) s.room.matrix = regime_matrix(s.regime);
  cfg.require_all_used();
  s.validate();
  return s;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return scenario_from_config(KeyValueConfig::load(path));
}

std::optional<ActionKind> agent_step(const AgentPolicy& policy, const AgentState& state, const Observation& obs,
                                     const Templates& templates, Rng& rng) {
  const double budget = obs.resources.count;
  const double atm = obs.atmosphere.mean();
  auto affordable = [&](ActionType type) { return !policy.budget_aware || budget >= cost(type).budget; };

  // Closing votes and tasks come first: they are what TaskFocused members are here for.
  if (!obs.closable_tasks.empty() && obs.vote_tokens > 0 && rng.bernoulli(policy.close_probability)) {
    return Vote{pick(obs.closable_tasks, rng)};
  }
  if (rng.bernoulli(policy.task_probability) && affordable(ActionType::IssueTask)) {
    return IssueTask{pick(templates.tasks, rng)};
  }
  if (!obs.candidates.empty() && obs.vote_tokens > 0 && rng.bernoulli(policy.election_probability)) {
    return Vote{pick(obs.candidates, rng)};
  }
  if (!obs.own_messages.empty() && rng.bernoulli(policy.withdraw_probability) && affordable(ActionType::Withdraw)) {
    return Withdraw{obs.own_messages.back()};
  }

  // Resource term: a thin budget damps the urge to speak.
  double resource_factor = 1.0;
  if (policy.budget_aware) {
    if (budget < cost(ActionType::Speak).budget) return std::nullopt;
    const double fill = obs.budget_cap > 0.0 ? std::clamp(budget / obs.budget_cap, 0.0, 1.0) : 0.0;
    resource_factor = std::clamp(1.0 - policy.resource_weight * (1.0 - fill), 0.0, 1.0);
  }
  // Field term: people talk more where the mood matches their own.
  const double field_factor = std::clamp(1.0 + policy.sentiment_bias * atm, 0.0, 2.0);
  if (!rng.bernoulli(std::clamp(policy.speak_probability * resource_factor * field_factor, 0.0, 1.0))) {
    return std::nullopt;
  }

  const double tone = policy.sentiment_bias + policy.contagion * atm - policy.resentment * state.frustration -
                      policy.chill * obs.mute_pressure + rng.uniform(-policy.tone_noise, policy.tone_noise);
  const std::vector<std::string>* list = &templates.hostile;
  if (tone >= 0.25) {
    list = &templates.positive;
  } else if (tone >= -0.25) {
    list = &templates.neutral;
  } else if (tone >= -0.6) {
    list = &templates.negative;
  }
  return Speak{pick(*list, rng)};
}

void settle(const AgentPolicy& policy, AgentState& state, const ActionOutcome* outcome, double budget_before) {
  state.frustration *= policy.frustration_decay;
  if (!outcome) return;
  if (!outcome->accepted) {
    if (outcome->reason == OutcomeReason::BudgetExhausted) state.frustration += policy.frustration_on_reject;
    return;
  }
  if (outcome->decision) {
    if (outcome->decision->mute_ticks > 0 || outcome->decision->new_budget < budget_before - 1.0) {
      state.frustration += policy.frustration_on_cut;
    }
  }
}

double gini(std::span<const double> counts) {
  if (counts.empty()) throw Error(Errc::InvalidArgument, "gini needs at least one member");
  std::vector<double> x(counts.begin(), counts.end());
  for (double v : x) {
    if (!(v >= 0.0)) throw Error(Errc::InvalidArgument, "gini counts must be nonnegative");
  }
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  if (total == 0.0) return 0.0;
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double weighted = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) weighted += static_cast<double>(i + 1) * x[i];
  return std::clamp(2.0 * weighted / (n * total) - (n + 1.0) / n, 0.0, 1.0);
}

SimulationReport run_scenario(const ScenarioConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  Room room = Room::create(cfg.room);

  struct Agent {
    MemberId id;
    const AgentPolicy* policy;
    AgentState state;
    Rng rng;
    double speaks = 0.0;
  };
  std::vector<Agent> agents;
  for (std::size_t p = 0; p < kPersonas.size(); ++p) {
    for (std::size_t k = 0; k < cfg.roster[p]; ++k) {
      char name[48];
      std::snprintf(name, sizeof name, "%s-%02zu", std::string(kPersonaKeys[p]).c_str(), k + 1);
      const auto index = agents.size();
      agents.push_back({MemberId(name), &cfg.policies[p], {}, Rng(derive_seed(cfg.seed, index)), 0.0});
      room.add_member(agents.back().id);
    }
  }

  SimulationReport report;
  report.scenario = cfg.name;
  report.regime = cfg.regime;
  report.seed = cfg.seed;
  report.ticks = cfg.ticks;
  report.agents = agents.size();

  const auto n = static_cast<LogicalTime>(agents.size());
  bool stop = false;
  for (LogicalTime tick = 0; tick < cfg.ticks && !stop; ++tick) {
    for (LogicalTime i = 0; i < n && !stop; ++i) {
      Agent& agent = agents[static_cast<std::size_t>(i)];
      const LogicalTime now = tick * n + i + 1;
      if (auto result = room.advance(now)) {
        ++report.elections;
        if (result->winner) ++report.admins_elected;
      }

      const ResourceLedger ledger = room.ledger_at(now);
      Observation obs;
      obs.self = agent.id;
      obs.atmosphere = room.field().atmosphere;
      obs.resources = resource_structure(ledger, agent.id);
      obs.budget_cap = ledger.at(agent.id).budget_cap;
      obs.vote_tokens = ledger.at(agent.id).vote_tokens;
      std::size_t muted = 0;
      for (const auto& [id, r] : ledger) {
        if (id != agent.id && r.muted_until > now) ++muted;
      }
      obs.mute_pressure = n > 1 ? static_cast<double>(muted) / static_cast<double>(n - 1) : 0.0;
      for (const auto& t : room.tasks()) {
        if (t.status == TaskStatus::Open && t.issuer != agent.id &&
            std::find(t.closers.begin(), t.closers.end(), agent.id) == t.closers.end()) {
          obs.closable_tasks.push_back(t.id);
        }
      }
      for (const auto& other : agents) {
        if (other.id != agent.id) obs.candidates.push_back(other.id);
      }
      obs.election_open = room.votes().open;
      for (const auto& m : room.field().transcript) {
        if (m.author == agent.id && !m.withdrawn) obs.own_messages.push_back(m.id);
      }

      auto kind = agent_step(*agent.policy, agent.state, obs, cfg.templates, agent.rng);
      if (!kind) {
        settle(*agent.policy, agent.state, nullptr, obs.resources.count);
        continue;
      }
      const Action action{std::move(*kind), agent.id, now};
      const ActionOutcome outcome = room.submit(action);
      ++report.submitted;
      if (outcome.accepted) {
        ++report.accepted;
        const auto& d = *outcome.decision;
        if (d.new_budget != outcome.resources.count || d.mute_ticks > 0) ++report.matrix_adjustments;
        if (d.mute_ticks > 0) ++report.mutes;
        switch (action.type()) {
          case ActionType::Speak: agent.speaks += 1.0; break;
          case ActionType::IssueTask: ++report.tasks_issued; break;
          case ActionType::Withdraw: ++report.withdrawn; break;
          case ActionType::Vote: break;
        }
      } else if (outcome.reason == OutcomeReason::BudgetExhausted) {
        ++report.rejected_budget;
      } else {
        ++report.rejected_other;
      }
      settle(*agent.policy, agent.state, &outcome, obs.resources.count);
      if (observer && !observer(room, action, outcome)) stop = true;
    }
    report.trajectory.push_back(room.field().atmosphere.mean());
  }

  double atm_sum = 0.0;
  for (const auto& m : room.field().transcript) {
    if (m.withdrawn) continue;
    ++report.messages;
    atm_sum += m.atmosphere_value;
  }
  report.mean_atmosphere = report.messages ? atm_sum / static_cast<double>(report.messages) : 0.0;
  std::vector<double> speaks;
  for (const auto& a : agents) speaks.push_back(a.speaks);
  report.participation_gini = gini(speaks);
  for (const auto& t : room.tasks()) {
    if (t.status == TaskStatus::Completed) ++report.tasks_completed;
  }
  if (report.submitted) {
    report.mute_event_rate = static_cast<double>(report.rejected_budget) / static_cast<double>(report.submitted);
    report.interactive_freedom = static_cast<double>(report.accepted) / static_cast<double>(report.submitted);
  }
  if (report.tasks_issued) {
    report.task_completion = static_cast<double>(report.tasks_completed) / static_cast<double>(report.tasks_issued);
  }
  return report;
}

void write_report(std::ostream& out, const SimulationReport& r) {
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  out << "scenario = " << r.scenario << '\n'
      << "regime = " << to_string(r.regime) << '\n'
      << "seed = " << r.seed << '\n'
      << "ticks = " << r.ticks << '\n'
      << "agents = " << r.agents << '\n'
      << "submitted = " << r.submitted << '\n'
      << "accepted = " << r.accepted << '\n'
      << "rejected_budget = " << r.rejected_budget << '\n'
      << "rejected_other = " << r.rejected_other << '\n'
      << "messages = " << r.messages << '\n'
      << "withdrawn = " << r.withdrawn << '\n'
      << "matrix_adjustments = " << r.matrix_adjustments << '\n'
      << "mutes = " << r.mutes << '\n'
      << "elections = " << r.elections << '\n'
      << "admins_elected = " << r.admins_elected << '\n'
      << "tasks_issued = " << r.tasks_issued << '\n'
      << "tasks_completed = " << r.tasks_completed << '\n'
      << "mean_atmosphere = " << r.mean_atmosphere << '\n'
      << "participation_gini = " << r.participation_gini << '\n'
      << "mute_event_rate = " << r.mute_event_rate << '\n'
      << "interactive_freedom = " << r.interactive_freedom << '\n'
      << "task_completion = " << r.task_completion << '\n';
  out.flags(old_flags);
  out.precision(old_precision);
}

void write_trajectory_csv(std::ostream& out, const SimulationReport& r) {
  const auto old_precision = out.precision();
  out << std::setprecision(17) << "tick,atmosphere\n";
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) out << i + 1 << ',' << r.trajectory[i] << '\n';
  out.precision(old_precision);
}

nn::Dataset generate_dataset(const ScenarioConfig& cfg, std::size_t n, std::size_t seq_len,
                             const HeuristicConfig& oracle) {
  if (n == 0) throw Error(Errc::ConfigInvalid, "dataset size must be >= 1");
  if (seq_len == 0) throw Error(Errc::ConfigInvalid, "sequence length must be >= 1");
  oracle.validate();
  ScenarioConfig run = cfg;
  run.room.engine.history_window = std::max<std::size_t>(seq_len, 2);

  nn::Dataset data(seq_len, kFeatureDim);
  for (std::uint64_t round = 0; data.size() < n; ++round) {
    if (round > 10000) throw Error(Errc::ConfigInvalid, "scenario produces no accepted actions");
    run.seed = derive_seed(cfg.seed, round);
    std::deque<std::int64_t> steps;
    run_scenario(run, [&](const Room& room, const Action& action, const ActionOutcome& outcome) {
      if (!outcome.accepted) return true;
      const FeatureVector& f = room.history().back();
      steps.push_back(data.add_frame(f.values));
      if (steps.size() > seq_len) steps.pop_front();
      const AllocationContext ctx{action.actor, room.ledger().at(action.actor).budget_cap, room.field().tribe.size()};
      const double label = heuristic_allocate(oracle, outcome.resources, f.atmosphere_mean(), ctx).new_budget;
      const std::vector<std::int64_t> seq(steps.begin(), steps.end());
      data.add_sample(seq, label);
      return data.size() < n;
    });
  }
  return data;
}

}  // namespace ttm::sim
