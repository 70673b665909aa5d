#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ttm/ttransformer.hpp"
#include "ttm/types.hpp"
#include "ttm/vectorizer.hpp"

namespace ttm {

inline constexpr std::size_t kResourceCountIndex = kActionDim;
inline constexpr std::size_t kResourceProportionIndex = kActionDim + 1;
inline constexpr std::size_t kAtmosphereOffset = kActionDim + kResourceDim;

/// [action(1024) | resource count | resource proportion | atmosphere(10)]
struct FeatureVector {
  std::array<double, kFeatureDim> values{};

  [[nodiscard]] double resource_count() const noexcept { return values[kResourceCountIndex]; }
  [[nodiscard]] double resource_proportion() const noexcept { return values[kResourceProportionIndex]; }
  [[nodiscard]] std::span<const double, kAtmosphereDim> atmosphere() const noexcept {
    return std::span<const double, kFeatureDim>(values).subspan<kAtmosphereOffset, kAtmosphereDim>();
  }
  [[nodiscard]] double atmosphere_mean() const noexcept;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Throws DimensionMismatch on wrong input lengths and OutOfRange when an
/// atmosphere slot lies outside [-1, 1].
FeatureVector assemble_features(std::span<const double> action, const ResourceStructure& rs,
                                std::span<const double> atmosphere);
FeatureVector assemble_features(const ActionVector& action, const ResourceStructure& rs,
                                const std::array<double, kAtmosphereDim>& atmosphere);

struct MatrixDecision {
  MemberId actor;
  double new_budget = 0.0;      // in [0, budget_cap]
  LogicalTime mute_ticks = 0;   // refill is suspended this long after the action
};

/// What an allocator may know about the room beyond the actor's features.
struct AllocationContext {
  MemberId actor;
  double budget_cap = 5.0;
  std::size_t tribe_size = 1;
};

struct NoOpMatrix {};

struct RuleConfig {
  std::vector<std::string> banned_tokens;
  LogicalTime mute_duration = 30;
};

struct HeuristicConfig {
  double k_atm = 1.0;
  double k_eq = 2.0;
  std::optional<double> target_share;  // defaults to 1 / tribe size

  /// Throws InvalidArgument.
  void validate() const;
};

struct RuleMatrix {
  RuleConfig config;
};

struct HeuristicMatrix {
  HeuristicConfig config;
};

struct LearnedMatrix {
  std::shared_ptr<const nn::ModelWeights> weights;
};

using MatrixKind = std::variant<NoOpMatrix, RuleMatrix, HeuristicMatrix, LearnedMatrix>;

std::string matrix_name(const MatrixKind& matrix);

/// clamp(count + k_atm * atm_mean + k_eq * (s* - proportion), 0, budget_cap).
MatrixDecision heuristic_allocate(const HeuristicConfig& cfg, const ResourceStructure& rs,
                                  double atm_mean, const AllocationContext& ctx);

/// Speak containing a banned token: budget 0 and a mute. Otherwise unchanged.
MatrixDecision rule_allocate(const RuleConfig& cfg, const Action& action, const ResourceStructure& rs,
                             const AllocationContext& ctx);

/// Runs the learned model on [history | features], front-padded to its
/// sequence length. Throws WeightsMissing and ShapeMismatch.
MatrixDecision learned_allocate(const LearnedMatrix& matrix, const FeatureVector& features,
                                std::span<const FeatureVector> history, const ResourceStructure& rs,
                                const AllocationContext& ctx);

/// Dispatches to the active variant. The result is always finite and in
/// [0, budget_cap].
MatrixDecision allocate(const MatrixKind& matrix, const FeatureVector& features,
                        std::span<const FeatureVector> history, const Action& action,
                        const ResourceStructure& rs, const AllocationContext& ctx);

/// [history | features] front-padded with zero rows to `seq_len`.
nn::Mat sequence_matrix(const FeatureVector& features, std::span<const FeatureVector> history,
                        std::size_t seq_len);

}  // namespace ttm
