#include "ttm/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ttm/error.hpp"

namespace ttm {

namespace {

double finite_clamp(double value, double fallback, double cap) {
  if (std::isnan(value)) value = fallback;
  return std::clamp(value, 0.0, cap);
}

}  // namespace

double FeatureVector::atmosphere_mean() const noexcept {
  const auto atm = atmosphere();
  return std::accumulate(atm.begin(), atm.end(), 0.0) / static_cast<double>(kAtmosphereDim);
}

FeatureVector assemble_features(std::span<const double> action, const ResourceStructure& rs,
                                std::span<const double> atmosphere) {
  if (action.size() != kActionDim) {
    throw Error(Errc::DimensionMismatch, "action vector must have " + std::to_string(kActionDim) + " entries");
  }
  if (atmosphere.size() != kAtmosphereDim) {
    throw Error(Errc::DimensionMismatch, "atmosphere vector must have " + std::to_string(kAtmosphereDim) + " entries");
  }
  FeatureVector f;
  std::copy(action.begin(), action.end(), f.values.begin());
  f.values[kResourceCountIndex] = rs.count;
  f.values[kResourceProportionIndex] = rs.proportion;
  for (std::size_t i = 0; i < kAtmosphereDim; ++i) {
    if (!(atmosphere[i] >= -1.0 && atmosphere[i] <= 1.0)) {
      throw Error(Errc::OutOfRange, "atmosphere slot outside [-1, 1]");
    }
    f.values[kAtmosphereOffset + i] = atmosphere[i];
  }
  return f;
}

FeatureVector assemble_features(const ActionVector& action, const ResourceStructure& rs,
                                const std::array<double, kAtmosphereDim>& atmosphere) {
  return assemble_features(std::span<const double>(action.values), rs, std::span<const double>(atmosphere));
}

void HeuristicConfig::validate() const {
  if (!(k_atm >= 0.0) || !(k_eq >= 0.0)) throw Error(Errc::InvalidArgument, "heuristic gains must be >= 0");
  if (target_share && !(*target_share > 0.0 && *target_share <= 1.0)) {
    throw Error(Errc::InvalidArgument, "target share must lie in (0, 1]");
  }
}

std::string matrix_name(const MatrixKind& matrix) {
  static constexpr const char* kNames[] = {"noop", "rule", "heuristic", "learned"};
  return kNames[matrix.index()];
}

MatrixDecision heuristic_allocate(const HeuristicConfig& cfg, const ResourceStructure& rs,
                                  double atm_mean, const AllocationContext& ctx) {
  cfg.validate();
  const double share =
      cfg.target_share.value_or(1.0 / static_cast<double>(std::max<std::size_t>(ctx.tribe_size, 1)));
  const double raw = rs.count + cfg.k_atm * atm_mean + cfg.k_eq * (share - rs.proportion);
  return {ctx.actor, finite_clamp(raw, rs.count, ctx.budget_cap), 0};
}

MatrixDecision rule_allocate(const RuleConfig& cfg, const Action& action, const ResourceStructure& rs,
                             const AllocationContext& ctx) {
  const double unchanged = finite_clamp(rs.count, 0.0, ctx.budget_cap);
  const auto* speak = std::get_if<Speak>(&action.kind);
  if (!speak) return {ctx.actor, unchanged, 0};
  for (const auto& token : tokenize(speak->text)) {
    if (std::find(cfg.banned_tokens.begin(), cfg.banned_tokens.end(), token) != cfg.banned_tokens.end()) {
      return {ctx.actor, 0.0, cfg.mute_duration};
    }
  }
  return {ctx.actor, unchanged, 0};
}

nn::Mat sequence_matrix(const FeatureVector& features, std::span<const FeatureVector> history,
                        std::size_t seq_len) {
  if (seq_len == 0) throw Error(Errc::ShapeMismatch, "sequence length must be >= 1");
  nn::Mat m = nn::Mat::Zero(static_cast<Eigen::Index>(seq_len), static_cast<Eigen::Index>(kFeatureDim));
  const std::size_t keep = std::min(history.size(), seq_len - 1);
  const auto tail = history.subspan(history.size() - keep);
  const std::size_t first = seq_len - 1 - keep;
  for (std::size_t i = 0; i < keep; ++i) {
    std::copy(tail[i].values.begin(), tail[i].values.end(), m.row(static_cast<Eigen::Index>(first + i)).data());
  }
  std::copy(features.values.begin(), features.values.end(), m.row(static_cast<Eigen::Index>(seq_len - 1)).data());
  return m;
}

MatrixDecision learned_allocate(const LearnedMatrix& matrix, const FeatureVector& features,
                                std::span<const FeatureVector> history, const ResourceStructure& rs,
                                const AllocationContext& ctx) {
  if (!matrix.weights) throw Error(Errc::WeightsMissing, "learned matrix has no weights loaded");
  const auto& cfg = matrix.weights->config;
  if (cfg.input_dim != kFeatureDim) {
    throw Error(Errc::ShapeMismatch, "learned matrix expects " + std::to_string(kFeatureDim) + " input features");
  }
  const double y = nn::forward(*matrix.weights, sequence_matrix(features, history, cfg.seq_len));
  return {ctx.actor, finite_clamp(y, rs.count, ctx.budget_cap), 0};
}

MatrixDecision allocate(const MatrixKind& matrix, const FeatureVector& features,
                        std::span<const FeatureVector> history, const Action& action,
                        const ResourceStructure& rs, const AllocationContext& ctx) {
  MatrixDecision d = std::visit(
      [&](const auto& m) -> MatrixDecision {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, NoOpMatrix>) {
          return {ctx.actor, rs.count, 0};
        } else if constexpr (std::is_same_v<M, RuleMatrix>) {
          return rule_allocate(m.config, action, rs, ctx);
        } else if constexpr (std::is_same_v<M, HeuristicMatrix>) {
          return heuristic_allocate(m.config, rs, features.atmosphere_mean(), ctx);
        } else {
          return learned_allocate(m, features, history, rs, ctx);
        }
      },
      matrix);
  d.new_budget = finite_clamp(d.new_budget, std::isfinite(rs.count) ? rs.count : 0.0, ctx.budget_cap);
  d.mute_ticks = std::max<LogicalTime>(d.mute_ticks, 0);
  return d;
}

}  // namespace ttm
