#pragma once

// Adaptive penalty selection rules rho^(k+1) = phi(k, history, rho^(k)).
//
// Every adaptive rule acts only when k mod period == 0 and otherwise returns
// its input unchanged. Single-parameter rules treat the stacked constraint as
// one group and broadcast their scalar to all J entries.

#include "madmm/core.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace madmm {

struct RuleConfig {
  int period = 5;
  double tau_incr = 10.0;
  double tau_decr = 10.0;
  int bbs_lag = 0;  // 0 means "same as period"
  double bbs_safeguard_threshold = 0.2;
  double rb_mu = 10.0;
  double rb_tau = 2.0;

  int lag() const { return bbs_lag > 0 ? bbs_lag : period; }
  /// History depth the engine must retain for these settings.
  std::size_t window() const;
  void validate() const;
};

class PenaltyRule {
 public:
  explicit PenaltyRule(RuleConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  virtual ~PenaltyRule() = default;

  virtual std::string_view name() const = 0;
  /// Called after iteration k produced x^(k+1), z^(k+1), y^(k+1): ctx.at_lag(0)
  /// holds those, ctx.at_lag(1) the previous iterate.
  virtual PenaltyVector update(long k, const RuleContext& ctx, const PenaltyVector& pv) const = 0;

  const RuleConfig& config() const { return cfg_; }

 private:
  RuleConfig cfg_;
};

/// Valid names: fixed, rb, bbs, mpbbs, sra, mpsra. Throws StructuralError otherwise.
std::unique_ptr<PenaltyRule> make_rule(std::string_view name, const RuleConfig& cfg = {});
const std::vector<std::string>& rule_names();
bool is_multiparameter_rule(std::string_view name);

/// The four-way branch of the spectral radius approximation for one block:
/// p = ||y_j^(k+1) - y_j^(k)||, q = ||B_j (z^(k+1) - z^(k))||.
double spectral_ratio_branch(double p, double q, double rho, const RuleConfig& cfg);

PenaltyVector fixed_rule(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg);
PenaltyVector mpsra_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg);
PenaltyVector sra_single_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg);
PenaltyVector mpbbs_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg);
PenaltyVector bbs_single_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg);
PenaltyVector rb_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg);

/// Geometric mean of the entries; the grouped scalar a single-parameter rule works from.
double grouped_penalty(const PenaltyVector& pv);

/// Curvature estimate for one group from lagged differences; std::nullopt
/// when the correlation safeguard rejects the update.
std::optional<double> bbs_estimate(const Vector& a_dx, const Vector& dy_tilde, const Vector& b_dz, const Vector& dy,
                                   double threshold);

}  // namespace madmm
