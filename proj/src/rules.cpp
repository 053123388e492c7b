#include "madmm/rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace madmm {

namespace {

constexpr double kRhoMin = std::numeric_limits<double>::min();
constexpr double kRhoMax = std::numeric_limits<double>::max();

double keep_positive(double rho) {
  if (std::isnan(rho)) return 1.0;
  return std::clamp(rho, kRhoMin, kRhoMax);
}

bool acts_at(long k, const RuleConfig& cfg) { return k % cfg.period == 0; }

PenaltyVector broadcast(double rho, const PenaltyVector& pv) {
  return PenaltyVector(Vector::Constant(pv.size(), keep_positive(rho)), pv.layout());
}

// Stacked B (z_new - z_old) between two snapshots.
Vector b_delta(const RuleContext& ctx, std::size_t newer, std::size_t older) {
  return ctx.problem().stacked_b(ctx.at_lag(newer).z - ctx.at_lag(older).z);
}

}  // namespace

std::size_t RuleConfig::window() const { return static_cast<std::size_t>(2 * std::max(period, lag()) + 1); }

void RuleConfig::validate() const {
  if (period < 1) throw StructuralError("rule period must be positive");
  if (!(tau_incr > 1.0) || !(tau_decr > 1.0)) throw StructuralError("tau_incr and tau_decr must exceed 1");
  if (bbs_lag < 0) throw StructuralError("bbs_lag must be nonnegative");
  if (!(bbs_safeguard_threshold > 0.0 && bbs_safeguard_threshold < 1.0)) {
    throw StructuralError("bbs safeguard threshold must lie in (0, 1)");
  }
  if (!(rb_mu > 1.0) || !(rb_tau > 1.0)) throw StructuralError("rb_mu and rb_tau must exceed 1");
}

double grouped_penalty(const PenaltyVector& pv) { return std::exp(pv.values().array().log().mean()); }

double spectral_ratio_branch(double p, double q, double rho, const RuleConfig& cfg) {
  if (p == 0.0 && q > 0.0) return keep_positive(rho / cfg.tau_decr);
  if (p > 0.0 && q == 0.0) return keep_positive(cfg.tau_incr * rho);
  if (p == 0.0 && q == 0.0) return rho;
  return keep_positive(p / q);
}

PenaltyVector fixed_rule(long, const RuleContext&, const PenaltyVector& pv, const RuleConfig&) { return pv; }

PenaltyVector mpsra_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg) {
  if (!acts_at(k, cfg) || !ctx.has_lag(1)) return pv;
  const BlockLayout& lay = pv.layout();
  const Vector dy = ctx.at_lag(0).y - ctx.at_lag(1).y;
  const Vector bdz = b_delta(ctx, 0, 1);
  Vector rho = pv.values();
  for (Index j = 0; j < pv.size(); ++j) {
    const double p = dy.segment(lay.offset(j), lay.rows(j)).norm();
    const double q = bdz.segment(lay.offset(j), lay.rows(j)).norm();
    rho[j] = spectral_ratio_branch(p, q, pv[j], cfg);
  }
  return PenaltyVector(std::move(rho), lay);
}

PenaltyVector sra_single_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg) {
  if (!acts_at(k, cfg) || !ctx.has_lag(1)) return pv;
  const double p = (ctx.at_lag(0).y - ctx.at_lag(1).y).norm();
  const double q = b_delta(ctx, 0, 1).norm();
  return broadcast(spectral_ratio_branch(p, q, grouped_penalty(pv), cfg), pv);
}

std::optional<double> bbs_estimate(const Vector& a_dx, const Vector& dy_tilde, const Vector& b_dz, const Vector& dy,
                                   double threshold) {
  // For one block of a multiconstraint problem only the stacked products
  // A^T y~ and B^T y match the objective gradients, so the per-block inner
  // products carry no definite sign. Curvatures are taken in magnitude and the
  // safeguard asks for strong (anti)alignment of the difference pairs.
  const double ax_norm = a_dx.norm();
  const double yt_norm = dy_tilde.norm();
  const double bz_norm = b_dz.norm();
  const double y_norm = dy.norm();
  if (ax_norm == 0.0 || yt_norm == 0.0 || bz_norm == 0.0 || y_norm == 0.0) return std::nullopt;
  const double ip_x = std::abs(a_dx.dot(dy_tilde));
  const double ip_z = std::abs(b_dz.dot(dy));
  const double corr_x = ip_x / (ax_norm * yt_norm);
  const double corr_z = ip_z / (bz_norm * y_norm);
  if (!(corr_x > threshold) || !(corr_z > threshold)) return std::nullopt;
  // sqrt(|dy~|^2 |dy|^2 / (<A dx, dy~> <B dz, dy>)), evaluated without squaring.
  const double rho = (yt_norm / std::sqrt(ip_x)) * (y_norm / std::sqrt(ip_z));
  if (!std::isfinite(rho) || !(rho > 0.0)) return std::nullopt;
  return rho;
}

namespace {

struct LaggedDiffs {
  Vector a_dx;
  Vector b_dz;
  Vector dy;
  Vector dy_tilde;
};

std::optional<LaggedDiffs> lagged_diffs(long k, const RuleContext& ctx, const RuleConfig& cfg) {
  const auto lag = static_cast<std::size_t>(cfg.lag());
  // The older end must be an iterate produced by the loop, not the initial guess.
  if (k < static_cast<long>(lag) || !ctx.has_lag(lag)) return std::nullopt;
  const Snapshot& now = ctx.at_lag(0);
  const Snapshot& then = ctx.at_lag(lag);
  return LaggedDiffs{ctx.problem().stacked_a(now.x - then.x), ctx.problem().stacked_b(now.z - then.z),
                     now.y - then.y, now.y_tilde - then.y_tilde};
}

}  // namespace

PenaltyVector mpbbs_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg) {
  if (!acts_at(k, cfg)) return pv;
  const auto diffs = lagged_diffs(k, ctx, cfg);
  if (!diffs) return pv;
  const BlockLayout& lay = pv.layout();
  Vector rho = pv.values();
  for (Index j = 0; j < pv.size(); ++j) {
    const Index off = lay.offset(j);
    const Index len = lay.rows(j);
    const auto est = bbs_estimate(diffs->a_dx.segment(off, len), diffs->dy_tilde.segment(off, len),
                                  diffs->b_dz.segment(off, len), diffs->dy.segment(off, len),
                                  cfg.bbs_safeguard_threshold);
    if (est) rho[j] = keep_positive(*est);
  }
  return PenaltyVector(std::move(rho), lay);
}

PenaltyVector bbs_single_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg) {
  if (!acts_at(k, cfg)) return pv;
  const double current = grouped_penalty(pv);
  const auto diffs = lagged_diffs(k, ctx, cfg);
  if (!diffs) return broadcast(current, pv);
  const auto est = bbs_estimate(diffs->a_dx, diffs->dy_tilde, diffs->b_dz, diffs->dy, cfg.bbs_safeguard_threshold);
  return broadcast(est ? *est : current, pv);
}

PenaltyVector rb_update(long k, const RuleContext& ctx, const PenaltyVector& pv, const RuleConfig& cfg) {
  if (!acts_at(k, cfg) || !ctx.has_lag(1)) return pv;
  const auto& problem = ctx.problem();
  const Snapshot& now = ctx.at_lag(0);
  const double rho = grouped_penalty(pv);
  const double primal = problem.residual(now.x, now.z).norm();
  const double dual = rho * problem.stacked_a_adjoint(b_delta(ctx, 0, 1)).norm();
  double next = rho;
  if (primal > cfg.rb_mu * dual) {
    next = cfg.rb_tau * rho;
  } else if (dual > cfg.rb_mu * primal) {
    next = rho / cfg.rb_tau;
  }
  return broadcast(next, pv);
}

namespace {

using UpdateFn = PenaltyVector (*)(long, const RuleContext&, const PenaltyVector&, const RuleConfig&);

class FunctionRule final : public PenaltyRule {
 public:
  FunctionRule(std::string name, UpdateFn fn, const RuleConfig& cfg)
      : PenaltyRule(cfg), name_(std::move(name)), fn_(fn) {}

  std::string_view name() const override { return name_; }
  PenaltyVector update(long k, const RuleContext& ctx, const PenaltyVector& pv) const override {
    return fn_(k, ctx, pv, config());
  }

 private:
  std::string name_;
  UpdateFn fn_;
};

}  // namespace

const std::vector<std::string>& rule_names() {
  static const std::vector<std::string> names{"fixed", "rb", "bbs", "mpbbs", "sra", "mpsra"};
  return names;
}

bool is_multiparameter_rule(std::string_view name) { return name == "mpsra" || name == "mpbbs"; }

std::unique_ptr<PenaltyRule> make_rule(std::string_view name, const RuleConfig& cfg) {
  UpdateFn fn = nullptr;
  if (name == "fixed") fn = fixed_rule;
  else if (name == "rb") fn = rb_update;
  else if (name == "bbs") fn = bbs_single_update;
  else if (name == "mpbbs") fn = mpbbs_update;
  else if (name == "sra") fn = sra_single_update;
  else if (name == "mpsra") fn = mpsra_update;
  if (!fn) {
    std::string valid;
    for (const auto& n : rule_names()) valid += (valid.empty() ? "" : "|") + n;
    throw StructuralError("unknown rule '" + std::string(name) + "' (valid: " + valid + ")");
  }
  return std::make_unique<FunctionRule>(std::string(name), fn, cfg);
}

}  // namespace madmm
