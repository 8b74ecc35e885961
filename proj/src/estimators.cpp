#include "ope/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ope/stats.hpp"

namespace ope {

GradientTerm dprime(std::span<const double> x, int a, double y, double g_eval,
                    const TargetFunctional& gstar,
                    const OutcomeModelSnapshot& qbar) {
  if (!(g_eval > 0.0)) {
    throw std::invalid_argument("dprime: propensity must be positive");
  }
  GradientTerm term;
  term.is_part = gstar.weight(a, x) / g_eval * (y - qbar.predict(a, x));
  NeumaierSum dm;
  for (int ap = 1; ap <= gstar.num_arms(); ++ap) {
    dm.add(qbar.predict(ap, x) * gstar.weight(ap, x));
  }
  term.dm_part = dm.value();
  term.value = term.is_part + term.dm_part;
  return term;
}

std::int64_t effective_burn_in(const EstimatorConfig& cfg, int num_arms) {
  if (cfg.burn_in >= 0) return cfg.burn_in;
  return std::max<std::int64_t>(10, num_arms + 1);
}

namespace detail {

RoundCache build_round_cache(const LoggedDataset& ds,
                             const TargetFunctional& gstar,
                             const TrainingSchedule& schedule) {
  RoundCache cache;
  const std::int64_t n = ds.rounds();
  cache.resid.resize(static_cast<std::size_t>(n));
  cache.dm.resize(static_cast<std::size_t>(n));
  cache.gstar_at.resize(static_cast<std::size_t>(n));
  cache.g_logged.resize(static_cast<std::size_t>(n));
  for_each_snapshot(
      ds, schedule, gstar,
      [&](std::int64_t t, const OutcomeModelSnapshot& snap) {
        const Observation& o = ds.obs(t);
        const std::size_t i = static_cast<std::size_t>(t - 1);
        cache.resid[i] = o.reward - snap.predict(o.arm, o.context);
        NeumaierSum dm;
        for (int a = 1; a <= ds.num_arms(); ++a) {
          dm.add(snap.predict(a, o.context) * gstar.weight(a, o.context));
        }
        cache.dm[i] = dm.value();
        cache.gstar_at[i] = gstar.weight(o.arm, o.context);
        cache.g_logged[i] = ds.logged_propensity(t);
      });
  return cache;
}

RoundCache build_round_cache(const LoggedDataset& ds,
                             const TargetFunctional& gstar,
                             std::span<const OutcomeModelSnapshot> snapshots) {
  if (static_cast<std::int64_t>(snapshots.size()) != ds.rounds()) {
    throw std::invalid_argument("build_round_cache: snapshot count mismatch");
  }
  RoundCache cache;
  const std::int64_t n = ds.rounds();
  cache.resid.resize(static_cast<std::size_t>(n));
  cache.dm.resize(static_cast<std::size_t>(n));
  cache.gstar_at.resize(static_cast<std::size_t>(n));
  cache.g_logged.resize(static_cast<std::size_t>(n));
  for (std::int64_t t = 1; t <= n; ++t) {
    const Observation& o = ds.obs(t);
    const OutcomeModelSnapshot& snap = snapshots[static_cast<std::size_t>(t - 1)];
    const std::size_t i = static_cast<std::size_t>(t - 1);
    cache.resid[i] = o.reward - snap.predict(o.arm, o.context);
    NeumaierSum dm;
    for (int a = 1; a <= ds.num_arms(); ++a) {
      dm.add(snap.predict(a, o.context) * gstar.weight(a, o.context));
    }
    cache.dm[i] = dm.value();
    cache.gstar_at[i] = gstar.weight(o.arm, o.context);
    cache.g_logged[i] = ds.logged_propensity(t);
  }
  return cache;
}

SigmaSeries sigma_series_from_cache(const LoggedDataset& ds,
                                    const RoundCache& cache,
                                    const EstimatorConfig& cfg) {
  if (!(cfg.variance_floor > 0.0)) {
    throw std::invalid_argument("EstimatorConfig: variance_floor must be > 0");
  }
  const std::int64_t n = cache.rounds();
  // sigma_1 stays at the convention value even for burn_in = 0: its defining
  // sum over s < t is empty.
  const std::int64_t t0 = std::max<std::int64_t>(effective_burn_in(cfg, ds.num_arms()), 1);
  SigmaSeries series;
  series.sigma_hat.resize(static_cast<std::size_t>(n), 1.0);
  auto term = [&](std::int64_t t, std::int64_t s) {
    const std::size_t i = static_cast<std::size_t>(s - 1);
    const double gts = ds.cross_propensity(t, s);
    if (!(gts > 0.0)) {
      throw std::runtime_error("cadr_sigma_series: nonpositive propensity at (t=" +
                               std::to_string(t) + ", s=" + std::to_string(s) + ")");
    }
    const double r = gts / cache.g_logged[i];
    const double d = cache.gstar_at[i] / gts * cache.resid[i] + cache.dm[i];
    return std::pair<double, double>{r, d};
  };
  // Eager table of every (ratio, dprime) pair in reduction order; same
  // values and summation order as the inline path, different memory profile.
  std::vector<std::pair<double, double>> table;
  if (cfg.materialize_dprime && n > t0) {
    table.reserve(static_cast<std::size_t>((n - t0) * (n + t0 - 1) / 2));
    for (std::int64_t t = t0 + 1; t <= n; ++t) {
      for (std::int64_t s = 1; s < t; ++s) table.push_back(term(t, s));
    }
  }
  std::size_t cursor = 0;
  for (std::int64_t t = t0 + 1; t <= n; ++t) {
    NeumaierSum sum_rd2;
    NeumaierSum sum_rd;
    for (std::int64_t s = 1; s < t; ++s) {
      const auto [r, d] = cfg.materialize_dprime ? table[cursor++] : term(t, s);
      sum_rd2.add(r * d * d);
      sum_rd.add(r * d);
    }
    const double inv = 1.0 / static_cast<double>(t - 1);
    const double m2 = sum_rd2.value() * inv;
    const double m1 = sum_rd.value() * inv;
    double var = m2 - m1 * m1;
    if (var < cfg.variance_floor) {
      var = cfg.variance_floor;
      ++series.floor_hits;
    }
    series.sigma_hat[static_cast<std::size_t>(t - 1)] = std::sqrt(var);
  }
  NeumaierSum inv_sum;
  for (double s : series.sigma_hat) inv_sum.add(1.0 / s);
  series.gamma_T = static_cast<double>(n) / inv_sum.value();
  return series;
}

namespace {

Diagnostics sigma_diagnostics(const SigmaSeries& series, std::int64_t burn_in) {
  Diagnostics d;
  d.floor_hits = series.floor_hits;
  d.burn_in = burn_in;
  if (!series.sigma_hat.empty()) {
    const auto [lo, hi] =
        std::minmax_element(series.sigma_hat.begin(), series.sigma_hat.end());
    d.sigma_min = *lo;
    d.sigma_max = *hi;
  }
  return d;
}

}  // namespace

EstimateReport cadr_assemble(const RoundCache& cache,
                             std::span<const double> sigma,
                             std::int64_t floor_hits,
                             const EstimatorConfig& cfg) {
  const std::int64_t n = cache.rounds();
  if (static_cast<std::int64_t>(sigma.size()) != n) {
    throw std::invalid_argument("cadr_assemble: sigma length mismatch");
  }
  if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0)) {
    throw std::invalid_argument("EstimatorConfig: alpha must be in (0,1)");
  }
  NeumaierSum inv_sum;
  NeumaierSum weighted;
  for (std::int64_t t = 1; t <= n; ++t) {
    const std::size_t i = static_cast<std::size_t>(t - 1);
    if (!(cache.g_logged[i] > 0.0)) {
      throw std::invalid_argument("cadr: nonpositive logged propensity at round " +
                                  std::to_string(t));
    }
    const double d_tt =
        cache.gstar_at[i] / cache.g_logged[i] * cache.resid[i] + cache.dm[i];
    inv_sum.add(1.0 / sigma[i]);
    weighted.add(d_tt / sigma[i]);
  }
  const double gamma = static_cast<double>(n) / inv_sum.value();
  const double psi = gamma * (weighted.value() / static_cast<double>(n));
  const double z = normal_quantile(1.0 - cfg.alpha / 2.0);
  const double half = z * gamma / std::sqrt(static_cast<double>(n));

  EstimateReport report;
  report.psi_hat = psi;
  report.scale = gamma;
  report.ci_lo = psi - half;
  report.ci_hi = psi + half;
  report.alpha = cfg.alpha;
  report.estimator = cfg.kind;
  report.rounds = n;
  report.diagnostics.floor_hits = floor_hits;
  if (!sigma.empty()) {
    const auto [lo, hi] = std::minmax_element(sigma.begin(), sigma.end());
    report.diagnostics.sigma_min = *lo;
    report.diagnostics.sigma_max = *hi;
  }
  return report;
}

EstimateReport baseline_assemble(const RoundCache& cache,
                                 std::span<const double> weights,
                                 std::span<const double> omega,
                                 const EstimatorConfig& cfg) {
  const std::int64_t n = cache.rounds();
  if (static_cast<std::int64_t>(weights.size()) != n ||
      static_cast<std::int64_t>(omega.size()) != n) {
    throw std::invalid_argument("baseline_assemble: length mismatch");
  }
  if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0)) {
    throw std::invalid_argument("EstimatorConfig: alpha must be in (0,1)");
  }
  NeumaierSum w_sum;
  NeumaierSum wd_sum;
  for (std::int64_t t = 1; t <= n; ++t) {
    const std::size_t i = static_cast<std::size_t>(t - 1);
    const double dtilde = omega[i] * cache.resid[i] + cache.dm[i];
    w_sum.add(weights[i]);
    wd_sum.add(weights[i] * dtilde);
  }
  const double psi = wd_sum.value() / w_sum.value();
  NeumaierSum var_sum;
  for (std::int64_t t = 1; t <= n; ++t) {
    const std::size_t i = static_cast<std::size_t>(t - 1);
    const double dtilde = omega[i] * cache.resid[i] + cache.dm[i];
    const double dev = dtilde - psi;
    var_sum.add(weights[i] * weights[i] * dev * dev);
  }
  const double se = std::sqrt(var_sum.value()) / w_sum.value();
  const double z = normal_quantile(1.0 - cfg.alpha / 2.0);

  EstimateReport report;
  report.psi_hat = psi;
  report.scale = se * std::sqrt(static_cast<double>(n));
  report.ci_lo = psi - z * se;
  report.ci_hi = psi + z * se;
  report.alpha = cfg.alpha;
  report.estimator = cfg.kind;
  report.rounds = n;
  report.diagnostics.burn_in = 0;
  return report;
}

}  // namespace detail

namespace {

// The weighting a kind imposes on its outcome-model training data.
TrainingSchedule effective_schedule(const EstimatorConfig& cfg) {
  TrainingSchedule schedule = cfg.training;
  if (cfg.kind == EstimatorKind::kMRDR) {
    schedule.weighting = TrainingSchedule::Weighting::kMRDR;
  } else if (cfg.kind == EstimatorKind::kCAMRDR) {
    schedule.weighting = TrainingSchedule::Weighting::kImportanceSampled;
    schedule.is_reference = nullptr;  // the estimand's target
  }
  return schedule;
}

}  // namespace

SigmaSeries cadr_sigma_series(const LoggedDataset& ds,
                              std::span<const OutcomeModelSnapshot> snapshots,
                              const TargetFunctional& gstar,
                              const EstimatorConfig& cfg) {
  const detail::RoundCache cache = detail::build_round_cache(ds, gstar, snapshots);
  return detail::sigma_series_from_cache(ds, cache, cfg);
}

EstimateReport cadr_estimate(const LoggedDataset& ds,
                             const TargetFunctional& gstar,
                             const EstimatorConfig& cfg,
                             std::span<const OutcomeModelSnapshot> snapshots) {
  if (cfg.kind != EstimatorKind::kCADR && cfg.kind != EstimatorKind::kCAMRDR) {
    throw std::invalid_argument("cadr_estimate: kind must be CADR or CAMRDR");
  }
  const detail::RoundCache cache =
      snapshots.empty()
          ? detail::build_round_cache(ds, gstar, effective_schedule(cfg))
          : detail::build_round_cache(ds, gstar, snapshots);
  const SigmaSeries series = detail::sigma_series_from_cache(ds, cache, cfg);
  EstimateReport report = detail::cadr_assemble(cache, series.sigma_hat,
                                                series.floor_hits, cfg);
  report.diagnostics.burn_in = effective_burn_in(cfg, ds.num_arms());
  return report;
}

EstimateReport baseline_estimate(const LoggedDataset& ds,
                                 const TargetFunctional& gstar,
                                 const EstimatorConfig& cfg,
                                 std::span<const OutcomeModelSnapshot> snapshots) {
  const std::int64_t n = ds.rounds();
  for (std::int64_t t = 1; t <= n; ++t) {
    if (!(ds.logged_propensity(t) > 0.0)) {
      throw std::invalid_argument("baseline_estimate: nonpositive propensity at round " +
                                  std::to_string(t));
    }
  }

  detail::RoundCache cache;
  switch (cfg.kind) {
    case EstimatorKind::kIPW: {
      // Qbar identically zero.
      std::vector<OutcomeModelSnapshot> zeros(static_cast<std::size_t>(n),
                                              zero_snapshot());
      cache = detail::build_round_cache(ds, gstar, zeros);
      break;
    }
    case EstimatorKind::kDM:
    case EstimatorKind::kDR:
    case EstimatorKind::kMRDR:
    case EstimatorKind::kADR:
      cache = snapshots.empty()
                  ? detail::build_round_cache(ds, gstar, effective_schedule(cfg))
                  : detail::build_round_cache(ds, gstar, snapshots);
      break;
    default:
      throw std::invalid_argument(
          "baseline_estimate: kind must be DM, IPW, DR, MRDR, or ADR");
  }

  std::vector<double> weights(static_cast<std::size_t>(n), 1.0);
  std::vector<double> omega(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t t = 1; t <= n; ++t) {
    const std::size_t i = static_cast<std::size_t>(t - 1);
    switch (cfg.kind) {
      case EstimatorKind::kDM:
        break;
      case EstimatorKind::kIPW:
      case EstimatorKind::kDR:
      case EstimatorKind::kMRDR:
        omega[i] = cache.gstar_at[i] / cache.g_logged[i];
        break;
      case EstimatorKind::kADR:
        omega[i] = cache.gstar_at[i] / cache.g_logged[i];
        weights[i] = 1.0 / std::sqrt(cache.g_logged[i]);
        break;
      default:
        break;
    }
  }
  return detail::baseline_assemble(cache, weights, omega, cfg);
}

EstimateReport estimate(const LoggedDataset& ds, const TargetFunctional& gstar,
                        const EstimatorConfig& cfg,
                        std::span<const OutcomeModelSnapshot> snapshots) {
  if (cfg.kind == EstimatorKind::kCADR || cfg.kind == EstimatorKind::kCAMRDR) {
    return cadr_estimate(ds, gstar, cfg, snapshots);
  }
  return baseline_estimate(ds, gstar, cfg, snapshots);
}

double true_dprime_mean(const EnumerableEnvironment& env, const Policy& g,
                        const TargetFunctional& gstar,
                        const OutcomeModelSnapshot& qbar) {
  env.validate();
  NeumaierSum total;
  for (int c = 0; c < env.num_contexts(); ++c) {
    const auto& x = env.contexts[static_cast<std::size_t>(c)];
    const double px = env.context_probs[static_cast<std::size_t>(c)];
    for (int a = 1; a <= env.num_arms(); ++a) {
      const double ga = g.propensity(a, x);
      if (!(ga > 0.0)) {
        throw std::invalid_argument("true_dprime_mean: logging policy lacks full support");
      }
      const auto& dist =
          env.atoms[static_cast<std::size_t>(c)][static_cast<std::size_t>(a - 1)];
      for (const RewardAtom& atom : dist) {
        const GradientTerm term = dprime(x, a, atom.value, ga, gstar, qbar);
        total.add(px * ga * atom.prob * term.value);
      }
    }
  }
  return total.value();
}

double true_dprime_variance(const EnumerableEnvironment& env, const Policy& g,
                            const TargetFunctional& gstar,
                            const OutcomeModelSnapshot& qbar) {
  const double mean = true_dprime_mean(env, g, gstar, qbar);
  NeumaierSum total;
  for (int c = 0; c < env.num_contexts(); ++c) {
    const auto& x = env.contexts[static_cast<std::size_t>(c)];
    const double px = env.context_probs[static_cast<std::size_t>(c)];
    for (int a = 1; a <= env.num_arms(); ++a) {
      const double ga = g.propensity(a, x);
      const auto& dist =
          env.atoms[static_cast<std::size_t>(c)][static_cast<std::size_t>(a - 1)];
      for (const RewardAtom& atom : dist) {
        const GradientTerm term = dprime(x, a, atom.value, ga, gstar, qbar);
        const double dev = term.value - mean;
        total.add(px * ga * atom.prob * dev * dev);
      }
    }
  }
  return total.value();
}

}  // namespace ope
