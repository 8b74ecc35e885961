#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ope/enumerable.hpp"
#include "ope/outcome_models.hpp"
#include "ope/schedules.hpp"
#include "ope/types.hpp"

namespace ope {

// One evaluation of the doubly robust score
//   D'(g, Qbar)(x, a, y) = (g*(a|x)/g(a|x)) (y - Qbar(a,x))
//                          + sum_a' Qbar(a',x) g*(a'|x).
struct GradientTerm {
  double value = 0.0;
  double is_part = 0.0;
  double dm_part = 0.0;
};

GradientTerm dprime(std::span<const double> x, int a, double y, double g_eval,
                    const TargetFunctional& gstar,
                    const OutcomeModelSnapshot& qbar);

// Conditional-standard-deviation estimates, one per round, and their
// harmonic-mean scale gamma_T = (T^{-1} sum sigma_t^{-1})^{-1}.
struct SigmaSeries {
  std::vector<double> sigma_hat;  // element t-1 is sigma_t
  std::int64_t floor_hits = 0;
  double gamma_T = 0.0;
};

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::kDR;
  double alpha = 0.05;
  double variance_floor = 1e-4;  // applied to sigma_t^2
  std::int64_t burn_in = -1;     // -1: max(10, K+1)
  TrainingSchedule training;
  // Precomputes every (ratio, dprime) pair of the sigma reduction into one
  // table before summing. Output is bit-identical to the lazy default; only
  // the memory profile changes (O(T^2) table vs O(T) cache).
  bool materialize_dprime = false;
};

std::int64_t effective_burn_in(const EstimatorConfig& cfg, int num_arms);

// sigma_t = 1 for t <= burn-in; otherwise the importance-weighted sample
// moments of D'(g_t, Qbar_{s-1})(O(s)) over s < t, floored at
// sqrt(variance_floor). Element s-1 of snapshots is Qbar_{s-1}.
SigmaSeries cadr_sigma_series(const LoggedDataset& ds,
                              std::span<const OutcomeModelSnapshot> snapshots,
                              const TargetFunctional& gstar,
                              const EstimatorConfig& cfg);

// Stabilized doubly robust estimate with its martingale CI:
//   psi = (gamma_T / T) sum_t sigma_t^{-1} D'_{t,t},
//   CI  = psi +/- z_{1-alpha/2} gamma_T / sqrt(T).
// kind CADR uses cfg.training as given; CAMRDR forces importance-sampled
// training weights with the estimand's target as reference. A non-empty
// `snapshots` (element t-1 = Qbar_{t-1}) skips the internal fitting pass;
// the caller vouches that it came from the schedule this kind implies.
EstimateReport cadr_estimate(const LoggedDataset& ds,
                             const TargetFunctional& gstar,
                             const EstimatorConfig& cfg,
                             std::span<const OutcomeModelSnapshot> snapshots = {});

// The unstabilized family: psi = sum w_t Dtilde_t / sum w_t with the plug-in
// CI. DM (w=1, omega=0), IPW (w=1, omega=g*/g, Qbar=0), DR (w=1,
// omega=g*/g), MRDR (DR with MRDR training weights), ADR (DR with
// w_t = g_t(A|X)^{-1/2}). A non-empty `snapshots` is used in place of the
// internal fitting pass for the model-dependent kinds; IPW always evaluates
// the zero model.
EstimateReport baseline_estimate(const LoggedDataset& ds,
                                 const TargetFunctional& gstar,
                                 const EstimatorConfig& cfg,
                                 std::span<const OutcomeModelSnapshot> snapshots = {});

// Dispatches to cadr_estimate or baseline_estimate by cfg.kind.
EstimateReport estimate(const LoggedDataset& ds, const TargetFunctional& gstar,
                        const EstimatorConfig& cfg,
                        std::span<const OutcomeModelSnapshot> snapshots = {});

// Exact mean of D'(g, qbar) under the environment's data distribution with
// logging policy g: the double-robustness oracle.
double true_dprime_mean(const EnumerableEnvironment& env, const Policy& g,
                        const TargetFunctional& gstar,
                        const OutcomeModelSnapshot& qbar);

// Exact variance of D'(g, qbar) under the same distribution.
double true_dprime_variance(const EnumerableEnvironment& env, const Policy& g,
                            const TargetFunctional& gstar,
                            const OutcomeModelSnapshot& qbar);

namespace detail {

// Per-round scalars every estimator consumes. Element t-1 describes round t
// under its own model snapshot Qbar_{t-1}:
//   resid    = Y(t) - Qbar_{t-1}(A(t), X(t))
//   dm       = sum_a Qbar_{t-1}(a, X(t)) g*(a|X(t))
//   gstar_at = g*(A(t)|X(t))
//   g_logged = g_t(A(t)|X(t))
struct RoundCache {
  std::vector<double> resid;
  std::vector<double> dm;
  std::vector<double> gstar_at;
  std::vector<double> g_logged;

  std::int64_t rounds() const { return static_cast<std::int64_t>(resid.size()); }
};

RoundCache build_round_cache(const LoggedDataset& ds,
                             const TargetFunctional& gstar,
                             const TrainingSchedule& schedule);
RoundCache build_round_cache(const LoggedDataset& ds,
                             const TargetFunctional& gstar,
                             std::span<const OutcomeModelSnapshot> snapshots);

SigmaSeries sigma_series_from_cache(const LoggedDataset& ds,
                                    const RoundCache& cache,
                                    const EstimatorConfig& cfg);

// Assembly from precomputed pieces; exposed so invariance properties
// (common rescaling of sigma or of the weights) can be asserted directly.
EstimateReport cadr_assemble(const RoundCache& cache,
                             std::span<const double> sigma,
                             std::int64_t floor_hits,
                             const EstimatorConfig& cfg);
EstimateReport baseline_assemble(const RoundCache& cache,
                                 std::span<const double> weights,
                                 std::span<const double> omega,
                                 const EstimatorConfig& cfg);

}  // namespace detail

}  // namespace ope
