#include "ope/schedules.hpp"

#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "ope/outcome_models.hpp"
#include "ope/types.hpp"

namespace {

// Dataset with uniform logging over K arms; contexts and rewards supplied.
ope::LoggedDataset uniform_logged(int K, std::vector<std::vector<double>> contexts,
                                  std::vector<int> arms,
                                  std::vector<double> rewards) {
  const auto n = static_cast<std::int64_t>(arms.size());
  auto policy = std::make_shared<ope::UniformPolicy>(K);
  std::vector<ope::Observation> obs;
  std::vector<double> logged;
  std::vector<ope::PolicySnapshot> snaps;
  const int dim = static_cast<int>(contexts[0].size());
  for (std::int64_t t = 1; t <= n; ++t) {
    obs.push_back({t, contexts[static_cast<std::size_t>(t - 1)],
                   arms[static_cast<std::size_t>(t - 1)],
                   rewards[static_cast<std::size_t>(t - 1)]});
    logged.push_back(1.0 / K);
    snaps.push_back({policy, t, 1.0 / K});
  }
  return ope::LoggedDataset(K, dim, std::move(obs), std::move(logged),
                            std::move(snaps));
}

ope::TrainingSchedule tree_schedule() {
  ope::TrainingSchedule s;
  s.engine = ope::TrainingSchedule::Engine::kTree;
  return s;
}

}  // namespace

TEST_CASE("sequential_snapshots with one round is the zero snapshot") {
  auto ds = uniform_logged(2, {{0.0}}, {1}, {5.0});
  ope::UniformTarget gstar(2);
  const auto snaps = ope::sequential_snapshots(ds, tree_schedule(), gstar);
  REQUIRE(snaps.size() == 1);
  const std::vector<double> x = {0.0};
  CHECK(snaps[0].predict(1, x) == 0.0);
  CHECK(snaps[0].fitted_on == 0);
}

TEST_CASE("sequential snapshots learn a constant reward stream") {
  const double c = 2.5;
  const int K = 2;
  std::vector<std::vector<double>> ctx;
  std::vector<int> arms;
  std::vector<double> rewards;
  for (int t = 1; t <= 8; ++t) {
    ctx.push_back({0.25 * t});
    arms.push_back(1 + (t % K));
    rewards.push_back(c);
  }
  auto ds = uniform_logged(K, ctx, arms, rewards);
  ope::UniformTarget gstar(K);
  const auto snaps = ope::sequential_snapshots(ds, tree_schedule(), gstar);
  REQUIRE(snaps.size() == 8);
  const std::vector<double> probe = {9.0};
  for (std::int64_t t = K + 2; t <= 8; ++t) {
    for (int a = 1; a <= K; ++a) {
      CHECK(snaps[static_cast<std::size_t>(t - 1)].predict(a, probe) ==
            doctest::Approx(c).epsilon(1e-12));
    }
  }
}

TEST_CASE("MRDR weight matches the direct formula") {
  auto ds = uniform_logged(2, {{0.0}, {1.0}}, {1, 2}, {1.0, 0.0});
  ope::TrainingSchedule s;
  s.weighting = ope::TrainingSchedule::Weighting::kMRDR;
  // g*(a|x) = 1 on the observed arm of round 1.
  ope::ArmTarget gstar(1, 2);
  // g_s = 0.5, so weight = 1 * 0.5 / 0.25 = 2.
  CHECK(ope::training_row_weight(s, gstar, ds, 1) == doctest::Approx(2.0));
  // Round 2 pulled arm 2: g* mass is 0 there, weight 0 (row dropped).
  CHECK(ope::training_row_weight(s, gstar, ds, 2) == doctest::Approx(0.0));
}

TEST_CASE("importance-sampled weight is ref over logged") {
  auto ds = uniform_logged(4, {{0.0}}, {3}, {1.0});
  ope::TrainingSchedule s;
  s.weighting = ope::TrainingSchedule::Weighting::kImportanceSampled;
  ope::ArmTarget gstar(3, 4);
  CHECK(ope::training_row_weight(s, gstar, ds, 1) == doctest::Approx(4.0));
  // Explicit reference wins over the estimand target.
  s.is_reference = std::make_shared<ope::UniformTarget>(4);
  CHECK(ope::training_row_weight(s, gstar, ds, 1) == doctest::Approx(1.0));
}

TEST_CASE("sequential snapshots are measurable in the data prefix") {
  const int K = 2;
  std::vector<std::vector<double>> ctx;
  std::vector<int> arms;
  std::vector<double> rewards;
  for (int t = 1; t <= 10; ++t) {
    ctx.push_back({0.3 * t, -0.1 * t});
    arms.push_back(1 + (t % K));
    rewards.push_back(0.1 * t * t);
  }
  auto base_rewards = rewards;
  const std::int64_t u = 6;
  auto bumped = rewards;
  bumped[static_cast<std::size_t>(u - 1)] += 10.0;

  auto ds_a = uniform_logged(K, ctx, arms, base_rewards);
  auto ds_b = uniform_logged(K, ctx, arms, bumped);
  ope::UniformTarget gstar(K);
  for (auto engine : {ope::TrainingSchedule::Engine::kLinear,
                      ope::TrainingSchedule::Engine::kTree}) {
    ope::TrainingSchedule s;
    s.engine = engine;
    const auto sa = ope::sequential_snapshots(ds_a, s, gstar);
    const auto sb = ope::sequential_snapshots(ds_b, s, gstar);
    const std::vector<double> probe = {1.0, 1.0};
    for (std::int64_t t = 1; t <= u; ++t) {
      for (int a = 1; a <= K; ++a) {
        CHECK(sa[static_cast<std::size_t>(t - 1)].predict(a, probe) ==
              sb[static_cast<std::size_t>(t - 1)].predict(a, probe));
      }
    }
    // And the perturbation is visible strictly after u, at least at the
    // perturbed round's own context and arm.
    const auto& bumped_ctx = ctx[static_cast<std::size_t>(u - 1)];
    const int bumped_arm = arms[static_cast<std::size_t>(u - 1)];
    bool differs = false;
    for (std::int64_t t = u + 1; t <= 10; ++t) {
      differs |= sa[static_cast<std::size_t>(t - 1)].predict(bumped_arm, bumped_ctx) !=
                 sb[static_cast<std::size_t>(t - 1)].predict(bumped_arm, bumped_ctx);
    }
    CHECK(differs);
  }
}

TEST_CASE("refit_every reuses models between refit rounds") {
  const int K = 1;
  std::vector<std::vector<double>> ctx;
  std::vector<int> arms;
  std::vector<double> rewards;
  for (int t = 1; t <= 9; ++t) {
    ctx.push_back({static_cast<double>(t)});
    arms.push_back(1);
    rewards.push_back(static_cast<double>(t));
  }
  auto ds = uniform_logged(K, ctx, arms, rewards);
  ope::UniformTarget gstar(K);
  ope::TrainingSchedule s = tree_schedule();
  s.refit_every = 3;
  const auto snaps = ope::sequential_snapshots(ds, s, gstar);
  // Refits at t = 1, 4, 7; identical models in between.
  CHECK(snaps[0].model == snaps[1].model);
  CHECK(snaps[1].model == snaps[2].model);
  CHECK(snaps[3].model == snaps[4].model);
  CHECK(snaps[4].model == snaps[5].model);
  CHECK(snaps[2].model != snaps[3].model);
  CHECK(snaps[5].model != snaps[6].model);
  // t = 4 trains on rounds 1..3.
  const std::vector<double> probe = {2.0};
  CHECK(snaps[3].fitted_on == 3);
}

TEST_CASE("crosstime fold exclusion follows the min(f+1, F) rule") {
  // Eight rounds, one arm, constant contexts; reward = fold index. A tree on
  // identical contexts predicts the mean of its training rewards, which
  // identifies exactly which folds trained each model.
  const int K = 1;
  std::vector<std::vector<double>> ctx(8, std::vector<double>{0.0});
  std::vector<int> arms(8, 1);
  std::vector<double> rewards = {1, 1, 2, 2, 3, 3, 4, 4};
  auto ds = uniform_logged(K, ctx, arms, rewards);
  ope::UniformTarget gstar(K);
  ope::TrainingSchedule s = tree_schedule();
  s.mode = ope::TrainingSchedule::Mode::kCrossTime;
  s.folds = 4;
  const auto snaps = ope::crosstime_snapshots(ds, s, gstar);
  REQUIRE(snaps.size() == 8);
  const std::vector<double> probe = {0.0};
  // Fold 1 (rounds 1-2): trained on folds {3,4} -> mean 3.5.
  CHECK(snaps[0].predict(1, probe) == doctest::Approx(3.5));
  CHECK(snaps[1].predict(1, probe) == doctest::Approx(3.5));
  // Fold 2 (rounds 3-4): trained on folds {1,4} -> mean 2.5.
  CHECK(snaps[2].predict(1, probe) == doctest::Approx(2.5));
  // Fold 3 (rounds 5-6): trained on folds {1,2} -> mean 1.5.
  CHECK(snaps[4].predict(1, probe) == doctest::Approx(1.5));
  // Fold 4 (rounds 7-8): excludes only itself -> folds {1,2,3}, mean 2.
  CHECK(snaps[6].predict(1, probe) == doctest::Approx(2.0));
  CHECK(snaps[7].predict(1, probe) == doctest::Approx(2.0));
}

TEST_CASE("crosstime with two folds leaves fold 1 untrained") {
  const int K = 1;
  std::vector<std::vector<double>> ctx(4, std::vector<double>{0.0});
  std::vector<int> arms(4, 1);
  std::vector<double> rewards = {1, 1, 9, 9};
  auto ds = uniform_logged(K, ctx, arms, rewards);
  ope::UniformTarget gstar(K);
  ope::TrainingSchedule s = tree_schedule();
  s.mode = ope::TrainingSchedule::Mode::kCrossTime;
  s.folds = 2;
  const auto snaps = ope::crosstime_snapshots(ds, s, gstar);
  const std::vector<double> probe = {0.0};
  // Fold 1 excludes folds {1, 2}: empty training -> zero prediction.
  CHECK(snaps[0].predict(1, probe) == 0.0);
  CHECK(snaps[0].fitted_on == 0);
  // Fold 2 excludes fold 2 only: trained on fold 1.
  CHECK(snaps[2].predict(1, probe) == doctest::Approx(1.0));
  CHECK(snaps[3].predict(1, probe) == doctest::Approx(1.0));
}

TEST_CASE("crosstime rejects more folds than rounds") {
  auto ds = uniform_logged(1, {{0.0}, {0.0}, {0.0}}, {1, 1, 1}, {1, 1, 1});
  ope::UniformTarget gstar(1);
  ope::TrainingSchedule s = tree_schedule();
  s.mode = ope::TrainingSchedule::Mode::kCrossTime;
  s.folds = 4;
  CHECK_THROWS(ope::crosstime_snapshots(ds, s, gstar));
}

TEST_CASE("crosstime constant rewards predict the constant everywhere") {
  const double c = 0.125;
  const int K = 2;
  std::vector<std::vector<double>> ctx;
  std::vector<int> arms;
  for (int t = 1; t <= 40; ++t) {
    ctx.push_back({0.1 * t});
    arms.push_back(1 + (t % K));
  }
  std::vector<double> rewards(40, c);
  auto ds = uniform_logged(K, ctx, arms, rewards);
  ope::UniformTarget gstar(K);
  for (auto engine : {ope::TrainingSchedule::Engine::kLinear,
                      ope::TrainingSchedule::Engine::kTree}) {
    ope::TrainingSchedule s;
    s.engine = engine;
    s.mode = ope::TrainingSchedule::Mode::kCrossTime;
    s.folds = 4;
    const auto snaps = ope::crosstime_snapshots(ds, s, gstar);
    const std::vector<double> probe = {1.7};
    for (const auto& snap : snaps) {
      REQUIRE(snap.fitted_on > 0);
      for (int a = 1; a <= K; ++a) {
        CHECK(snap.predict(a, probe) == doctest::Approx(c).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("zero-mass rows are dropped from weighted training") {
  // Arm-1 target: IS weighting keeps only arm-1 rows. Arm-1 rewards are all
  // 4; arm-2 rewards all -4. The fitted model must never see the -4s.
  const int K = 2;
  std::vector<std::vector<double>> ctx;
  std::vector<int> arms;
  std::vector<double> rewards;
  for (int t = 1; t <= 9; ++t) {
    ctx.push_back({0.5 * t});
    arms.push_back(1 + (t % 2));  // alternates 2,1,2,...
    rewards.push_back(arms.back() == 1 ? 4.0 : -4.0);
  }
  auto ds = uniform_logged(K, ctx, arms, rewards);
  ope::ArmTarget gstar(1, K);
  ope::TrainingSchedule s = tree_schedule();
  s.weighting = ope::TrainingSchedule::Weighting::kImportanceSampled;
  const auto snaps = ope::sequential_snapshots(ds, s, gstar);
  const std::vector<double> probe = {2.25};
  const auto& last = snaps.back();
  CHECK(last.predict(1, probe) == doctest::Approx(4.0));
  // Arm 2 never enters training: fallback is the mean of kept rewards.
  CHECK(last.predict(2, probe) == doctest::Approx(4.0));
  // fitted_on counts only kept rows (arm-1 rows among rounds 1..8).
  CHECK(last.fitted_on == 4);
}

TEST_CASE("schedule_snapshots dispatches on mode") {
  auto ds = uniform_logged(1, {{0.0}, {1.0}, {2.0}, {3.0}}, {1, 1, 1, 1},
                           {1, 2, 3, 4});
  ope::UniformTarget gstar(1);
  ope::TrainingSchedule seq = tree_schedule();
  ope::TrainingSchedule cross = tree_schedule();
  cross.mode = ope::TrainingSchedule::Mode::kCrossTime;
  cross.folds = 2;
  CHECK(ope::schedule_snapshots(ds, seq, gstar).size() == 4);
  CHECK(ope::schedule_snapshots(ds, cross, gstar).size() == 4);
}
