#include "ope/types.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace {

// Three rounds, two arms, uniform logging, one context coordinate.
ope::LoggedDataset small_dataset() {
  auto uniform = std::make_shared<ope::UniformPolicy>(2);
  std::vector<ope::Observation> obs = {
      {1, {0.5}, 1, 1.0},
      {2, {-0.25}, 2, 0.0},
      {3, {1.5}, 1, 2.0},
  };
  std::vector<double> logged = {0.5, 0.5, 0.5};
  std::vector<ope::PolicySnapshot> snaps = {
      {uniform, 1, 0.5}, {uniform, 2, 0.5}, {uniform, 3, 0.5}};
  return ope::LoggedDataset(2, 1, std::move(obs), std::move(logged),
                            std::move(snaps));
}

bool has_rule(const std::vector<ope::Violation>& v, const std::string& rule,
              std::int64_t round) {
  for (const auto& x : v) {
    if (x.rule == rule && x.round == round) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("validate_dataset accepts a well-formed dataset") {
  CHECK(ope::validate_dataset(small_dataset()).empty());
}

TEST_CASE("validate_dataset flags a zero logged propensity") {
  auto uniform = std::make_shared<ope::UniformPolicy>(2);
  std::vector<ope::Observation> obs = {
      {1, {0.0}, 1, 1.0}, {2, {0.0}, 2, 0.0}, {3, {0.0}, 1, 2.0}};
  std::vector<double> logged = {0.5, 0.0, 0.5};
  std::vector<ope::PolicySnapshot> snaps = {
      {uniform, 1, 0.5}, {uniform, 2, 0.5}, {uniform, 3, 0.5}};
  ope::LoggedDataset ds(2, 1, std::move(obs), std::move(logged), std::move(snaps));
  const auto v = ope::validate_dataset(ds);
  CHECK(has_rule(v, "positive-propensity", 2));
}

TEST_CASE("validate_dataset flags an out-of-range arm") {
  auto uniform = std::make_shared<ope::UniformPolicy>(3);
  std::vector<ope::Observation> obs = {
      {1, {0.0}, 1, 1.0}, {2, {0.0}, 4, 0.0}};
  std::vector<double> logged = {1.0 / 3, 1.0 / 3};
  std::vector<ope::PolicySnapshot> snaps = {{uniform, 1, 1.0 / 3},
                                            {uniform, 2, 1.0 / 3}};
  ope::LoggedDataset ds(3, 1, std::move(obs), std::move(logged), std::move(snaps));
  const auto v = ope::validate_dataset(ds);
  CHECK(has_rule(v, "arm-range", 2));
}

TEST_CASE("validate_dataset flags a non-finite reward") {
  auto uniform = std::make_shared<ope::UniformPolicy>(2);
  std::vector<ope::Observation> obs = {{1, {0.0}, 1, std::nan("")}};
  std::vector<double> logged = {0.5};
  std::vector<ope::PolicySnapshot> snaps = {{uniform, 1, 0.5}};
  ope::LoggedDataset ds(2, 1, std::move(obs), std::move(logged), std::move(snaps));
  CHECK(has_rule(ope::validate_dataset(ds), "finite-reward", 1));
}

TEST_CASE("validate_dataset flags snapshot/logged disagreement") {
  auto uniform = std::make_shared<ope::UniformPolicy>(2);
  std::vector<ope::Observation> obs = {{1, {0.0}, 1, 0.5}};
  std::vector<double> logged = {0.25};
  std::vector<ope::PolicySnapshot> snaps = {{uniform, 1, 0.5}};
  ope::LoggedDataset ds(2, 1, std::move(obs), std::move(logged), std::move(snaps));
  CHECK(has_rule(ope::validate_dataset(ds), "logged-mismatch", 1));
}

TEST_CASE("cross matrix round-trips and reports missing entries") {
  ope::CrossPropensityMatrix m(3);
  CHECK_FALSE(m.complete());
  CHECK(m.first_missing() == std::pair<std::int64_t, std::int64_t>{1, 1});
  int filled = 0;
  for (std::int64_t t = 1; t <= 3; ++t) {
    for (std::int64_t s = 1; s <= t; ++s) {
      m.set(t, s, 0.1 * static_cast<double>(10 * t + s));
      ++filled;
    }
  }
  CHECK(filled == 6);
  CHECK(m.complete());
  CHECK(m.at(3, 2) == doctest::Approx(3.2).epsilon(1e-15));
  CHECK(m.at(1, 1) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK_THROWS(m.at(2, 3));
  CHECK_THROWS(m.at(4, 1));
}

TEST_CASE("materialized dataset reproduces snapshot propensities") {
  const auto ds = small_dataset();
  const auto mat = ds.materialized();
  CHECK_FALSE(mat.has_snapshots());
  for (std::int64_t t = 1; t <= 3; ++t) {
    for (std::int64_t s = 1; s <= t; ++s) {
      CHECK(mat.cross_propensity(t, s) == ds.cross_propensity(t, s));
    }
    CHECK(mat.logged_propensity(t) == ds.logged_propensity(t));
  }
  CHECK(ope::validate_dataset(mat).empty());
}

TEST_CASE("validate_dataset flags an incomplete cross matrix") {
  ope::CrossPropensityMatrix m(2);
  m.set(1, 1, 0.5);
  m.set(2, 2, 0.5);
  std::vector<ope::Observation> obs = {{1, {0.0}, 1, 0.0}, {2, {0.0}, 2, 1.0}};
  std::vector<double> logged = {0.5, 0.5};
  ope::LoggedDataset ds(2, 1, std::move(obs), std::move(logged), std::move(m));
  CHECK(has_rule(ope::validate_dataset(ds), "cross-missing", 2));
}

TEST_CASE("validate_dataset checks the cross-matrix diagonal") {
  ope::CrossPropensityMatrix m(2);
  m.set(1, 1, 0.5);
  m.set(2, 1, 0.5);
  m.set(2, 2, 0.4);
  std::vector<ope::Observation> obs = {{1, {0.0}, 1, 0.0}, {2, {0.0}, 2, 1.0}};
  std::vector<double> logged = {0.5, 0.5};
  ope::LoggedDataset ds(2, 1, std::move(obs), std::move(logged), std::move(m));
  CHECK(has_rule(ope::validate_dataset(ds), "cross-diagonal", 2));
}

TEST_CASE("target functionals expose weights and bounds") {
  ope::ArmTarget arm(2, 3);
  CHECK(arm.weight(2, {}) == 1.0);
  CHECK(arm.weight(1, {}) == 0.0);
  CHECK(arm.bound() == 1.0);
  CHECK(arm.kind() == ope::TargetFunctional::Kind::kPolicy);

  ope::UniformTarget uni(4);
  CHECK(uni.weight(3, {}) == doctest::Approx(0.25));

  ope::ContrastTarget con(2, 1, 3);
  CHECK(con.weight(2, {}) == 1.0);
  CHECK(con.weight(1, {}) == -1.0);
  CHECK(con.weight(3, {}) == 0.0);
  CHECK(con.kind() == ope::TargetFunctional::Kind::kContrast);

  ope::TabularTarget tab({0.2, 0.8}, ope::TargetFunctional::Kind::kPolicy);
  CHECK(tab.weight(1, {}) == doctest::Approx(0.2));
  CHECK(tab.weight(2, {}) == doctest::Approx(0.8));
  CHECK(tab.bound() == doctest::Approx(0.8));

  CHECK_THROWS(ope::ArmTarget(0, 3));
  CHECK_THROWS(ope::ArmTarget(4, 3));
  CHECK_THROWS(ope::ContrastTarget(1, 1, 3));
}

TEST_CASE("estimator kinds round-trip through names") {
  using ope::EstimatorKind;
  for (auto k : {EstimatorKind::kDM, EstimatorKind::kIPW, EstimatorKind::kDR,
                 EstimatorKind::kMRDR, EstimatorKind::kADR, EstimatorKind::kCADR,
                 EstimatorKind::kCAMRDR}) {
    CHECK(ope::estimator_kind_from_string(ope::to_string(k)) == k);
  }
  CHECK_THROWS(ope::estimator_kind_from_string("nope"));
}

TEST_CASE("EstimateReport serializes the pinned JSON schema") {
  ope::EstimateReport r;
  r.psi_hat = 0.5;
  r.scale = 1.25;
  r.ci_lo = 0.4;
  r.ci_hi = 0.6;
  r.alpha = 0.05;
  r.estimator = ope::EstimatorKind::kCADR;
  r.rounds = 100;
  r.diagnostics = {3, 0.01, 2.5, 11};
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["estimator"] == "cadr");
  CHECK(j["psi_hat"] == doctest::Approx(0.5));
  CHECK(j["scale"] == doctest::Approx(1.25));
  CHECK(j["ci_lo"] == doctest::Approx(0.4));
  CHECK(j["ci_hi"] == doctest::Approx(0.6));
  CHECK(j["alpha"] == doctest::Approx(0.05));
  CHECK(j["T"] == 100);
  CHECK(j["diagnostics"]["floor_hits"] == 3);
  CHECK(j["diagnostics"]["sigma_min"] == doctest::Approx(0.01));
  CHECK(j["diagnostics"]["sigma_max"] == doctest::Approx(2.5));
  CHECK(j["diagnostics"]["burn_in"] == 11);
}
