#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "pointdep/datagen.hpp"
#include "pointdep/error.hpp"
#include "pointdep/estimators.hpp"
#include "pointdep/rng.hpp"

using namespace pointdep;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 2.0) {
  auto rng = make_rng(seed, "estimator-test");
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST(Table, MatchesLearningInferencePairs) {
  struct Row {
    const char* name;
    ObjectiveKind learning;
    InferenceRule inference;
  };
  const Row expected[] = {
      {"cpc", ObjectiveKind::CPC, InferenceRule::CpcBound},
      {"nwj", ObjectiveKind::NWJ, InferenceRule::NwjBound},
      {"js", ObjectiveKind::JS, InferenceRule::NwjBound},
      {"dv", ObjectiveKind::DV, InferenceRule::DvBound},
      {"smile", ObjectiveKind::SmileLearning, InferenceRule::DvClipped},
      {"vmib", ObjectiveKind::JS, InferenceRule::PluginPmi},
      {"pc", ObjectiveKind::PC, InferenceRule::PluginClassifier},
      {"dm1", ObjectiveKind::DM1, InferenceRule::PluginPmi},
      {"dm2", ObjectiveKind::DM2, InferenceRule::PluginPmi},
      {"drf", ObjectiveKind::DRF, InferenceRule::PluginPd},
  };
  ASSERT_EQ(estimator_table().size(), std::size(expected));
  for (const auto& row : expected) {
    const auto& spec = find_estimator(row.name);
    EXPECT_EQ(spec.learning, row.learning) << row.name;
    EXPECT_EQ(spec.inference, row.inference) << row.name;
  }
  EXPECT_EQ(canonical(find_estimator("smile").learning), ObjectiveKind::JS);
}

TEST(Table, UnknownNameListsValidSet) {
  try {
    find_estimator("mine");
    FAIL();
  } catch (const StructuralError& e) {
    const std::string msg = e.what();
    for (const auto& n : estimator_names()) EXPECT_NE(msg.find(n), std::string::npos) << n;
  }
}

TEST(PdFromClassifier, Examples) {
  EXPECT_DOUBLE_EQ(pd_from_classifier(0.5, 1.0), 1.0);
  EXPECT_NEAR(pd_from_classifier(0.8, 1.0), 4.0, 1e-12);
  EXPECT_DOUBLE_EQ(pd_from_classifier(0.5, 2.0), 2.0);
}

TEST(PdFromClassifier, ClampsEndpointsAndRejectsOutOfRange) {
  EXPECT_TRUE(std::isfinite(pd_from_classifier(1.0, 1.0)));
  EXPECT_GT(pd_from_classifier(0.0, 1.0), 0.0);
  EXPECT_NEAR(pd_from_classifier(0.0, 1.0), kProbabilityClamp / (1 - kProbabilityClamp), 1e-20);
  EXPECT_THROW(pd_from_classifier(1.5, 1.0), StructuralError);
  EXPECT_THROW(pd_from_classifier(-0.1, 1.0), StructuralError);
}

TEST(Plugin, Examples) {
  const std::vector<double> ones(6, 1.0), cs(6, -0.7);
  EXPECT_DOUBLE_EQ(mi_plugin_pd(ones), 0.0);
  EXPECT_DOUBLE_EQ(mi_plugin_pmi(cs), -0.7);
  DiscreteJoint j((Matrix(2, 2) << 0.4, 0.1, 0.1, 0.4).finished());
  auto flat = flatten_for_expectation(j, oracle_pd_table(j));
  EXPECT_NEAR(mi_plugin_pd(flat.joint_values, flat.joint_weights), 0.192745, 1e-6);
}

TEST(Plugin, EmptyBatchIsUsageError) {
  EXPECT_THROW(mi_plugin_pmi({}), UsageError);
  EXPECT_THROW(mi_plugin_pd({}), UsageError);
}

TEST(Plugin, PdFloorAppliesBeforeLog) {
  const std::vector<double> r{-3.0, 0.0};
  EXPECT_DOUBLE_EQ(mi_plugin_pd(r), std::log(kPdFloor));
}

TEST(Plugin, PdPathEqualsPmiPathUnderExp) {
  auto f = random_vector(50, 1);
  std::vector<double> r(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) r[i] = std::exp(f[i]);
  EXPECT_NEAR(mi_plugin_pd(r), mi_plugin_pmi(f), 1e-9);
}

TEST(NwjBound, MirrorsLoss) {
  const std::vector<double> one(4, 1.0), zero(4, 0.0);
  EXPECT_NEAR(mi_nwj_bound(one, one), 0.0, 1e-15);
  EXPECT_NEAR(mi_nwj_bound(zero, zero), -std::exp(-1.0), 1e-15);
  auto p = random_vector(9, 2), q = random_vector(11, 3);
  EXPECT_NEAR(mi_nwj_bound(p, q), -loss_value(ObjectiveSpec{ObjectiveKind::NWJ}, p, q), 1e-12);
}

TEST(DvBound, Examples) {
  const std::vector<double> c(5, 3.3);
  EXPECT_NEAR(mi_dv_bound(c, c), 0.0, 1e-12);
  auto p = random_vector(9, 4, 1.0), q = random_vector(11, 5, 1.0);
  EXPECT_DOUBLE_EQ(mi_dv_bound(p, q, 10.0), mi_dv_bound(p, q));
  EXPECT_NEAR(mi_dv_bound(p, q, std::numeric_limits<double>::infinity()), mi_dv_bound(p, q), 1e-12);
  EXPECT_THROW(mi_dv_bound(p, q, 0.0), StructuralError);
  EXPECT_THROW(mi_dv_bound(p, q, -1.0), StructuralError);
}

TEST(DvBound, ClipOnlyAffectsProductScores) {
  const std::vector<double> p{50.0, 50.0}, q{40.0, -40.0};
  const double clipped = mi_dv_bound(p, q, 10.0);
  EXPECT_NEAR(clipped, 50.0 - std::log(0.5 * (std::exp(10.0) + std::exp(-10.0))), 1e-9);
}

TEST(DvBound, OracleOptimumIsMI) {
  auto j = DiscreteJoint::random(4, 3, 8);
  Matrix f = oracle_pd_table(j).array().log().matrix();
  auto flat = flatten_for_expectation(j, f);
  EXPECT_NEAR(mi_dv_bound(flat.joint_values, flat.product_values, std::nullopt,
                          flat.joint_weights, flat.product_weights),
              oracle_mi(j), 1e-9);
}

TEST(CpcBound, NeverExceedsLogBatch) {
  auto rng = make_rng(6, "cpc-bound");
  std::normal_distribution<double> n(0.0, 20.0);
  for (int t = 0; t < 50; ++t) {
    Matrix s(8, 8);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = n(rng);
    EXPECT_LE(mi_cpc_bound(s), std::log(8.0) + 1e-12);
    EXPECT_NEAR(mi_cpc_bound(s), -cpc_loss_value(s), 1e-12);
  }
}

TEST(PointwisePmi, PerRule) {
  EXPECT_DOUBLE_EQ(pointwise_pmi(find_estimator("vmib"), 0.3), 0.3);
  EXPECT_NEAR(pointwise_pmi(find_estimator("pc"), 0.4), 0.4, 1e-12);  // ln(σ/(1-σ)) = l
  EXPECT_NEAR(pointwise_pmi(find_estimator("pc"), 0.4, 2.0), 0.4 + std::log(2.0), 1e-12);
  EXPECT_NEAR(pointwise_pmi(find_estimator("drf"), 2.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(pointwise_pmi(find_estimator("drf"), -1.0), std::log(kPdFloor));
  EXPECT_THROW(pointwise_pmi(find_estimator("nwj"), 0.0), StructuralError);
}

TEST(Infer, DispatchesByRule) {
  auto p = random_vector(16, 7, 1.0), q = random_vector(16, 8, 1.0);
  InferenceInput in{p, q};
  EXPECT_DOUBLE_EQ(infer(find_estimator("nwj"), in), mi_nwj_bound(p, q));
  EXPECT_DOUBLE_EQ(infer(find_estimator("dv"), in), mi_dv_bound(p, q));
  EXPECT_DOUBLE_EQ(infer(find_estimator("smile"), in), mi_dv_bound(p, q, kDefaultClip));
  EXPECT_DOUBLE_EQ(infer(find_estimator("vmib"), in), mi_plugin_pmi(p));
  // JS scores estimate the log-ratio; the NWJ bound wants 1 + log-ratio.
  auto ps = p, qs = q;
  for (auto& v : ps) v += 1.0;
  for (auto& v : qs) v += 1.0;
  EXPECT_DOUBLE_EQ(infer(find_estimator("js"), in), mi_nwj_bound(ps, qs));
  Matrix s = Matrix::Identity(4, 4) * 3.0;
  InferenceInput withm{p, q, &s};
  EXPECT_DOUBLE_EQ(infer(find_estimator("cpc"), withm), mi_cpc_bound(s));
  EXPECT_THROW(infer(find_estimator("cpc"), in), UsageError);
}
