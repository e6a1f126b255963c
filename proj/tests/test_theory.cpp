#include <gtest/gtest.h>

#include <array>
#include <string>

#include "pgr/theory.hpp"
#include "pgr/verify.hpp"

using namespace pgr;
using namespace pgr::theory;

namespace {

constexpr std::array<FidelityMode, 3> kModes{FidelityMode::LS, FidelityMode::BP, FidelityMode::WLS};

/// Bias^2 and variance straight from the estimator's linear map.
BiasVariance direct_bias_variance(const TikhonovProblem& p, FidelityMode mode) {
  const MatrixXd M = TikhonovEstimator(p, mode).map();
  const VectorXd b = M * p.A * p.x_star - p.x_star;
  return {b.squaredNorm(), p.sigma_e * p.sigma_e * (M * M.transpose()).trace()};
}

TikhonovProblem small_problem(RandomStream& rng) {
  TikhonovProblem p;
  p.A = MatrixXd::NullaryExpr(4, 6, [&]() { return rng.normal(); });
  p.D = MatrixXd::NullaryExpr(5, 6, [&]() { return rng.normal(); });
  p.beta = 0.3;
  p.sigma_e = 0.1;
  p.x_star = VectorXd::NullaryExpr(6, [&]() { return rng.normal(); });
  p.delta = 0.4;
  p.eta = 0.05;
  p.c = 1.5;
  return p;
}

}  // namespace

TEST(Tikhonov, StrongPriorShrinksToZero) {
  RandomStream rng(1);
  TikhonovProblem p = small_problem(rng);
  p.D = MatrixXd::Identity(6, 6);
  p.beta = 1e8;
  const VectorXd y = VectorXd::Ones(4);
  for (FidelityMode mode : kModes) EXPECT_LT(tikhonov_estimate(p, mode, y).norm(), 1e-6);
}

TEST(Tikhonov, IdentityOperatorShrinksByOnePlusBeta) {
  TikhonovProblem p;
  p.A = MatrixXd::Identity(3, 3);
  p.D = MatrixXd::Identity(3, 3);
  p.beta = 0.25;
  p.x_star = VectorXd::Zero(3);
  const VectorXd y = VectorXd::LinSpaced(3, -1.0, 2.0);
  EXPECT_LT((tikhonov_estimate(p, FidelityMode::LS, y) - y / 1.25).norm(), 1e-14);
}

TEST(Tikhonov, MatchesGradientDescentMinimizer) {
  RandomStream rng(2);
  const TikhonovProblem p = small_problem(rng);
  const VectorXd y = VectorXd::NullaryExpr(4, [&]() { return rng.normal(); });
  for (FidelityMode mode : kModes) {
    const MatrixXd W = data_weight(p, mode);
    const MatrixXd H = p.A.transpose() * W * p.A + p.beta * p.D.transpose() * p.D;
    const double step = 1.0 / Eigen::SelfAdjointEigenSolver<MatrixXd>(H).eigenvalues().maxCoeff();
    VectorXd x = VectorXd::Zero(6);
    for (int k = 0; k < 200000; ++k) {
      const VectorXd g = H * x - p.A.transpose() * W * y;
      if (g.norm() < 1e-13) break;
      x -= step * g;
    }
    const VectorXd closed = tikhonov_estimate(p, mode, y);
    EXPECT_LT((x - closed).norm(), 1e-6) << to_string(mode);
    EXPECT_LT(stationarity_residual(p, mode, closed, y), 1e-10) << to_string(mode);
  }
}

TEST(Tikhonov, ValidationErrors) {
  RandomStream rng(3);
  TikhonovProblem p = small_problem(rng);
  p.beta = 0.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = small_problem(rng);
  p.delta = 1.5;
  EXPECT_THROW(p.validate(), ValidationError);
  p = small_problem(rng);
  p.x_star = VectorXd::Zero(3);
  EXPECT_THROW(p.validate(), DimensionError);
}

TEST(ClosedForm, MatchesLinearMapOnConformingInstances) {
  RandomStream rng(4);
  for (int i = 0; i < 20; ++i) {
    const TikhonovProblem p = make_conforming_problem(5, 8, 0.3, rng);
    for (FidelityMode mode : kModes) {
      const BiasVariance cf = bias_variance_closed_form(p, mode);
      const BiasVariance direct = direct_bias_variance(p, mode);
      EXPECT_NEAR(cf.bias2, direct.bias2, 1e-10 * std::max(1.0, direct.bias2)) << to_string(mode);
      EXPECT_NEAR(cf.variance, direct.variance, 1e-10 * std::max(1.0, direct.variance)) << to_string(mode);
    }
  }
}

TEST(ClosedForm, ZeroNoiseHasZeroVariance) {
  RandomStream rng(5);
  TikhonovProblem p = make_conforming_problem(3, 4, 0.5, rng);
  p.sigma_e = 0.0;
  for (FidelityMode mode : kModes) EXPECT_EQ(bias_variance_closed_form(p, mode).variance, 0.0);
}

TEST(ClosedForm, EqualSingularValuesMakeModesCoincide) {
  RandomStream rng(6);
  TikhonovProblem p;
  MatrixXd V;
  p.A = matrix_with_singular_values(VectorXd::Ones(3), 5, rng, &V);
  p.D = V * VectorXd::LinSpaced(5, 0.5, 2.0).asDiagonal() * V.transpose();
  p.beta = 0.4;
  p.sigma_e = 0.2;
  p.x_star = VectorXd::NullaryExpr(5, [&]() { return rng.normal(); });
  p.delta = 0.3;
  const BiasVariance ls = bias_variance_closed_form(p, FidelityMode::LS);
  for (FidelityMode mode : {FidelityMode::BP, FidelityMode::WLS}) {
    const BiasVariance other = bias_variance_closed_form(p, mode);
    EXPECT_NEAR(other.bias2, ls.bias2, 1e-12);
    EXPECT_NEAR(other.variance, ls.variance, 1e-12);
  }
  EXPECT_THROW(verify_theorem1(p), ValidationError);
}

TEST(ClosedForm, WlsApproachesLsAsDeltaApproachesOne) {
  RandomStream rng(7);
  TikhonovProblem p = make_conforming_problem(4, 6, 1.0 - 1e-9, rng);
  const BiasVariance wls = bias_variance_closed_form(p, FidelityMode::WLS);
  const BiasVariance ls = bias_variance_closed_form(p, FidelityMode::LS);
  EXPECT_NEAR(wls.bias2, ls.bias2, 1e-6 * std::max(1.0, ls.bias2));
  EXPECT_NEAR(wls.variance, ls.variance, 1e-6 * std::max(1.0, ls.variance));
}

TEST(ClosedForm, NonCommutingPriorRejected) {
  RandomStream rng(8);
  const TikhonovProblem p = small_problem(rng);
  EXPECT_THROW(bias_variance_closed_form(p, FidelityMode::LS), ValidationError);
}

TEST(MonteCarlo, AgreesWithClosedForm) {
  RandomStream rng(9);
  const TikhonovProblem p = make_conforming_problem(4, 6, 0.5, rng);
  for (FidelityMode mode : kModes) {
    RandomStream draws = rng.split(to_string(mode));
    const MonteCarloEstimate mc = monte_carlo_bias_variance(p, mode, 40000, draws);
    const BiasVariance cf = bias_variance_closed_form(p, mode);
    EXPECT_NEAR(mc.variance, cf.variance, 5.0 * mc.se_variance) << to_string(mode);
    EXPECT_NEAR(mc.bias2, cf.bias2, 5.0 * mc.se_bias2) << to_string(mode);
    EXPECT_NEAR(mc.mse, cf.mse(), 5.0 * mc.se_mse) << to_string(mode);
  }
}

TEST(Theorem1, OrderingOnConformingInstances) {
  RandomStream rng(10);
  for (int i = 0; i < 30; ++i) {
    const TikhonovProblem p = make_conforming_problem(4, 7, 0.5, rng);
    const Theorem1Report r = verify_theorem1(p);
    EXPECT_TRUE(r.bias_ordering);
    EXPECT_TRUE(r.variance_ordering);
  }
}

TEST(Theorem1, AssumptionViolationsNamed) {
  RandomStream rng(11);
  TikhonovProblem p = make_conforming_problem(3, 5, 0.5, rng);
  p.eta = 0.1;
  try {
    verify_theorem1(p);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("(c)"), std::string::npos);
  }
  p = make_conforming_problem(3, 5, 0.5, rng);
  p.D = MatrixXd::NullaryExpr(5, 5, [&]() { return rng.normal(); });
  try {
    verify_theorem1(p);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("(a)"), std::string::npos);
  }
  p = make_conforming_problem(3, 5, 0.0, rng);
  EXPECT_THROW(verify_theorem1(p), ValidationError);
}

TEST(ConditionNumbers, ReferenceValues) {
  const std::array<double, 2> lambda{1.0, 0.5};
  const ConditionNumbers k = condition_numbers(lambda, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(k.ls, 4.0);
  EXPECT_DOUBLE_EQ(k.wls, 1.6);
  EXPECT_DOUBLE_EQ(k.bp, 1.0);
  EXPECT_TRUE(k.ordering_holds());
  EXPECT_DOUBLE_EQ(condition_numbers(lambda, 0.0, 1.0).wls, 1.0);
  const std::array<double, 2> flat{0.7, 0.7};
  EXPECT_THROW(condition_numbers(flat, 0.5, 1.0), ValidationError);
  const std::array<double, 2> unsorted{0.5, 1.0};
  EXPECT_THROW(condition_numbers(unsorted, 0.5, 1.0), ValidationError);
}

TEST(Claim2, TrivialWeights) {
  RandomStream rng(12);
  const MatrixXd A = MatrixXd::NullaryExpr(3, 5, [&]() { return rng.normal(); });
  const Claim2Result id = verify_claim2(A, MatrixXd::Identity(3, 3));
  EXPECT_LT((id.P - MatrixXd::Identity(5, 5)).norm(), 1e-12);
  EXPECT_LT(id.relative_residual, 1e-12);
  const Claim2Result twice = verify_claim2(A, 2.0 * MatrixXd::Identity(3, 3));
  EXPECT_LT(twice.relative_residual, 1e-12);
  const MatrixXd Vt = Eigen::JacobiSVD<MatrixXd>(A, Eigen::ComputeFullV).matrixV().transpose();
  const MatrixXd row_proj = Vt.topRows(3).transpose() * Vt.topRows(3);
  EXPECT_LT((twice.P - (MatrixXd::Identity(5, 5) + row_proj)).norm(), 1e-10);
}

TEST(Claim2, RejectsInvalidWeights) {
  RandomStream rng(13);
  const MatrixXd A = MatrixXd::NullaryExpr(3, 4, [&]() { return rng.normal(); });
  MatrixXd W = MatrixXd::Identity(3, 3);
  W(0, 1) = 0.3;
  EXPECT_THROW(verify_claim2(A, W), ValidationError);
  EXPECT_THROW(verify_claim2(A, -MatrixXd::Identity(3, 3)), ValidationError);
  const MatrixXd B = MatrixXd::NullaryExpr(3, 3, [&]() { return rng.normal(); });
  EXPECT_THROW(verify_claim2(A, B * B.transpose() + MatrixXd::Identity(3, 3)), ValidationError);
}

TEST(Claim1, GradientsVanishAtExactSolutions) {
  RandomStream rng(14);
  const MatrixXd A = MatrixXd::NullaryExpr(3, 5, [&]() { return rng.normal(); });
  const VectorXd x = VectorXd::NullaryExpr(5, [&]() { return rng.normal(); });
  const MatrixXd W = (A * A.transpose()).inverse();
  const Claim1Result at = claim1_gradients(A, W, x, A * x);
  EXPECT_LT(at.weighted_gradient, 1e-12);
  EXPECT_LT(at.plain_gradient, 1e-12);
  const Claim1Result off = claim1_gradients(A, W, x, A * x + VectorXd::Ones(3));
  EXPECT_GT(off.weighted_gradient, 1e-3);
  EXPECT_GT(off.plain_gradient, 1e-3);
}

TEST(Verify, SelectionRunsOnlyRequestedChecks) {
  VerifyOptions o;
  o.selection = {Check::Claim4};
  const auto results = run_verification(o);
  ASSERT_EQ(results.size(), 1u);
  EXPECT_EQ(results[0].check, Check::Claim4);
  EXPECT_TRUE(results[0].passed);
  EXPECT_EQ(results[0].line().rfind("claim4 PASS", 0), 0u);
}

TEST(Verify, ParseCheckNames) {
  EXPECT_EQ(parse_check("theorem1"), Check::Theorem1);
  EXPECT_EQ(parse_check("claim2"), Check::Claim2);
  EXPECT_THROW(parse_check("claim9"), ValidationError);
}

TEST(Verify, ClaimsPassWithReducedBudget) {
  VerifyOptions o;
  o.selection = {Check::Claim1, Check::Claim2, Check::Claim3};
  o.claim_instances = 10;
  for (const CheckResult& r : run_verification(o)) EXPECT_TRUE(r.passed) << r.line();
}

TEST(Verify, InjectedViolationIsReported) {
  VerifyOptions o;
  o.selection = {Check::Theorem1};
  o.theorem_instances = 2;
  o.mc_draws = 100;
  o.inject_violation = true;
  EXPECT_THROW(run_verification(o), ValidationError);
}
