#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mpmrc/rng.hpp"
#include "mpmrc/verification.hpp"

using namespace mpmrc;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
  std::vector<double> v(detail::shape_numel(shape));
  for (double& x : v) x = rng.uniform(-0.8, 0.8);
  return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

TEST(CrossAttend, SingleCandidateIsFixedPoint) {
  Tensor r = Tensor::from_data({1, 3}, {0.5, -1.0, 2.0});
  auto [alpha, attended] = cross_attend(r);
  EXPECT_DOUBLE_EQ(alpha.at(0, 0), 1.0);
  for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(attended.at(0, j), r.at(0, j));
}

TEST(CrossAttend, HandComputedPairCase) {
  // r1 = r2 = [1,0]: s12 = 1, diagonal 0 -> alpha row = [1, e]/(1+e)
  Tensor r = Tensor::from_data({2, 2}, {1, 0, 1, 0});
  auto [alpha, attended] = cross_attend(r);
  double z = 1.0 + std::exp(1.0);
  EXPECT_NEAR(alpha.at(0, 0), 1.0 / z, 1e-12);
  EXPECT_NEAR(alpha.at(0, 1), std::exp(1.0) / z, 1e-12);
  EXPECT_NEAR(alpha.at(0, 0), 0.2689, 1e-4);
  EXPECT_NEAR(alpha.at(0, 1), 0.7311, 1e-4);
}

TEST(CrossAttend, OrthogonalCandidatesGiveUniformAttention) {
  Tensor r = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto [alpha, attended] = cross_attend(r);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(alpha.at(i, j), 1.0 / 3.0, 1e-12);
}

TEST(CrossAttend, SelfMaskDropsDiagonal) {
  Tensor r = Tensor::from_data({2, 2}, {1, 0, 1, 0});
  auto [alpha, attended] = cross_attend(r, /*mask_self=*/true);
  EXPECT_EQ(alpha.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(alpha.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(alpha.at(1, 0), 1.0);
  EXPECT_EQ(alpha.at(1, 1), 0.0);
}

TEST(CrossAttend, SelfMaskWithSingleCandidateStillWorks) {
  Tensor r = Tensor::from_data({1, 2}, {0.3, 0.4});
  auto [alpha, attended] = cross_attend(r, /*mask_self=*/true);
  EXPECT_DOUBLE_EQ(alpha.at(0, 0), 1.0);
}

TEST(VerifyScores, ZeroWeightsGiveUniform) {
  Rng rng(81);
  for (int n : {1, 2, 5}) {
    VerificationParams p{Tensor::zeros({3 * 4}, true)};
    Tensor r = random_tensor({n, 4}, rng, false);
    auto out = verify(r, p);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(out.probs.at(i), 1.0 / n, 1e-12);
  }
}

TEST(VerifyScores, ProbabilitiesSumToOne) {
  Rng rng(82);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = rng.uniform_int(1, 6);
    VerificationParams p{random_tensor({3 * 3}, rng, false)};
    auto out = verify(random_tensor({n, 3}, rng, false), p);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += out.probs.at(i);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(VerifyScores, GradientsThroughWholeVerifier) {
  Rng rng(83);
  VerificationParams p{random_tensor({3 * 3}, rng)};
  Tensor r = random_tensor({3, 3}, rng);
  auto res = gradcheck::check(
      [&] {
        auto out = verify(r, p);
        return verification_loss_single(out.probs, 1);
      },
      {r, p.w});
  EXPECT_TRUE(res.ok(1e-6)) << res.worst;
}

TEST(VerificationLoss, UniformGivesLogN) {
  for (int n : {1, 3, 7}) {
    Tensor probs = Tensor::full({n}, 1.0 / n);
    EXPECT_NEAR(verification_loss({probs}, {0}).item(), std::log(n), 1e-12);
  }
}

TEST(VerificationLoss, CertainPredictionGivesZero) {
  Tensor probs = Tensor::from_data({3}, {0.0, 1.0, 0.0});
  EXPECT_NEAR(verification_loss({probs}, {1}).item(), 0.0, 1e-12);
}

TEST(VerificationLoss, BatchMeanEqualsMeanOfLosses) {
  Tensor p1 = Tensor::from_data({2}, {0.25, 0.75});
  Tensor p2 = Tensor::from_data({3}, {0.1, 0.2, 0.7});
  double expected = 0.5 * (-std::log(0.75) - std::log(0.2));
  EXPECT_NEAR(verification_loss({p1, p2}, {1, 1}).item(), expected, 1e-12);
}

TEST(VerificationLoss, InvalidIndexRejected) {
  Tensor probs = Tensor::full({2}, 0.5);
  EXPECT_THROW(verification_loss({probs}, {2}), ContractError);
  EXPECT_THROW(verification_loss({probs}, {-1}), ContractError);
}

TEST(Verification, SinglePassageFlowsThrough) {
  Rng rng(84);
  VerificationParams p{random_tensor({3 * 2}, rng, false)};
  auto out = verify(random_tensor({1, 2}, rng, false), p);
  EXPECT_DOUBLE_EQ(out.probs.at(0), 1.0);
  EXPECT_NEAR(verification_loss({out.probs}, {0}).item(), 0.0, 1e-12);
}

TEST(Verification, PermutationEquivariance) {
  Rng rng(85);
  const int n = 4, d = 3;
  VerificationParams p{random_tensor({3 * d}, rng, false)};
  Tensor r = random_tensor({n, d}, rng, false);
  auto out = verify(r, p);

  std::vector<int> perm{2, 0, 3, 1};
  std::vector<double> permuted(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) permuted[static_cast<size_t>(i) * d + j] = r.at(perm[i], j);
  auto out_p = verify(Tensor::from_data({n, d}, permuted), p);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(out_p.probs.at(i), out.probs.at(perm[i]), 1e-12);
}

TEST(Verification, ScalingKeepsDistributionValid) {
  Rng rng(86);
  for (double c : {0.1, 2.0, 10.0}) {
    const int n = 3, d = 2;
    VerificationParams p{random_tensor({3 * d}, rng, false)};
    Tensor r = random_tensor({n, d}, rng, false);
    std::vector<double> scaled = r.data();
    for (double& x : scaled) x *= c;
    auto out = verify(Tensor::from_data({n, d}, scaled), p);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      EXPECT_GE(out.probs.at(i), 0.0);
      s += out.probs.at(i);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}
