#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "radiomap/factor.hpp"
#include "test_util.hpp"

using namespace radiomap;

namespace {

// G = C * H where C (K x R) has one exclusive row per column at `pure`, so the
// columns of G^T are mixtures of R pure columns H^T.
struct Separable {
  Matrix C;
  Matrix H;
  std::vector<int> pure;
};

Separable make_separable(std::mt19937_64& gen, int K, int R, int N) {
  Separable s;
  s.C = testutil::uniform_matrix(gen, K, R);
  s.H = testutil::uniform_matrix(gen, R, N);
  std::vector<int> rows(K);
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), gen);
  s.pure.assign(rows.begin(), rows.begin() + R);
  for (int r = 0; r < R; ++r) s.C.row(s.pure[r]) = Vector::Unit(R, r).transpose();
  return s;
}

// Independent NAE: min over permutations of mean l1 distance between
// l1-normalized columns, by brute force.
double brute_nae(const Matrix& hat, const Matrix& truth) {
  const int R = static_cast<int>(truth.cols());
  std::vector<int> perm(R);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double total = 0.0;
    for (int r = 0; r < R; ++r) {
      const Vector a = truth.col(r) / truth.col(r).lpNorm<1>();
      const Vector b = hat.col(perm[r]) / hat.col(perm[r]).lpNorm<1>();
      total += (a - b).lpNorm<1>();
    }
    best = std::min(best, total / R);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST(Spa, IdentityBlockSelected) {
  std::mt19937_64 gen(10);
  const int K = 4, R = 3;
  const Matrix C = testutil::uniform_matrix(gen, K, R, 0.5, 1.5);
  Matrix H(R, 8);
  H.leftCols(3) = Matrix::Identity(3, 3);
  H.rightCols(5) = testutil::uniform_matrix(gen, R, 5);
  const SpaResult res = spa(C * H, R);
  std::vector<int> idx = res.indices;
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(idx, (std::vector<int>{0, 1, 2}));
}

TEST(Spa, RankOnePicksLargestNormalizedNorm) {
  std::mt19937_64 gen(11);
  const Matrix F = testutil::uniform_matrix(gen, 6, 9);
  int want = 0;
  double best = -1.0;
  for (int c = 0; c < F.cols(); ++c) {
    const double v = (F.col(c) / F.col(c).sum()).norm();
    if (v > best) {
      best = v;
      want = c;
    }
  }
  const SpaResult res = spa(F, 1);
  ASSERT_EQ(res.indices.size(), 1u);
  EXPECT_EQ(res.indices[0], want);
}

TEST(Spa, RandomSeparableInstancesRecovered) {
  std::mt19937_64 gen(12);
  const int K = 20, R = 4, N = 30;
  int successes = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Separable s = make_separable(gen, K, R, N);
    const Matrix G = s.C * s.H;
    const SpaResult res = spa(G.transpose(), R);
    const Matrix C_hat = res.B.transpose();
    const Matrix H_hat = res.A.transpose();
    const double rel = testutil::rel_error(C_hat * H_hat, G);
    const double nae = brute_nae(C_hat, s.C);
    if (rel <= 1e-10 && nae <= 1e-10) ++successes;
  }
  EXPECT_EQ(successes, 100);
}

TEST(Spa, ScaleCovariant) {
  std::mt19937_64 gen(13);
  const Separable s = make_separable(gen, 10, 3, 15);
  const Matrix F = (s.C * s.H).transpose().eval();
  Matrix scaled = F;
  std::uniform_real_distribution<double> u(0.01, 100.0);
  for (int c = 0; c < scaled.cols(); ++c) scaled.col(c) *= u(gen);
  EXPECT_EQ(spa(F, 3).indices, spa(scaled, 3).indices);
}

TEST(Spa, ZeroColumnsDroppedWithIndexMap) {
  Matrix F = Matrix::Zero(3, 5);
  F.col(1) = Vector::Unit(3, 0);
  F.col(3) = Vector::Unit(3, 1);
  F.col(4) = Vector::Constant(3, 1.0);
  const SpaResult res = spa(F, 2);
  for (int idx : res.indices) EXPECT_TRUE(idx == 1 || idx == 3 || idx == 4);
  EXPECT_TRUE(res.B.col(0).isZero());
  EXPECT_TRUE(res.B.col(2).isZero());
}

TEST(Spa, TiesBrokenByLowestIndex) {
  Matrix F(2, 3);
  F << 1, 0, 1, 0, 1, 0;
  EXPECT_EQ(spa(F, 1).indices[0], 0);
}

TEST(Spa, DependentSelectionNamesIteration) {
  Matrix F(3, 4);
  F << 1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4;
  try {
    spa(F, 2);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("singular projection"), std::string::npos);
  }
  SpaOptions opts;
  opts.rank_policy = SpaOptions::RankPolicy::kZeroExtra;
  const SpaResult res = spa(F, 2, opts);
  EXPECT_EQ(res.numerical_rank, 1);
  EXPECT_TRUE(res.B.row(1).isZero());
  EXPECT_LE(testutil::rel_error(res.A * res.B, F), 1e-12);
}

TEST(Spa, RejectsBadInput) {
  Matrix F = Matrix::Ones(3, 3);
  EXPECT_THROW(spa(F, 4), PreconditionError);
  F(0, 0) = -1.0;
  EXPECT_THROW(spa(F, 1), PreconditionError);
}

TEST(Nnls, IdentityIsPositivePart) {
  std::mt19937_64 gen(20);
  const Matrix G = testutil::normal_matrix(gen, 7, 4);
  const NnlsResult res = nnls(G, Matrix::Identity(4, 4));
  EXPECT_LE((res.C - G.cwiseMax(0.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Nnls, InteriorSolutionRecovered) {
  std::mt19937_64 gen(21);
  const Matrix C0 = testutil::uniform_matrix(gen, 12, 5, 0.1, 2.0);
  const Matrix H = testutil::uniform_matrix(gen, 5, 40);
  const NnlsResult res = nnls(C0 * H, H);
  EXPECT_LE((res.C - C0).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Nnls, TwoVariableGridSearch) {
  std::mt19937_64 gen(22);
  int with_active = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix H = testutil::normal_matrix(gen, 2, 6);
    const Matrix g = testutil::normal_matrix(gen, 1, 6);
    const NnlsResult res = nnls(g, H);
    // The unconstrained minimizer bounds the search box.
    const Vector uc = (H * H.transpose()).ldlt().solve(H * g.transpose());
    const double hi = std::max(1.0, 1.5 * uc.cwiseAbs().maxCoeff());
    auto f = [&](double a, double b) { return (g.row(0).transpose() - H.transpose() * Eigen::Vector2d(a, b)).squaredNorm(); };
    double best = 1e300, ba = 0, bb = 0;
    const double step = 1e-4 * std::max(1.0, hi / 2.0);
    // Coarse pass, then a fine pass around the coarse optimum.
    for (double a = 0.0; a <= hi; a += 100 * step)
      for (double b = 0.0; b <= hi; b += 100 * step)
        if (f(a, b) < best) best = f(a, b), ba = a, bb = b;
    const double a0 = std::max(0.0, ba - 200 * step), b0 = std::max(0.0, bb - 200 * step);
    for (double a = a0; a <= ba + 200 * step; a += step)
      for (double b = b0; b <= bb + 200 * step; b += step)
        if (f(a, b) < best) best = f(a, b), ba = a, bb = b;
    if (res.C(0, 0) == 0.0 || res.C(0, 1) == 0.0) ++with_active;
    EXPECT_NEAR(res.C(0, 0), ba, 1e-3) << "trial " << trial;
    EXPECT_NEAR(res.C(0, 1), bb, 1e-3) << "trial " << trial;
  }
  EXPECT_GT(with_active, 0);
}

TEST(Nnls, KktConditionsHold) {
  std::mt19937_64 gen(23);
  const Matrix H = testutil::normal_matrix(gen, 6, 30);
  const Matrix G = testutil::normal_matrix(gen, 25, 30);
  const NnlsResult res = nnls(G, H);
  EXPECT_GE(res.C.minCoeff(), 0.0);
  EXPECT_LE(res.kkt_residual, 1e-8);
  const Matrix gram = H * H.transpose();
  for (int k = 0; k < G.rows(); ++k) {
    const Vector grad = gram * res.C.row(k).transpose() - H * G.row(k).transpose();
    for (int r = 0; r < 6; ++r) {
      if (res.C(k, r) > 0.0) {
        EXPECT_LE(std::abs(grad(r)), 1e-8);
      } else {
        EXPECT_GE(grad(r), -1e-8);
      }
    }
  }
}

TEST(Nnls, RankDeficientRejected) {
  Matrix H(2, 4);
  H << 1, 2, 3, 4, 2, 4, 6, 8;
  EXPECT_THROW(nnls(Matrix::Ones(3, 4), H), PreconditionError);
  EXPECT_THROW(nnls(Matrix::Ones(3, 5), H), ShapeError);
}

TEST(Hungarian, MatchesBruteForce) {
  std::mt19937_64 gen(30);
  for (int R = 1; R <= 6; ++R) {
    for (int trial = 0; trial < 10; ++trial) {
      Matrix cost = testutil::uniform_matrix(gen, R, R);
      if (trial % 2 == 1) cost.col(0) = cost.col(R - 1);  // duplicated candidates
      const std::vector<int> a = hungarian(cost);
      double got = 0.0;
      for (int r = 0; r < R; ++r) got += cost(r, a[r]);
      std::vector<int> perm(R);
      std::iota(perm.begin(), perm.end(), 0);
      double best = 1e300;
      do {
        double t = 0.0;
        for (int r = 0; r < R; ++r) t += cost(r, perm[r]);
        best = std::min(best, t);
      } while (std::next_permutation(perm.begin(), perm.end()));
      EXPECT_NEAR(got, best, 1e-12);
    }
  }
}

TEST(AlignColumns, IdentityWhenEqual) {
  std::mt19937_64 gen(31);
  const Matrix C = testutil::uniform_matrix(gen, 8, 4);
  const Alignment a = align_columns(C, C);
  EXPECT_EQ(a.permutation, (std::vector<int>{0, 1, 2, 3}));
  for (double s : a.scales) EXPECT_NEAR(s, 1.0, 1e-14);
  EXPECT_NEAR(a.cost, 0.0, 1e-14);
}

TEST(AlignColumns, RecoversPermutationAndScales) {
  std::mt19937_64 gen(32);
  const int R = 5;
  const Matrix C = testutil::uniform_matrix(gen, 10, R);
  std::vector<int> perm{3, 0, 4, 1, 2};
  Matrix hat(10, R);
  std::vector<double> lambda{0.5, 2.0, 3.0, 0.1, 7.0};
  // true column t lives at estimate column perm[t]
  for (int t = 0; t < R; ++t) hat.col(perm[t]) = lambda[t] * C.col(t);
  const Alignment a = align_columns(hat, C);
  EXPECT_EQ(a.permutation, perm);
  for (int t = 0; t < R; ++t) EXPECT_NEAR(a.scales[t], lambda[t], 1e-12);
}

TEST(AlignColumns, NearDuplicateColumnsMatchBruteForce) {
  std::mt19937_64 gen(33);
  for (int R = 2; R <= 6; ++R) {
    Matrix C = testutil::uniform_matrix(gen, 6, R);
    for (int r = 1; r < R; ++r) C.col(r) = C.col(0) + 1e-3 * testutil::uniform_matrix(gen, 6, 1).col(0);
    const Matrix hat = C + 0.01 * testutil::uniform_matrix(gen, 6, R);
    const Alignment a = align_columns(hat, C);
    EXPECT_NEAR(a.cost / R, brute_nae(hat, C), 1e-12);
  }
  EXPECT_THROW(align_columns(Matrix::Ones(3, 2), Matrix::Ones(3, 3)), ShapeError);
}
