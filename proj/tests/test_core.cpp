#include <gtest/gtest.h>

#include "radiomap/core.hpp"
#include "test_util.hpp"

using namespace radiomap;

TEST(Assemble, UnitOuterProduct) {
  std::vector<Slf> s{Slf(GridMatrix::Ones(2, 2))};
  std::vector<Psd> c{Psd(Vector::Unit(3, 1))};
  const RadioMapTensor x = assemble(s, c);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      EXPECT_EQ(x(i, j, 0), 0.0);
      EXPECT_EQ(x(i, j, 1), 1.0);
      EXPECT_EQ(x(i, j, 2), 0.0);
    }
}

TEST(Assemble, DuplicatedComponentDoubles) {
  std::mt19937_64 gen(1);
  const Slf s(testutil::uniform_matrix(gen, 3, 4));
  const Psd c(testutil::uniform_matrix(gen, 5, 1).col(0));
  const std::vector<Slf> one{s}, two{s, s};
  const std::vector<Psd> c1{c}, c2{c, c};
  EXPECT_TRUE(assemble(two, c2).unfolded().isApprox(2.0 * assemble(one, c1).unfolded()));
}

TEST(Assemble, MatchesTripleLoop) {
  std::mt19937_64 gen(2);
  const int I = 4, J = 4, K = 5, R = 3;
  std::vector<Slf> s;
  std::vector<Psd> c;
  for (int r = 0; r < R; ++r) {
    s.emplace_back(GridMatrix(testutil::uniform_matrix(gen, I, J)));
    c.emplace_back(Vector(testutil::uniform_matrix(gen, K, 1).col(0)));
  }
  const RadioMapTensor x = assemble(s, c);
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < K; ++k) {
        double want = 0.0;
        for (int r = 0; r < R; ++r) want += s[r](i, j) * c[r](k);
        EXPECT_NEAR(x(i, j, k), want, 1e-14);
      }
}

TEST(Assemble, RejectsMismatchedLists) {
  std::vector<Slf> s{Slf(GridMatrix::Ones(2, 2))};
  std::vector<Psd> c{Psd(Vector::Ones(3)), Psd(Vector::Ones(3))};
  EXPECT_THROW(assemble(s, c), ShapeError);
  std::vector<Slf> s2{Slf(GridMatrix::Ones(2, 2)), Slf(GridMatrix::Ones(3, 2))};
  EXPECT_THROW(assemble(s2, c), ShapeError);
}

TEST(Assemble, UnfoldEqualsCS) {
  std::mt19937_64 gen(3);
  for (int R = 1; R <= 5; ++R) {
    FactorModel f{testutil::uniform_matrix(gen, 6, R), testutil::uniform_matrix(gen, R, 12)};
    const GridSpec g{3, 4, 6};
    const RadioMapTensor x = assemble(slfs_from_rows(f.S, 3, 4), psds_from_columns(f.C));
    EXPECT_LT((unfold(x) - f.C * f.S).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_TRUE(assemble(g, f).unfolded().isApprox(f.C * f.S));
  }
}

TEST(Assemble, LinearInFactors) {
  std::mt19937_64 gen(4);
  const GridSpec g{3, 3, 4};
  FactorModel a{testutil::uniform_matrix(gen, 4, 2), testutil::uniform_matrix(gen, 2, 9)};
  FactorModel b{testutil::uniform_matrix(gen, 4, 2), a.S};
  FactorModel sum{a.C + 3.0 * b.C, a.S};
  EXPECT_TRUE(assemble(g, sum).unfolded().isApprox(assemble(g, a).unfolded() + 3.0 * assemble(g, b).unfolded()));
}

TEST(Unfold, DegenerateGrid) {
  Matrix fiber(4, 1);
  fiber << 1, 2, 3, 4;
  const RadioMapTensor x({1, 1, 4}, fiber);
  EXPECT_EQ(unfold(x), fiber);
}

TEST(Unfold, IndexBookkeeping) {
  Matrix m(1, 4);
  // X(i, j) = 10 i + j with one-based i, j, stored at q = J i + j (zero-based).
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m(0, flat_index(2, {i, j})) = 10.0 * (i + 1) + (j + 1);
  const RadioMapTensor x({2, 2, 1}, m);
  Matrix want(1, 4);
  want << 11, 12, 21, 22;
  EXPECT_EQ(unfold(x), want);
  EXPECT_EQ(x(1, 0, 0), 21.0);
}

TEST(Unfold, RoundTrip) {
  std::mt19937_64 gen(5);
  const GridSpec g{3, 3, 4};
  const Matrix m = testutil::uniform_matrix(gen, 4, 9);
  EXPECT_EQ(unfold(fold(g, m)), m);
}

TEST(RadioMapTensor, RejectsNegativeAndBadShape) {
  Matrix m = Matrix::Ones(2, 4);
  m(1, 2) = -1.0;
  EXPECT_THROW(RadioMapTensor({2, 2, 2}, m), PreconditionError);
  EXPECT_THROW(RadioMapTensor({2, 2, 3}, Matrix::Ones(2, 4)), ShapeError);
  EXPECT_THROW(GridSpec({0, 2, 2}).validate(), ShapeError);
}

TEST(SensingMask, SortsAndRejectsDuplicates) {
  SensingMask m(3, 3, {{2, 1}, {0, 2}, {1, 0}});
  EXPECT_EQ(m.columns(), (std::vector<int>{2, 3, 7}));
  EXPECT_EQ(*m.position({1, 0}), 1);
  EXPECT_FALSE(m.contains({0, 0}));
  EXPECT_THROW(SensingMask(3, 3, {{0, 0}, {0, 0}}), PreconditionError);
  EXPECT_THROW(SensingMask(3, 3, {{3, 0}}), PreconditionError);
  EXPECT_THROW(SensingMask(3, 3, {}), PreconditionError);
  EXPECT_EQ(SensingMask::full(2, 3).size(), 6);
}

TEST(ExtractG, SingleCell) {
  std::mt19937_64 gen(6);
  const GridSpec g{3, 3, 5};
  const RadioMapTensor x(g, testutil::uniform_matrix(gen, 5, 9));
  const FiberObservations obs = observe(x, SensingMask(3, 3, {{1, 2}}));
  const Matrix G = extract_G(obs);
  ASSERT_EQ(G.cols(), 1);
  EXPECT_EQ(G.col(0), x.fiber({1, 2}));
}

TEST(ExtractG, FullMaskIsUnfolding) {
  std::mt19937_64 gen(7);
  const GridSpec g{3, 4, 5};
  const RadioMapTensor x(g, testutil::uniform_matrix(gen, 5, 12));
  EXPECT_EQ(extract_G(observe(x, SensingMask::full(3, 4))), unfold(x));
}

TEST(ExtractG, RandomSubsetLookup) {
  std::mt19937_64 gen(8);
  const GridSpec g{5, 4, 3};
  const RadioMapTensor x(g, testutil::uniform_matrix(gen, 3, 20));
  const SensingMask mask = SensingMask::from_flat(5, 4, {17, 3, 9, 0, 12});
  const Matrix G = extract_G(observe(x, mask));
  for (int m = 0; m < mask.size(); ++m) {
    const Cell c = mask.cells()[m];
    for (int k = 0; k < 3; ++k) EXPECT_EQ(G(k, m), x(c.i, c.j, k));
  }
}

TEST(ScatterRows, OnesOnMaskCells) {
  const SensingMask mask(3, 3, {{0, 0}, {1, 1}, {2, 0}});
  const auto P = scatter_rows(Matrix::Ones(2, 3), mask);
  ASSERT_EQ(P.size(), 2u);
  for (const Slf& p : P) {
    EXPECT_EQ(p.values().sum(), 3.0);
    for (const Cell& c : mask.cells()) EXPECT_EQ(p(c.i, c.j), 1.0);
  }
}

TEST(ScatterRows, FullMaskRoundTrip) {
  std::mt19937_64 gen(9);
  const Matrix S = testutil::uniform_matrix(gen, 2, 6);
  const auto P = scatter_rows(S, SensingMask::full(2, 3));
  for (int r = 0; r < 2; ++r) EXPECT_EQ(P[r].vec(), Vector(S.row(r).transpose()));
}

TEST(ScatterRows, SupportWithinMaskAndRightInverse) {
  std::mt19937_64 gen(10);
  const GridSpec g{4, 5, 3};
  const SensingMask mask = SensingMask::from_flat(4, 5, {1, 4, 6, 13, 19});
  const Matrix H = testutil::uniform_matrix(gen, 3, 5, 0.1, 1.0);
  const auto P = scatter_rows(H, mask);
  for (const Slf& p : P)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j)
        if (p(i, j) != 0.0) EXPECT_TRUE(mask.contains({i, j}));
  // Tensor built from scattered rows with unit PSDs: extracting Omega recovers H.
  std::vector<Psd> c;
  for (int r = 0; r < 3; ++r) c.emplace_back(Vector(Vector::Unit(3, r)));
  EXPECT_TRUE(extract_G(observe(assemble(P, c), mask)).isApprox(H));
  EXPECT_THROW(scatter_rows(Matrix::Ones(2, 4), mask), ShapeError);
}
