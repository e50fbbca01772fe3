#include <gtest/gtest.h>

#include <cmath>

#include "radiomap/metrics.hpp"
#include "radiomap/simulate.hpp"

using namespace radiomap;

namespace {

// Mean of v(a) v(b) over all cell pairs at exactly the given offsets.
double lag_covariance(const std::vector<GridMatrix>& fields, const std::vector<std::pair<int, int>>& offsets) {
  double sum = 0.0;
  long count = 0;
  for (const GridMatrix& v : fields) {
    for (auto [di, dj] : offsets) {
      for (int i = 0; i + di < v.rows(); ++i)
        for (int j = 0; j + dj < v.cols(); ++j) {
          sum += v(i, j) * v(i + di, j + dj);
          ++count;
        }
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace

TEST(ShadowField, ZeroVariance) {
  EXPECT_EQ(gen_shadow_field(5, 6, 0.0, 40.0, 3), GridMatrix::Zero(5, 6));
}

TEST(ShadowField, Deterministic) {
  EXPECT_EQ(gen_shadow_field(6, 6, 4.0, 40.0, 99), gen_shadow_field(6, 6, 4.0, 40.0, 99));
  EXPECT_NE(gen_shadow_field(6, 6, 4.0, 40.0, 99), gen_shadow_field(6, 6, 4.0, 40.0, 100));
}

TEST(ShadowField, RejectsBadParameters) {
  EXPECT_THROW(gen_shadow_field(4, 4, -1.0, 40.0, 1), PreconditionError);
  EXPECT_THROW(gen_shadow_field(4, 4, 1.0, 0.0, 1), PreconditionError);
}

TEST(ShadowField, SingleCellVariance) {
  const double eta = 5.0;
  double s2 = 0.0;
  for (int seed = 0; seed < 10000; ++seed) {
    const double v = gen_shadow_field(1, 1, eta, 50.0, static_cast<std::uint64_t>(seed))(0, 0);
    s2 += v * v;
  }
  EXPECT_NEAR(s2 / 10000.0 / eta, 1.0, 0.05);
}

TEST(ShadowField, CovarianceAtLag10) {
  std::vector<GridMatrix> fields;
  for (int seed = 0; seed < 2000; ++seed) fields.push_back(gen_shadow_field(20, 20, 6.0, 50.0, 5000 + seed));
  const double want = 6.0 * std::exp(-10.0 / 50.0);
  const double got = lag_covariance(fields, {{0, 10}, {10, 0}, {6, 8}, {8, 6}});
  EXPECT_NEAR(got / want, 1.0, 0.10);
  // Zero lag: the marginal variance.
  EXPECT_NEAR(lag_covariance(fields, {{0, 0}}) / 6.0, 1.0, 0.10);
}

TEST(Slf, UnitDistanceNoShadowing) {
  ShadowParams p;
  p.location = {2.0, 2.0};
  p.pathloss = 2.0;
  p.shadow_variance = 0.0;
  const Slf s = gen_slf(5, 5, p, 1);
  EXPECT_NEAR(s(2, 3), 1.0, 1e-15);
  EXPECT_NEAR(s(1, 2), 1.0, 1e-15);
  // Emitter cell: distance clamped to 0.5.
  EXPECT_NEAR(s(2, 2), 4.0, 1e-12);
}

TEST(Slf, TenMetersNoShadowing) {
  ShadowParams p;
  p.location = {0.0, 0.0};
  p.pathloss = 2.0;
  p.shadow_variance = 0.0;
  const Slf s = gen_slf(12, 12, p, 1);
  EXPECT_NEAR(s(0, 10), 1e-2, 1e-15);
  EXPECT_NEAR(s(6, 8), 1e-2, 1e-15);
}

TEST(Slf, ShadowResidualIsTheField) {
  ShadowParams p;
  p.location = {3.0, 4.0};
  p.pathloss = 2.2;
  p.shadow_variance = 6.0;
  p.decorrelation = 40.0;
  const Slf s = gen_slf(8, 9, p, 77);
  const GridMatrix v = gen_shadow_field(8, 9, 6.0, 40.0, 77);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 9; ++j) {
      const double d = std::max(std::hypot(i - 3.0, j - 4.0), 0.5);
      const double resid = 10.0 * (std::log10(s(i, j)) - std::log10(std::pow(d, -2.2)));
      EXPECT_NEAR(resid, v(i, j), 1e-9);
      EXPECT_GT(s(i, j), 0.0);
    }
}

TEST(Psd, PeakAtCenter) {
  PsdParams p{{5.0}, {2.0}, {1.0}};
  const Psd c = gen_psd(10, p);
  EXPECT_DOUBLE_EQ(c(4), 1.0);  // k = 5 one-based
  EXPECT_GE(c.values().minCoeff(), 0.0);
}

TEST(Psd, MatchesScalarLoop) {
  PsdParams p{{3.5, 11.0}, {2.5, 3.0}, {0.7, 1.9}};
  const Psd c = gen_psd(16, p);
  for (int k = 1; k <= 16; ++k) {
    double want = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double x = (k - p.centers[i]) / p.widths[i];
      const double s = x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
      want += p.amplitudes[i] * s * s;
    }
    EXPECT_NEAR(c(k - 1), want, 1e-15);
  }
}

TEST(Psd, RejectsInvalidParams) {
  EXPECT_THROW(gen_psd(8, PsdParams{{9.0}, {2.0}, {1.0}}), Error);
  EXPECT_THROW(gen_psd(8, PsdParams{{3.0}, {0.0}, {1.0}}), Error);
}

TEST(Scene, FullSamplingObservesEverything) {
  SceneConfig cfg;
  cfg.grid = {8, 8, 12};
  cfg.emitters = 3;
  cfg.sampling_fraction = 1.0;
  const Scene s = gen_scene(cfg);
  EXPECT_EQ(s.observations.mask().size(), 64);
  EXPECT_EQ(extract_G(s.observations), s.truth.unfolded());
}

TEST(Scene, SnrIsExact) {
  SceneConfig cfg;
  cfg.grid = {10, 10, 16};
  cfg.emitters = 3;
  cfg.snr_db = 40.0;
  const Scene s = gen_scene(cfg);
  EXPECT_NEAR(snr_realized(s.truth.unfolded(), s.noise), 40.0, 0.01);
  cfg.snr_db = 30.0;
  const Scene s30 = gen_scene(cfg);
  EXPECT_NEAR(snr_realized(s30.truth.unfolded(), s30.noise), 30.0, 0.01);
  EXPECT_GE(s.noise.minCoeff(), 0.0);
}

TEST(Scene, SparseOccupancyGivesExclusiveBins) {
  SceneConfig cfg;
  cfg.grid = {8, 8, 24};
  cfg.emitters = 3;
  const Scene s = gen_scene(cfg);
  const Matrix& C = s.factors.C;
  int exclusive_rows = 0;
  for (int k = 0; k < C.rows(); ++k) {
    int positive = 0;
    for (int r = 0; r < C.cols(); ++r) positive += C(k, r) > 0.0;
    exclusive_rows += positive == 1;
  }
  EXPECT_GE(exclusive_rows, 3);
  for (int r = 0; r < 3; ++r) {
    const int k = s.exclusive_bins[r];
    for (int other = 0; other < 3; ++other) EXPECT_EQ(C(k, other) > 0.0, other == r);
  }
}

TEST(Scene, NoiselessFactorIdentityOnMask) {
  SceneConfig cfg;
  cfg.grid = {9, 9, 10};
  cfg.emitters = 4;
  cfg.sampling_fraction = 0.3;
  const Scene s = gen_scene(cfg);
  Matrix S_omega(4, s.observations.mask().size());
  for (int m = 0; m < S_omega.cols(); ++m) S_omega.col(m) = s.factors.S.col(s.observations.mask().columns()[m]);
  EXPECT_LT((extract_G(s.observations) - s.factors.C * S_omega).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(s.observations.mask().size(), static_cast<int>(std::lround(0.3 * 81)));
}

TEST(Scene, ReproducibleAndWarnsOnTinyMask) {
  SceneConfig cfg;
  cfg.grid = {6, 6, 8};
  cfg.emitters = 5;
  cfg.sampling_fraction = 0.05;
  const Scene a = gen_scene(cfg), b = gen_scene(cfg);
  EXPECT_EQ(a.truth.unfolded(), b.truth.unfolded());
  EXPECT_EQ(a.observations.mask().columns(), b.observations.mask().columns());
  EXPECT_FALSE(a.warnings.empty());
}

TEST(Corpus, DeterministicSingleSample) {
  CorpusConfig cfg;
  cfg.rows = cfg.cols = 12;
  const auto a = gen_training_corpus(cfg, 1);
  const auto b = gen_training_corpus(cfg, 1);
  EXPECT_EQ(a[0].slf.values(), b[0].slf.values());
  EXPECT_EQ(a[0].mask, b[0].mask);
  // Sample n depends only on (seed, n).
  const auto c = gen_training_corpus(cfg, 3);
  const auto d = gen_training_corpus(cfg, 1, 2);
  EXPECT_EQ(c[2].slf.values(), d[0].slf.values());
}

TEST(Corpus, DefaultsFollowTheReferenceRanges) {
  CorpusConfig cfg;
  EXPECT_EQ(cfg.shadow_variance.lo, 3.0);
  EXPECT_EQ(cfg.shadow_variance.hi, 8.0);
  EXPECT_EQ(cfg.decorrelation.lo, 30.0);
  EXPECT_EQ(cfg.decorrelation.hi, 100.0);
  EXPECT_EQ(cfg.pathloss.lo, 2.0);
  EXPECT_EQ(cfg.pathloss.hi, 2.5);
}

TEST(Corpus, PathlossHistogramIsUniform) {
  CorpusConfig cfg;
  cfg.rows = cfg.cols = 6;
  const auto corpus = gen_training_corpus(cfg, 1000);
  std::vector<int> hist(10, 0);
  for (const auto& s : corpus) {
    const double g = s.params.pathloss;
    ASSERT_GE(g, 2.0);
    ASSERT_LE(g, 2.5);
    hist[std::min(9, static_cast<int>((g - 2.0) / 0.05))]++;
  }
  double chi2 = 0.0;
  for (int h : hist) chi2 += (h - 100.0) * (h - 100.0) / 100.0;
  // 99.9% quantile of chi-square with 9 degrees of freedom.
  EXPECT_LT(chi2, 27.877);
  for (const auto& s : corpus) {
    int sensed = 0;
    for (auto m : s.mask) sensed += m;
    EXPECT_GE(sensed, 1);
    EXPECT_LE(sensed, static_cast<int>(std::lround(0.2 * 36)));
  }
}
