#include <gtest/gtest.h>

#include <sstream>

#include "in_model.hpp"
#include "radiomap/dowjons.hpp"
#include "radiomap/metrics.hpp"
#include "test_util.hpp"

using namespace radiomap;

namespace {

const Autoencoder& prior() {
  static const Autoencoder ae = [] {
    ArchConfig arch;
    arch.rows = arch.cols = 8;
    arch.latent_dim = 8;
    Autoencoder a = make_dense_autoencoder(arch, {64});
    CorpusConfig cc;
    cc.rows = cc.cols = 8;
    cc.mask_fraction = {0.1, 0.4};
    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 16;
    TrainState state;
    train_autoencoder(gen_training_corpus(cc, 2000), a, tc, state);
    return a;
  }();
  return ae;
}

// g(z) = mat(z) for D = rows * cols.
Network identity_decoder(int rows, int cols) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in_channels = rows * cols;
  s.out_channels = 1;
  s.out_height = rows;
  s.out_width = cols;
  Network net(Shape3{rows * cols, 1, 1}, {s});
  net.set_zero();
  net.layers()[0].weight = Matrix::Identity(rows * cols, rows * cols);
  return net;
}

struct RandomState {
  FitProblem p;
  Matrix Z;
  Matrix C;
};

RandomState random_state(std::mt19937_64& gen, int bins, int R, int sensed) {
  RandomState s;
  const SensingMask mask = testutil::random_mask(8, 8, sensed / 64.0, gen);
  s.p.columns = mask.columns();
  s.p.G = testutil::uniform_matrix(gen, bins, mask.size());
  s.Z = testutil::normal_matrix(gen, 8, R);
  s.C = testutil::uniform_matrix(gen, bins, R);
  return s;
}

}  // namespace

TEST(Objective, ZeroAtPerfectFit) {
  const auto sc = testutil::in_model_scene(prior(), 10, 3, 0.25, false, 1);
  ASSERT_TRUE(sc.has_value());
  const FitProblem p = FitProblem::from(sc->obs);
  EXPECT_LE(objective(prior().decoder, sc->Z, sc->C, p), 1e-24 * p.G.squaredNorm());
}

TEST(Objective, ZeroModelGivesDataNorm) {
  std::mt19937_64 gen(2);
  const RandomState s = random_state(gen, 6, 2, 10);
  EXPECT_NEAR(objective(prior().decoder, s.Z, Matrix::Zero(6, 2), s.p), s.p.G.squaredNorm(), 1e-12);
}

TEST(Objective, MatchesTripleLoop) {
  std::mt19937_64 gen(3);
  const RandomState s = random_state(gen, 5, 3, 12);
  const Network& dec = prior().decoder;
  std::vector<GridMatrix> maps;
  for (int r = 0; r < 3; ++r) maps.push_back(forward_decoder(dec, s.Z.col(r)));
  double want = 0.0;
  for (int k = 0; k < 5; ++k)
    for (size_t m = 0; m < s.p.columns.size(); ++m) {
      const int q = s.p.columns[m];
      double model = 0.0;
      for (int r = 0; r < 3; ++r) model += maps[r](q / 8, q % 8) * s.C(k, r);
      want += (s.p.G(k, m) - model) * (s.p.G(k, m) - model);
    }
  EXPECT_NEAR(objective(dec, s.Z, s.C, s.p), want, 1e-12 * want);
}

TEST(UpdateC, DisjointSupportsHaveClosedForm) {
  const Network dec = identity_decoder(4, 4);
  std::mt19937_64 gen(4);
  FitProblem p;
  p.columns = {0, 3, 5, 6, 9, 10, 12, 15};
  p.G = testutil::normal_matrix(gen, 5, 8);
  // Row r of H is supported on sensed positions m with m % 2 == r.
  Matrix Z = Matrix::Zero(16, 2);
  for (int m = 0; m < 8; ++m) Z(p.columns[m], m % 2) = 0.5 + 0.1 * m;
  const Matrix H = sensed_slfs(dec, Z, p.columns);
  const CUpdate cu = update_C(dec, Z, p);
  for (int k = 0; k < 5; ++k)
    for (int r = 0; r < 2; ++r) {
      const double want = std::max(0.0, p.G.row(k).dot(H.row(r)) / H.row(r).squaredNorm());
      EXPECT_NEAR(cu.C(k, r), want, 1e-12);
    }
  EXPECT_FALSE(cu.regularized);
}

TEST(UpdateC, NeverIncreasesObjective) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 50; ++t) {
    const RandomState s = random_state(gen, 6, 3, 14);
    const CUpdate cu = update_C(prior().decoder, s.Z, s.p);
    EXPECT_LE(objective(prior().decoder, s.Z, cu.C, s.p), objective(prior().decoder, s.Z, s.C, s.p) * (1 + 1e-12));
    EXPECT_LE(cu.kkt_residual, 1e-8);
  }
}

TEST(UpdateC, RecoversTrueCWithTrueLatents) {
  for (bool separable : {true, false}) {
    const auto sc = testutil::in_model_scene(prior(), 10, 3, 0.25, separable, 6);
    ASSERT_TRUE(sc.has_value());
    const CUpdate cu = update_C(prior().decoder, sc->Z, FitProblem::from(sc->obs));
    EXPECT_LE((cu.C - sc->C).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(UpdateC, RankDeficientFallsBackToRidge) {
  std::mt19937_64 gen(7);
  RandomState s = random_state(gen, 4, 2, 10);
  s.Z.col(1) = s.Z.col(0);
  const CUpdate cu = update_C(prior().decoder, s.Z, s.p);
  EXPECT_TRUE(cu.regularized);
  EXPECT_TRUE(cu.C.allFinite());
  EXPECT_GE(cu.C.minCoeff(), 0.0);
}

TEST(GradZ, IdentityDecoderClosedForm) {
  const Network dec = identity_decoder(4, 4);
  std::mt19937_64 gen(8);
  FitProblem p;
  p.columns = {1, 2, 7, 8, 11, 14};
  p.G = testutil::normal_matrix(gen, 5, 6);
  const Matrix Z = testutil::normal_matrix(gen, 16, 3);
  const Matrix C = testutil::uniform_matrix(gen, 5, 3);
  Matrix H(3, 6);
  for (int m = 0; m < 6; ++m) H.col(m) = Z.row(p.columns[m]).transpose();
  const Matrix dH = -2.0 * C.transpose() * (p.G - C * H);
  Matrix want = Matrix::Zero(16, 3);
  for (int m = 0; m < 6; ++m) want.row(p.columns[m]) = dH.col(m).transpose();
  EXPECT_LE((objective_grad_z(dec, Z, C, p) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradZ, MatchesFiniteDifferences) {
  std::mt19937_64 gen(9);
  const double h = 1e-5;
  for (int t = 0; t < 5; ++t) {
    const RandomState s = random_state(gen, 5, 2, 12);
    const Network& dec = prior().decoder;
    const Matrix g = objective_grad_z(dec, s.Z, s.C, s.p);
    Matrix fd(g.rows(), g.cols());
    for (int d = 0; d < g.rows(); ++d)
      for (int r = 0; r < g.cols(); ++r) {
        Matrix zp = s.Z, zm = s.Z;
        zp(d, r) += h;
        zm(d, r) -= h;
        fd(d, r) = (objective(dec, zp, s.C, s.p) - objective(dec, zm, s.C, s.p)) / (2 * h);
      }
    const double floor = 1e-3 * fd.cwiseAbs().maxCoeff();
    for (int d = 0; d < g.rows(); ++d)
      for (int r = 0; r < g.cols(); ++r)
        EXPECT_LE(std::abs(g(d, r) - fd(d, r)), 1e-4 * std::max(std::abs(fd(d, r)), floor));
  }
}

TEST(UpdateZ, StationaryAtPerfectFit) {
  const auto sc = testutil::in_model_scene(prior(), 10, 2, 0.25, false, 10);
  ASSERT_TRUE(sc.has_value());
  const FitProblem p = FitProblem::from(sc->obs);
  const Stationarity st = stationarity_report(prior().decoder, sc->Z, sc->C, p);
  EXPECT_LE(st.grad_z_norm, 1e-8);
  EXPECT_LE(st.c_kkt_residual, 1e-8);
  AdamState adam;
  const ZUpdate zu = update_Z(prior().decoder, sc->Z, sc->C, p, DowJonsConfig{}, adam);
  EXPECT_LE((zu.Z - sc->Z).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(zu.objective, objective(prior().decoder, sc->Z, sc->C, p));
}

TEST(UpdateZ, NeverIncreasesObjective) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 50; ++t) {
    const RandomState s = random_state(gen, 6, 3, 14);
    AdamState adam;
    const ZUpdate zu = update_Z(prior().decoder, s.Z, s.C, s.p, DowJonsConfig{}, adam);
    const double before = objective(prior().decoder, s.Z, s.C, s.p);
    EXPECT_LE(zu.objective, before);
    EXPECT_DOUBLE_EQ(zu.objective, objective(prior().decoder, zu.Z, s.C, s.p));
  }
}

TEST(DowJons, TraceIsMonotone) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto sc = testutil::in_model_scene(prior(), 10, 3, 0.25, seed % 2 == 0, seed);
    ASSERT_TRUE(sc.has_value());
    const DowJonsResult res = dowjons(sc->obs, 3, prior());
    ASSERT_GE(res.trace.size(), 2u);
    EXPECT_EQ(res.trace.front().iteration, 0);
    for (size_t k = 1; k < res.trace.size(); ++k) EXPECT_LE(res.trace[k].objective, res.trace[k - 1].objective);
    EXPECT_TRUE(res.completion.estimate.unfolded() ==
                assemble(res.completion.slfs, res.completion.psds).unfolded());
  }
}

TEST(DowJons, FitsSensedFibersBetterThanNasdac) {
  DowJonsConfig cfg;
  cfg.max_iterations = 30;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto sc = testutil::in_model_scene(prior(), 10, 2, 0.3, false, seed + 20);
    ASSERT_TRUE(sc.has_value());
    const CompletionResult n = nasdac(sc->obs, 2, prior());
    const Matrix G = extract_G(sc->obs);
    Matrix fit = Matrix::Zero(G.rows(), G.cols());
    for (int r = 0; r < 2; ++r) {
      const Vector s = n.slfs[r].vec();
      for (size_t m = 0; m < sc->mask.columns().size(); ++m)
        fit.col(static_cast<Eigen::Index>(m)) += n.psds[r].values() * s(sc->mask.columns()[m]);
    }
    const double f_nasdac = (G - fit).squaredNorm();
    const DowJonsResult d = dowjons(sc->obs, 2, prior(), cfg);
    EXPECT_LT(d.trace.back().objective, 0.5 * f_nasdac) << "seed " << seed;
  }
}

TEST(DowJons, StopsOnRelativeChange) {
  const auto sc = testutil::in_model_scene(prior(), 10, 2, 0.25, true, 30);
  ASSERT_TRUE(sc.has_value());
  DowJonsConfig cfg;
  cfg.tolerance = 0.5;
  const DowJonsResult res = dowjons(sc->obs, 2, prior(), cfg);
  EXPECT_LE(res.trace.size(), 3u);
  cfg.max_iterations = 1;
  cfg.tolerance = 1e-300;
  EXPECT_EQ(dowjons(sc->obs, 2, prior(), cfg).trace.size(), 2u);
}

TEST(DowJons, ConfigValidation) {
  DowJonsConfig cfg;
  cfg.max_iterations = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.inner_steps = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(DowJons, TraceCsv) {
  std::ostringstream os;
  write_trace_csv(os, {{0, 2.5, 1.0, 0.0, 0.1}, {1, 1.5, 0.5, 0.0, 0.2}});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iteration,objective,grad_z_norm,c_kkt_residual,seconds");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 6), "0,2.5,");
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 2);
}
