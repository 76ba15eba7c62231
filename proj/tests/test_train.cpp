#include <cmath>

#include <gtest/gtest.h>

#include "sgl0/error.hpp"
#include "sgl0/regularizers.hpp"
#include "sgl0/train.hpp"
#include "toy.hpp"

using namespace sgl0;

namespace {

struct Blobs {
  Dataset train = make_synthetic(3, 6, 40, 5);
  Dataset test = make_synthetic(3, 6, 20, 5, 0.15, Split::test);
  NetworkParams net() const {
    const std::vector<std::size_t> sizes{6, 10, 3};
    return build_mlp(sizes, 2);
  }
};

TrainConfig small_config(RegularizerKind kind, double lambda) {
  TrainConfig c;
  c.regularizer = {kind, lambda};
  c.beta0 = 0.5;
  c.sigma = 1.5;
  c.beta_interval = 2;
  c.optimizer.learning_rate = 0.01;
  c.optimizer.lr_decay = 0.5;
  c.optimizer.lr_decay_interval = 3;
  c.epochs = 7;
  c.batch_size = 16;
  c.probe_size = 32;
  return c;
}

}  // namespace

TEST(Algorithm1, RecordsAndSchedules) {
  Blobs b;
  const TrainConfig c = small_config(RegularizerKind::sparse_group_l0asso, 1e-3);
  std::size_t observed = 0;
  const TrainResult r = run_algorithm1(b.net(), b.train, &b.test, c,
                                       [&](const TrainRecord& rec, const NetworkParams&) { EXPECT_EQ(rec.epoch, ++observed); });
  ASSERT_EQ(r.records.size(), 7u);
  EXPECT_EQ(observed, 7u);
  const double betas[] = {0.5, 0.5, 0.75, 0.75, 1.125, 1.125, 1.6875};
  const double lrs[] = {0.01, 0.01, 0.01, 0.005, 0.005, 0.005, 0.0025};
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(r.records[i].epoch, i + 1);
    EXPECT_DOUBLE_EQ(r.records[i].beta, betas[i]);
    EXPECT_DOUBLE_EQ(r.records[i].learning_rate, lrs[i]);
    EXPECT_TRUE(std::isfinite(r.records[i].f_beta));
    EXPECT_GE(r.records[i].weight_sparsity, 0.0);
  }
  ASSERT_EQ(r.boundaries.size(), 3u);
  EXPECT_EQ(r.boundaries[0].epoch, 2u);
  EXPECT_EQ(r.boundaries[2].outer_iteration, 3u);
  EXPECT_DOUBLE_EQ(r.final_beta, 0.5 * 1.5 * 1.5 * 1.5);
  EXPECT_EQ(r.aux.size(), 2u);
}

TEST(Algorithm1, MnistBetaAfterFirstBoundary) {
  Blobs b;
  TrainConfig c = small_config(RegularizerKind::sparse_group_l0asso, 0.1 / 60000);
  c.beta0 = 2.5 / 60000;
  c.sigma = 1.25;
  c.beta_interval = 1;
  c.epochs = 1;
  const TrainResult r = run_algorithm1(b.net(), b.train, nullptr, c);
  EXPECT_NEAR(r.final_beta, 3.125 / 60000, 1e-20);
  EXPECT_TRUE(std::isnan(r.records[0].test_error));
}

TEST(Algorithm1, DisabledCouplingEqualsPlainTraining) {
  Blobs b;
  TrainConfig c = small_config(RegularizerKind::sparse_group_l0asso, 0.0);
  c.beta0 = 0.0;
  c.optimizer.method = OptimizerMethod::sgd;
  const TrainResult pd = run_algorithm1(b.net(), b.train, &b.test, c);
  c.regularizer = {RegularizerKind::none, 0.0};
  const TrainResult plain = run_baseline(b.net(), b.train, &b.test, c);
  EXPECT_TRUE(pd.net == plain.net);
}

TEST(Algorithm1, Deterministic) {
  Blobs b;
  const TrainConfig c = small_config(RegularizerKind::sparse_group_l0asso, 1e-3);
  const TrainResult x = run_algorithm1(b.net(), b.train, &b.test, c);
  const TrainResult y = run_algorithm1(b.net(), b.train, &b.test, c);
  EXPECT_TRUE(x.net == y.net);
  for (std::size_t i = 0; i < x.records.size(); ++i) {
    EXPECT_EQ(x.records[i].f_beta, y.records[i].f_beta);
    EXPECT_EQ(x.records[i].train_loss, y.records[i].train_loss);
    EXPECT_EQ(x.records[i].weight_sparsity, y.records[i].weight_sparsity);
  }
}

TEST(Algorithm1, PlainL0HasNoGroupTerm) {
  Blobs b;
  TrainConfig c = small_config(RegularizerKind::l0, 1e-3);
  c.epochs = 2;
  const TrainResult l0 = run_algorithm1(b.net(), b.train, nullptr, c);
  c.regularizer.kind = RegularizerKind::sparse_group_l0asso;
  const TrainResult sgl0 = run_algorithm1(b.net(), b.train, nullptr, c);
  EXPECT_FALSE(l0.net == sgl0.net);
}

TEST(Algorithm1, ExactInnerSolverIsMonotone) {
  const Dataset d = regression_toy();
  TrainConfig c;
  c.regularizer = {RegularizerKind::sparse_group_l0asso, 0.05};
  c.beta0 = 10.0;
  c.sigma = 2.0;
  c.beta_interval = 1000;
  c.epochs = 25;
  c.inner_solver = InnerSolver::exact;
  c.probe_size = d.size();
  const TrainResult r = run_algorithm1(linear_net(), d, nullptr, c);
  for (std::size_t i = 1; i < r.records.size(); ++i) EXPECT_LE(r.records[i].f_beta, r.records[i - 1].f_beta + 1e-10);
}

TEST(Algorithm1, RejectsWrongKindsAndParameters) {
  Blobs b;
  EXPECT_THROW(run_algorithm1(b.net(), b.train, nullptr, small_config(RegularizerKind::group_lasso, 1e-3)),
               ConfigError);
  TrainConfig c = small_config(RegularizerKind::sparse_group_l0asso, 1e-3);
  c.sigma = 1.0;
  EXPECT_THROW(run_algorithm1(b.net(), b.train, nullptr, c), ConfigError);
  c = small_config(RegularizerKind::sparse_group_l0asso, 1e-3);
  c.beta0 = 0.0;
  EXPECT_THROW(run_algorithm1(b.net(), b.train, nullptr, c), ConfigError);
  c = small_config(RegularizerKind::sparse_group_l0asso, 1e-3);
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Algorithm1, DivergenceIsReported) {
  Blobs b;
  TrainConfig c = small_config(RegularizerKind::sparse_group_l0asso, 1e-3);
  c.optimizer.method = OptimizerMethod::sgd;
  c.optimizer.learning_rate = 1e200;
  try {
    run_algorithm1(b.net(), b.train, nullptr, c);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1u);
  }
}

TEST(Baseline, LambdaZeroIsVanilla) {
  Blobs b;
  TrainConfig c = small_config(RegularizerKind::group_lasso, 0.0);
  const TrainResult gl = run_baseline(b.net(), b.train, nullptr, c);
  c.regularizer.kind = RegularizerKind::none;
  const TrainResult none = run_baseline(b.net(), b.train, nullptr, c);
  EXPECT_TRUE(gl.net == none.net);
  for (const auto& r : gl.records) EXPECT_EQ(r.beta, 0.0);
}

TEST(Baseline, HugeGroupLassoShrinksGroups) {
  Blobs b;
  TrainConfig c = small_config(RegularizerKind::group_lasso, 1.0);
  c.optimizer.lr_decay_interval = 0;
  const NetworkParams start = b.net();
  const TrainResult r = run_baseline(start, b.train, nullptr, c);
  const RegularizerSpec gl{RegularizerKind::group_lasso, 1.0};
  EXPECT_LT(regularizer_value(gl, r.net), 0.25 * regularizer_value(gl, start));
}

TEST(Baseline, SglDecompositionEveryEpoch) {
  Blobs b;
  const TrainConfig c = small_config(RegularizerKind::sparse_group_lasso, 1e-3);
  std::size_t checked = 0;
  run_baseline(b.net(), b.train, nullptr, c, [&](const TrainRecord&, const NetworkParams& net) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto w = net.layers[l].weight.values();
      EXPECT_EQ(sgl_value(w, net.partition.layers[l]), group_lasso_value(w, net.partition.layers[l]) + l1_value(w));
    }
    ++checked;
  });
  EXPECT_EQ(checked, c.epochs);
}

TEST(Baseline, RejectsPenaltyKinds) {
  Blobs b;
  EXPECT_THROW(run_baseline(b.net(), b.train, nullptr, small_config(RegularizerKind::sparse_group_l0asso, 1e-3)),
               ConfigError);
}

TEST(Train, DispatchesOnKind) {
  Blobs b;
  const TrainResult pd = train(b.net(), b.train, nullptr, small_config(RegularizerKind::l0, 1e-3));
  EXPECT_FALSE(pd.aux.empty());
  const TrainResult base = train(b.net(), b.train, nullptr, small_config(RegularizerKind::l1, 1e-3));
  EXPECT_TRUE(base.aux.empty());
}
