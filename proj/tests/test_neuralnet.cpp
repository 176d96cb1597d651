#include <cmath>

#include <gtest/gtest.h>

#include "aldsurv/models.hpp"
#include "aldsurv/neuralnet.hpp"

using namespace aldsurv;

namespace {

MlpConfig small_config(std::size_t in, std::vector<std::size_t> hidden, std::vector<Activation> heads,
                       bool residual = false) {
  MlpConfig c;
  c.input_dim = in;
  c.hidden_dims = std::move(hidden);
  c.heads = std::move(heads);
  c.dropout_rate = 0.0;
  c.residual = residual;
  return c;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-1.5, 1.5);
  return m;
}

// Mean ALD loss of the whole network on (x, targets), with gradients.
struct EndToEnd {
  MlpConfig cfg;
  Eigen::MatrixXd x;
  detail::AldObjective objective;
  std::vector<std::size_t> rows;

  double value(const MlpParams& p) {
    const Eigen::MatrixXd out = forward_batch(p, cfg, x, false, nullptr);
    return objective.loss(out, rows, nullptr);
  }

  std::vector<double> gradient(const MlpParams& p) {
    ForwardCache cache;
    const Eigen::MatrixXd out = forward_batch(p, cfg, x, false, nullptr, &cache);
    Eigen::MatrixXd g(out.rows(), out.cols());
    objective.loss(out, rows, &g);
    return backward(cache, g, p, cfg).flatten();
  }
};

void expect_fd_match(EndToEnd& problem, MlpParams params, double rel) {
  const std::vector<double> analytic = problem.gradient(params);
  std::vector<double> flat = params.flatten();
  const double h = 1e-6;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + h;
    params.assign(flat);
    const double up = problem.value(params);
    flat[i] = saved - h;
    params.assign(flat);
    const double down = problem.value(params);
    flat[i] = saved;
    params.assign(flat);
    const double fd = (up - down) / (2 * h);
    EXPECT_NEAR(analytic[i], fd, rel * std::max(1.0, std::abs(fd))) << "parameter " << i;
  }
}

EndToEnd make_problem(const MlpConfig& cfg, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  EndToEnd e{cfg, random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.input_dim), rng), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    e.objective.targets.push_back({rng.uniform(0.2, 3.0), rng.bernoulli(0.6)});
    e.rows.push_back(i);
  }
  return e;
}

}  // namespace

TEST(Forward, ZeroNetworkWithExpHeadsOutputsOne) {
  const auto cfg = small_config(3, {4, 4}, {Activation::exp, Activation::exp, Activation::exp});
  const auto p = MlpParams::zeros(cfg);
  const std::vector<double> x{0.3, -2.0, 5.0};
  for (double v : forward(x, p, cfg)) EXPECT_EQ(v, 1.0);
}

TEST(Forward, InferenceIsDeterministic) {
  auto cfg = small_config(2, {8, 8}, {Activation::identity, Activation::softplus}, true);
  cfg.dropout_rate = 0.5;
  Rng rng(1);
  const auto p = MlpParams::initialize(cfg, rng);
  const Eigen::MatrixXd x = random_matrix(5, 2, rng);
  const Eigen::MatrixXd a = forward_batch(p, cfg, x, false, nullptr);
  const Eigen::MatrixXd b = forward_batch(p, cfg, x, false, nullptr);
  EXPECT_TRUE(a == b);
}

TEST(Forward, HandComputedOneLayer) {
  const auto cfg = small_config(2, {2}, {Activation::identity});
  auto p = MlpParams::zeros(cfg);
  p.hidden[0].weight << 1.0, -1.0, 0.5, 2.0;
  p.hidden[0].bias << 0.0, -1.0;
  p.head.weight << 2.0, 1.0;
  p.head.bias << 0.5;
  // pre = (1 - 2, 0.5 + 4 - 1) = (-1, 3.5); relu = (0, 3.5); out = 0 + 3.5 + 0.5.
  EXPECT_DOUBLE_EQ(forward(std::vector<double>{1.0, 2.0}, p, cfg)[0], 4.0);
}

TEST(Forward, ResidualAddsInputToFirstLayer) {
  auto cfg = small_config(2, {2}, {Activation::identity}, true);
  auto p = MlpParams::zeros(cfg);
  p.head.weight << 1.0, 10.0;
  // Hidden layer is dead (zero weights); only the identity skip carries x.
  EXPECT_DOUBLE_EQ(forward(std::vector<double>{3.0, -1.0}, p, cfg)[0], 3.0 - 10.0);

  cfg = small_config(1, {2}, {Activation::identity}, true);
  p = MlpParams::zeros(cfg);
  ASSERT_EQ(p.skip.rows(), 2);
  p.skip << 2.0, -1.0;
  p.head.weight << 1.0, 1.0;
  EXPECT_DOUBLE_EQ(forward(std::vector<double>{4.0}, p, cfg)[0], 4.0);
}

TEST(Forward, SoftplusHeadIsPositive) {
  const auto cfg = small_config(1, {4}, {Activation::softplus});
  auto p = MlpParams::zeros(cfg);
  p.head.bias << -800.0;
  EXPECT_GT(forward(std::vector<double>{0.0}, p, cfg)[0], 0.0);
}

TEST(Forward, RejectsWrongInputWidth) {
  const auto cfg = small_config(3, {4}, {Activation::exp});
  const auto p = MlpParams::zeros(cfg);
  EXPECT_THROW(forward(std::vector<double>{1.0}, p, cfg), std::invalid_argument);
}

TEST(Backward, FinalBiasGradientIsActivationDerivative) {
  const auto cfg = small_config(2, {3}, {Activation::exp, Activation::softplus, Activation::identity});
  Rng rng(3);
  const auto p = MlpParams::initialize(cfg, rng);
  const Eigen::MatrixXd x = random_matrix(1, 2, rng);
  ForwardCache cache;
  const Eigen::MatrixXd out = forward_batch(p, cfg, x, false, nullptr, &cache);
  const auto g = backward(cache, Eigen::MatrixXd::Ones(1, 3), p, cfg);
  const double z1 = cache.head_pre(0, 1);
  EXPECT_NEAR(g.head.bias(0), out(0, 0), 1e-15);
  EXPECT_NEAR(g.head.bias(1), 1.0 / (1.0 + std::exp(-z1)), 1e-15);
  EXPECT_NEAR(g.head.bias(2), 1.0, 1e-15);
}

TEST(Backward, FiveParameterToyMatchesFiniteDifferences) {
  // 2 inputs -> 1 ReLU unit -> 1 identity head: 2 + 1 + 1 + 1 parameters,
  // scored by half the squared error against fixed targets.
  const auto cfg = small_config(2, {1}, {Activation::identity});
  auto p = MlpParams::zeros(cfg);
  p.hidden[0].weight << 0.7, -0.4;
  p.hidden[0].bias << 0.9;
  p.head.weight << 1.3;
  p.head.bias << -0.2;
  ASSERT_EQ(p.parameter_count(), 5u);
  Eigen::MatrixXd x(3, 2);
  x << 0.5, 1.0, -1.0, 0.2, 1.5, -0.5;
  const Eigen::Vector3d target(1.0, -0.5, 2.0);
  auto loss = [&](const MlpParams& q) {
    return 0.5 * (forward_batch(q, cfg, x, false, nullptr).col(0) - target).squaredNorm();
  };
  ForwardCache cache;
  const Eigen::MatrixXd out = forward_batch(p, cfg, x, false, nullptr, &cache);
  const auto analytic = backward(cache, out - target, p, cfg).flatten();
  auto flat = p.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    auto up = flat, down = flat;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    MlpParams pu = p, pd = p;
    pu.assign(up);
    pd.assign(down);
    const double fd = (loss(pu) - loss(pd)) / 2e-6;
    EXPECT_NEAR(analytic[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "parameter " << i;
  }
}

TEST(Backward, AldHeadsMatchFiniteDifferences) {
  const auto cfg = small_config(1, {1}, {Activation::exp, Activation::exp, Activation::exp});
  auto problem = make_problem(cfg, 6, 4);
  auto p = MlpParams::zeros(cfg);
  p.hidden[0].weight << 0.8;
  p.hidden[0].bias << 0.3;
  p.head.weight << 0.2, -0.1, 0.05;
  p.head.bias << 0.1, -0.2, 0.3;
  expect_fd_match(problem, p, 1e-4);
}

TEST(Backward, DeepResidualNetworkMatchesFiniteDifferences) {
  auto cfg = small_config(3, {5, 4}, {Activation::exp, Activation::exp, Activation::exp}, true);
  auto problem = make_problem(cfg, 12, 5);
  Rng rng(6);
  auto p = MlpParams::initialize(cfg, rng);
  p.head.weight *= 10.0;
  expect_fd_match(problem, p, 1e-4);

  cfg = small_config(3, {3, 3}, {Activation::exp, Activation::exp, Activation::exp}, true);
  problem = make_problem(cfg, 12, 7);
  p = MlpParams::initialize(cfg, rng);
  p.head.weight *= 10.0;
  expect_fd_match(problem, p, 1e-4);
}

TEST(Backward, DeadReluPathHasZeroGradient) {
  const auto cfg = small_config(2, {3}, {Activation::identity});
  Rng rng(8);
  auto p = MlpParams::initialize(cfg, rng);
  p.hidden[0].bias(1) = -100.0;  // unit 1 never fires on inputs in [-1.5, 1.5]
  p.head.weight << 1.0, 1.0, 1.0;
  const Eigen::MatrixXd x = random_matrix(10, 2, rng);
  ForwardCache cache;
  forward_batch(p, cfg, x, false, nullptr, &cache);
  const auto g = backward(cache, Eigen::MatrixXd::Ones(10, 1), p, cfg);
  EXPECT_EQ(g.hidden[0].weight.row(1).norm(), 0.0);
  EXPECT_EQ(g.hidden[0].bias(1), 0.0);
  EXPECT_EQ(g.head.weight(0, 1), 0.0);
}

TEST(Backward, RejectsStaleCache) {
  const auto cfg = small_config(1, {2}, {Activation::identity});
  Rng rng(9);
  auto p = MlpParams::initialize(cfg, rng);
  ForwardCache cache;
  forward_batch(p, cfg, Eigen::MatrixXd::Ones(1, 1), false, nullptr, &cache);
  p.assign(p.flatten());
  EXPECT_THROW(backward(cache, Eigen::MatrixXd::Ones(1, 1), p, cfg), std::logic_error);
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  std::vector<double> params{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> grads{0.3, -7.0, 1e-3, 0.0};
  std::vector<double> m(4, 0.0), v(4, 0.0);
  const AdamOptions opt{.learning_rate = 0.01};
  adam_update(params, grads, m, v, 1, opt);
  EXPECT_NEAR(params[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(params[1], -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(params[2], 0.5 - 0.01, 1e-7);
  EXPECT_EQ(params[3], 3.0);
}

TEST(Adam, QuadraticConverges) {
  // f(p) = (p - 1.5)^2 has its minimum at 1.5.
  std::vector<double> p{-2.0}, m{0.0}, v{0.0};
  const AdamOptions opt{.learning_rate = 0.1};
  for (std::uint64_t t = 1; t <= 200; ++t) adam_update(p, std::vector<double>{2 * (p[0] - 1.5)}, m, v, t, opt);
  EXPECT_NEAR(p[0], 1.5, 1e-3);
}

TEST(Adam, WeightDecayFoldsIntoGradient) {
  std::vector<double> p{2.0}, m{0.0}, v{0.0};
  adam_update(p, std::vector<double>{0.0}, m, v, 1, {.learning_rate = 0.1, .weight_decay = 0.5});
  EXPECT_NEAR(p[0], 1.9, 1e-8);
}

TEST(Train, SameSeedGivesIdenticalLogs) {
  Rng rng(10);
  const Eigen::MatrixXd x = random_matrix(80, 2, rng);
  detail::AldObjective obj;
  for (int i = 0; i < 80; ++i) obj.targets.push_back({1.0 + 0.5 * x(i, 0) * x(i, 0), rng.bernoulli(0.7)});
  MlpConfig cfg;
  cfg.input_dim = 2;
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 16;
  tc.seed = 77;
  auto obj2 = obj;
  const auto a = train(x, obj, cfg, tc);
  const auto b = train(x, obj2, cfg, tc);
  ASSERT_EQ(a.log.epochs.size(), b.log.epochs.size());
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
    EXPECT_EQ(a.log.epochs[i].train_loss, b.log.epochs[i].train_loss);
    EXPECT_EQ(a.log.epochs[i].validation_loss, b.log.epochs[i].validation_loss);
  }
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
  EXPECT_LE(a.log.best_validation_loss, a.log.epochs.front().validation_loss);
  EXPECT_EQ(a.log.epochs.front().epoch, 0u);
  EXPECT_EQ(a.log.train_size + a.log.validation_size, 80u);
}

TEST(Train, RestoredParametersReproduceBestValidationLoss) {
  Rng rng(11);
  const Eigen::MatrixXd x = random_matrix(60, 1, rng);
  detail::AldObjective obj;
  for (int i = 0; i < 60; ++i) obj.targets.push_back({2.0 + x(i, 0), true});
  MlpConfig cfg;
  cfg.input_dim = 1;
  cfg.dropout_rate = 0.0;
  TrainConfig tc;
  tc.epochs = 30;
  tc.seed = 3;
  const auto net = train(x, obj, cfg, tc);
  const auto& best = net.log.epochs[net.log.best_epoch];
  EXPECT_EQ(best.validation_loss, net.log.best_validation_loss);
  EXPECT_LE(net.log.best_validation_loss, net.log.epochs.front().validation_loss);
}

TEST(Train, RejectsBadConfiguration) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  detail::AldObjective obj;
  obj.targets.assign(4, {1.0, true});
  MlpConfig cfg;
  cfg.input_dim = 2;
  EXPECT_THROW(train(x, obj, cfg, TrainConfig{}), std::invalid_argument);
  cfg.input_dim = 1;
  TrainConfig tc;
  tc.validation_fraction = 1.0;
  EXPECT_THROW(train(x, obj, cfg, tc), std::invalid_argument);
}
