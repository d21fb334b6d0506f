#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "wellrl/neural.hpp"

using namespace wellrl;

namespace {

ActorCritic make_net(std::vector<int> sizes, std::uint64_t seed, double log_std = -0.3) {
  ActorCritic net(std::move(sizes));
  Rng rng = make_rng(seed);
  net.initialize(rng, log_std);
  // Non-zero biases so their gradients are exercised too.
  std::normal_distribution<double> n(0.0, 0.1);
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i)
    if (net.parameters()[i] == 0.0) net.parameters()[i] = n(rng);
  return net;
}

}  // namespace

TEST(ActorCritic, ParameterCount) {
  ActorCritic net({3, 4, 2});
  // trunk 4x3+4, actor 2x4+2, critic 1x4+1, log_std 2
  EXPECT_EQ(net.parameter_count(), 16u + 10u + 5u + 2u);
}

TEST(ActorCritic, OrthogonalInit) {
  ActorCritic net({3, 5, 2});
  Rng rng = make_rng(1);
  net.initialize(rng, -1.0);
  // First trunk W is 5x3 column-major at offset 0: columns orthonormal times sqrt(2).
  Eigen::Map<const Eigen::MatrixXd> w(net.parameters().data(), 5, 3);
  Eigen::MatrixXd wtw = w.transpose() * w;
  EXPECT_TRUE(wtw.isApprox(2.0 * Eigen::MatrixXd::Identity(3, 3), 1e-12));
  for (int i = 0; i < 2; ++i) EXPECT_EQ(net.log_std()[i], -1.0);
}

TEST(ActorCritic, BackwardMatchesFiniteDifferences) {
  ActorCritic net = make_net({3, 4, 5, 2}, 7);
  Rng rng = make_rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd obs(3, 6), dm(2, 6);
  Eigen::VectorXd dv(6), ds(2);
  for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < dm.size(); ++i) dm.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < 6; ++i) dv[i] = n(rng);
  ds << n(rng), n(rng);

  auto loss = [&](const ActorCritic& m) {
    auto out = m.forward(obs);
    return (dm.array() * out.mean.array()).sum() + dv.dot(out.value) + ds.dot(Eigen::VectorXd(m.log_std()));
  };
  ActorCritic::Tape tape;
  net.forward(obs, &tape);
  const Eigen::VectorXd g = net.backward(tape, dm, dv, ds);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    ActorCritic p = net, q = net;
    p.parameters()[i] += h;
    q.parameters()[i] -= h;
    const double fd = (loss(p) - loss(q)) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-7 * std::max(1.0, std::abs(fd))) << "parameter " << i;
  }
}

TEST(Gaussian, LogProbAndEntropyOracle) {
  Eigen::MatrixXd mean(2, 1), act(2, 1);
  mean << 0.3, -1.0;
  act << 0.1, -0.5;
  Eigen::VectorXd ls(2);
  ls << -0.5, 0.2;
  GaussianTerms t = gaussian_logprob_entropy(mean, ls, act);
  double lp = 0.0, ent = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double s = std::exp(ls[i]);
    lp += -0.5 * std::pow((act(i, 0) - mean(i, 0)) / s, 2) - std::log(s) - 0.5 * std::log(2 * std::numbers::pi);
    ent += 0.5 + 0.5 * std::log(2 * std::numbers::pi) + ls[i];
  }
  EXPECT_NEAR(t.logp[0], lp, 1e-14);
  EXPECT_NEAR(t.entropy[0], ent, 1e-14);
}

TEST(Adam, TwoStepsByHand) {
  Adam opt(1, 0.1);
  Eigen::VectorXd x(1), g(1);
  x << 1.0;
  g << 2.0;
  opt.step(x, g);
  // Bias-corrected first step moves by lr * g / (|g| + eps).
  EXPECT_NEAR(x[0], 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-12);
  g << -1.0;
  opt.step(x, g);
  const double m = 0.9 * 0.1 * 2.0 + 0.1 * -1.0;
  const double v = 0.999 * 0.001 * 4.0 + 0.001 * 1.0;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(x[0], 1.0 - 0.1 * 2.0 / (2.0 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-12);
  EXPECT_EQ(opt.steps(), 2);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ActorCritic net = make_net({9, 20, 20, 4}, 3);
  const auto path = std::filesystem::temp_directory_path() / "wellrl_unit.ckpt";
  save_checkpoint(path, net, {123, 7, "unit"});
  {
    std::ifstream in(path, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    EXPECT_EQ(std::string(magic, 8), "WRLCKPT1");
  }
  LoadedCheckpoint ld = load_checkpoint(path);
  EXPECT_EQ(ld.net.layer_sizes(), net.layer_sizes());
  EXPECT_EQ(ld.info.step_count, 123);
  EXPECT_EQ(ld.info.seed, 7u);
  EXPECT_EQ(ld.info.tag, "unit");
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) ASSERT_EQ(ld.net.parameters()[i], net.parameters()[i]);

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  { std::ofstream(path, std::ios::binary) << "NOTACKPTxxxxxxxx"; }
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}
