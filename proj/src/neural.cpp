#include "wellrl/neural.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace wellrl {

namespace {

constexpr char kMagic[8] = {'W', 'R', 'L', 'C', 'K', 'P', 'T', '1'};

void orthogonal(Eigen::Map<Eigen::MatrixXd> w, double gain, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool wide = w.rows() < w.cols();
  const Eigen::Index r = wide ? w.cols() : w.rows();
  const Eigen::Index c = wide ? w.rows() : w.cols();
  Eigen::MatrixXd g(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  const Eigen::MatrixXd rr = qr.matrixQR().topLeftCorner(c, c);
  for (Eigen::Index j = 0; j < c; ++j)
    if (rr(j, j) < 0.0) q.col(j) *= -1.0;
  if (wide) w = gain * q.transpose();
  else w = gain * q;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

ActorCritic::ActorCritic(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  Eigen::Index off = 0;
  auto take = [&](Eigen::Index rows, Eigen::Index cols) {
    Block b{off, rows, cols};
    off += rows * cols;
    return b;
  };
  for (std::size_t l = 0; l + 2 < sizes_.size(); ++l) {
    trunk_w_.push_back(take(sizes_[l + 1], sizes_[l]));
    trunk_b_.push_back(take(sizes_[l + 1], 1));
  }
  const Eigen::Index hidden = sizes_[sizes_.size() - 2];
  const Eigen::Index na = sizes_.back();
  actor_w_ = take(na, hidden);
  actor_b_ = take(na, 1);
  critic_w_ = take(1, hidden);
  critic_b_ = take(1, 1);
  log_std_ = take(na, 1);
  params_ = Eigen::VectorXd::Zero(off);
}

Eigen::Map<const Eigen::MatrixXd> ActorCritic::view(const Block& b) const {
  return {params_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<Eigen::MatrixXd> ActorCritic::view(const Block& b) {
  return {params_.data() + b.offset, b.rows, b.cols};
}

void ActorCritic::initialize(Rng& rng, double log_std_init) {
  params_.setZero();
  for (const auto& w : trunk_w_) orthogonal(view(w), std::numbers::sqrt2, rng);
  orthogonal(view(actor_w_), 0.01, rng);
  orthogonal(view(critic_w_), 1.0, rng);
  view(log_std_).setConstant(log_std_init);
}

Eigen::Map<const Eigen::VectorXd> ActorCritic::log_std() const {
  return {params_.data() + log_std_.offset, log_std_.rows};
}

ActorCritic::Output ActorCritic::forward(const Eigen::MatrixXd& obs, Tape* tape) const {
  if (obs.rows() != input_dim())
    throw std::invalid_argument("observation dim " + std::to_string(obs.rows()) + " != network input " +
                                std::to_string(input_dim()));
  Eigen::MatrixXd h = obs;
  if (tape) {
    tape->activations.clear();
    tape->activations.push_back(h);
  }
  for (std::size_t l = 0; l < trunk_w_.size(); ++l) {
    Eigen::MatrixXd z = view(trunk_w_[l]) * h;
    z.colwise() += view(trunk_b_[l]).col(0);
    h = z.array().tanh().matrix();
    if (tape) tape->activations.push_back(h);
  }
  Output out;
  out.mean = view(actor_w_) * h;
  out.mean.colwise() += view(actor_b_).col(0);
  out.value = (view(critic_w_) * h).transpose();
  out.value.array() += params_[critic_b_.offset];
  return out;
}

Eigen::VectorXd ActorCritic::backward(const Tape& tape, const Eigen::MatrixXd& d_mean,
                                      const Eigen::VectorXd& d_value,
                                      const Eigen::VectorXd& d_log_std) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  auto g = [&](const Block& b) { return Eigen::Map<Eigen::MatrixXd>(grad.data() + b.offset, b.rows, b.cols); };
  const Eigen::MatrixXd& h_last = tape.activations.back();

  g(actor_w_) = d_mean * h_last.transpose();
  g(actor_b_) = d_mean.rowwise().sum();
  g(critic_w_) = d_value.transpose() * h_last.transpose();
  grad[critic_b_.offset] = d_value.sum();
  g(log_std_) = d_log_std;

  Eigen::MatrixXd dh = view(actor_w_).transpose() * d_mean + view(critic_w_).transpose() * d_value.transpose();
  for (std::size_t l = trunk_w_.size(); l-- > 0;) {
    const Eigen::MatrixXd& h = tape.activations[l + 1];
    const Eigen::MatrixXd dz = (dh.array() * (1.0 - h.array().square())).matrix();
    g(trunk_w_[l]) = dz * tape.activations[l].transpose();
    g(trunk_b_[l]) = dz.rowwise().sum();
    if (l > 0) dh = view(trunk_w_[l]).transpose() * dz;
  }
  return grad;
}

std::vector<double> ActorCritic::mean_action(std::span<const double> obs) const {
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const Output out = forward(x);
  return {out.mean.data(), out.mean.data() + out.mean.size()};
}

double ActorCritic::value(std::span<const double> obs) const {
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  return forward(x).value[0];
}

GaussianTerms gaussian_logprob_entropy(const Eigen::MatrixXd& mean, const Eigen::VectorXd& log_std,
                                       const Eigen::MatrixXd& action) {
  if (mean.rows() != log_std.size() || mean.rows() != action.rows() || mean.cols() != action.cols())
    throw std::invalid_argument("Gaussian shapes do not match");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
  const double log_std_sum = log_std.sum();
  GaussianTerms t;
  const Eigen::ArrayXXd z = (action - mean).array().colwise() * inv_std;
  t.logp = (-0.5 * z.square().colwise().sum()).matrix().transpose();
  t.logp.array() -= log_std_sum + half_log_2pi * static_cast<double>(mean.rows());
  t.entropy = Eigen::VectorXd::Constant(mean.cols(),
                                        static_cast<double>(mean.rows()) * (0.5 + half_log_2pi) + log_std_sum);
  return t;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("Adam buffer shape mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void save_checkpoint(const std::filesystem::path& path, const ActorCritic& net, const CheckpointInfo& info) {
  nlohmann::json header = {
      {"format", "wellrl-checkpoint"},
      {"version", 1},
      {"layer_sizes", net.layer_sizes()},
      {"parameter_count", net.parameter_count()},
      {"step_count", info.step_count},
      {"seed", info.seed},
      {"tag", info.tag},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double v : net.parameters()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error(path.string() + ": not a checkpoint");
  const std::uint64_t len = get_u64(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header");
  const auto header = nlohmann::json::parse(text);
  ActorCritic net(header.at("layer_sizes").get<std::vector<int>>());
  if (header.at("parameter_count").get<std::size_t>() != net.parameter_count())
    throw std::runtime_error("checkpoint parameter count does not match architecture");
  for (Eigen::Index k = 0; k < net.parameters().size(); ++k) {
    const std::uint64_t bits = get_u64(in);
    std::memcpy(&net.parameters()[k], &bits, sizeof bits);
  }
  CheckpointInfo info{header.at("step_count").get<std::int64_t>(), header.at("seed").get<std::uint64_t>(),
                      header.value("tag", std::string{})};
  return {std::move(net), info};
}

}  // namespace wellrl
