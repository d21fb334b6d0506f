#include "wellrl/well_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "wellrl/parallel.hpp"

namespace wellrl {

ReservoirProblem case1_problem(const Grid& grid) {
  return ReservoirProblem{grid, case1_wells(grid), 0.3, 125.0, 5, 10, 0.0};
}

ReservoirProblem case2_problem(const Grid& grid) {
  return ReservoirProblem{grid, case2_wells(grid), 0.3, 25.0, 5, 10, 0.0};
}

std::vector<double> weights_to_rates(std::span<const double> w, const WellSet& wells) {
  const int np = wells.producer_count();
  const int ni = wells.injector_count();
  if (static_cast<int>(w.size()) != np + ni) throw std::invalid_argument("weight vector size mismatch");
  const double c = wells.total_rate();
  double prod_sum = 0.0, inj_sum = 0.0;
  for (int i = 0; i < np; ++i) prod_sum += w[i];
  for (int i = 0; i < ni; ++i) inj_sum += w[np + i];
  std::vector<double> rates(np + ni);
  for (int i = 0; i < np; ++i) rates[i] = -(w[i] / prod_sum) * c;
  for (int i = 0; i < ni; ++i) rates[np + i] = (w[np + i] / inj_sum) * c;
  return rates;
}

ActionCodec::ActionCodec(const WellSet& wells)
    : producers_(wells.producer_count()),
      injectors_(wells.injector_count()),
      action_dim_(wells.injector_count() == 1 ? wells.producer_count() : wells.well_count()) {}

std::vector<double> ActionCodec::to_weights(std::span<const double> action) const {
  if (static_cast<int>(action.size()) != action_dim_)
    throw std::invalid_argument("action size " + std::to_string(action.size()) + " != " +
                                std::to_string(action_dim_));
  std::vector<double> w(producers_ + injectors_, kMaxWeight);
  for (int i = 0; i < action_dim_; ++i) {
    const double a = std::isfinite(action[i]) ? action[i] : kMinWeight;
    w[i] = std::clamp(a, kMinWeight, kMaxWeight);
  }
  return w;
}

std::shared_ptr<const FlowModel> make_flow_model(const ReservoirProblem& problem, const PermField& field) {
  return std::make_shared<const FlowModel>(problem.grid, field, problem.viscosity);
}

ScenarioPool make_pool(const ReservoirProblem& problem, std::span<const PermField> fields) {
  ScenarioPool pool;
  pool.reserve(fields.size());
  for (const auto& f : fields) pool.push_back(make_flow_model(problem, f));
  return pool;
}

WellEnv::WellEnv(std::shared_ptr<const ReservoirProblem> problem, ScenarioPool pool, EnvConfig config,
                 std::uint64_t seed)
    : problem_(std::move(problem)),
      pool_(std::move(pool)),
      config_(config),
      codec_(problem_->wells),
      rng_(make_rng(seed)) {
  if (pool_.empty()) throw std::invalid_argument("scenario pool is empty");
  if (problem_->control_steps < 1) throw std::invalid_argument("need at least one control step");
  for (const auto& m : pool_)
    if (!(m->grid() == problem_->grid)) throw std::invalid_argument("scenario grid does not match problem grid");
}

int WellEnv::observation_dim() const {
  if (config_.full_state) return problem_->grid.cell_count();
  return 2 * problem_->wells.producer_count() + problem_->wells.injector_count();
}

std::vector<double> WellEnv::reset() { return reset_to(uniform_index(rng_, pool_.size())); }

std::vector<double> WellEnv::reset_to(std::size_t scenario) {
  if (scenario >= pool_.size()) throw std::out_of_range("scenario index out of range");
  scenario_ = scenario;
  step_ = 0;
  started_ = true;
  state_.saturation.assign(problem_->grid.cell_count(), problem_->initial_saturation);
  last_weights_ = codec_.to_weights(codec_.base_action());
  last_rates_ = weights_to_rates(last_weights_, problem_->wells);
  state_.pressure =
      pool_[scenario_]->pressure_solver().solve(cell_sources(problem_->grid, problem_->wells, last_rates_));
  return observe();
}

Transition WellEnv::step(std::span<const double> action) {
  if (!started_) throw std::logic_error("step() before reset()");
  if (done()) throw std::logic_error("step() after episode end");
  last_weights_ = (config_.base_first_action && step_ == 0) ? codec_.to_weights(codec_.base_action())
                                                            : codec_.to_weights(action);
  last_rates_ = weights_to_rates(last_weights_, problem_->wells);
  const auto res = simulate_control_step(*pool_[scenario_], problem_->wells, state_, last_rates_,
                                         problem_->control_dt(), problem_->substeps, observer_);
  ++step_;
  Transition t;
  t.reward = res.oil_produced / problem_->grid.pore_volume();
  t.done = done();
  t.observation = observe();
  return t;
}

std::vector<double> WellEnv::observe() const {
  if (config_.full_state) return state_.saturation;
  const auto& wells = problem_->wells;
  const int np = wells.producer_count();
  const int ni = wells.injector_count();
  std::vector<double> obs(2 * np + ni);
  for (int i = 0; i < np; ++i) obs[i] = state_.saturation[wells.producers()[i]];
  std::vector<double> p(np + ni);
  for (int w = 0; w < np + ni; ++w) p[w] = state_.pressure.relative()[wells.cell_of(w)];
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
  double spread = 0.0;
  for (double v : p) spread = std::max(spread, std::abs(v - mean));
  for (int w = 0; w < np + ni; ++w) obs[np + w] = spread > 0.0 ? (p[w] - mean) / spread : 0.0;
  return obs;
}

Policy base_policy(int action_dim) {
  return [action_dim](std::span<const double>) { return std::vector<double>(action_dim, kMaxWeight); };
}

EpisodeTrace run_episode(const Policy& policy, std::shared_ptr<const ReservoirProblem> problem,
                         std::shared_ptr<const FlowModel> model, const EnvConfig& config) {
  WellEnv env(std::move(problem), ScenarioPool{std::move(model)}, config, 0);
  EpisodeTrace trace;
  std::vector<double> obs = env.reset_to(0);
  bool done = false;
  while (!done) {
    EpisodeStep s;
    s.observation = obs;
    s.action = policy(obs);
    Transition t = env.step(s.action);
    s.weights = env.last_weights();
    s.rates = env.last_rates();
    s.reward = t.reward;
    trace.total_return += t.reward;
    trace.steps.push_back(std::move(s));
    obs = std::move(t.observation);
    done = t.done;
  }
  return trace;
}

double episode_return(const Policy& policy, std::shared_ptr<const ReservoirProblem> problem,
                      std::shared_ptr<const FlowModel> model, const EnvConfig& config) {
  return run_episode(policy, std::move(problem), std::move(model), config).total_return;
}

std::vector<double> returns_over(const Policy& policy, std::shared_ptr<const ReservoirProblem> problem,
                                 const ScenarioPool& pool, const EnvConfig& config, int workers) {
  std::vector<double> out(pool.size());
  parallel_for(pool.size(), workers,
               [&](std::size_t k) { out[k] = episode_return(policy, problem, pool[k], config); });
  return out;
}

double mean_return_over(const Policy& policy, std::shared_ptr<const ReservoirProblem> problem,
                        const ScenarioPool& pool, const EnvConfig& config, int workers) {
  if (pool.empty()) throw std::invalid_argument("cannot average over an empty scenario vector");
  const auto r = returns_over(policy, std::move(problem), pool, config, workers);
  double sum = 0.0;
  for (double v : r) sum += v;
  return sum / static_cast<double>(r.size());
}

void write_trace_csv(const std::filesystem::path& path, const EpisodeTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  if (trace.steps.empty()) return;
  const auto& first = trace.steps.front();
  out << "step,reward";
  for (std::size_t i = 0; i < first.observation.size(); ++i) out << ",obs_" << i;
  for (std::size_t i = 0; i < first.action.size(); ++i) out << ",action_" << i;
  for (std::size_t i = 0; i < first.rates.size(); ++i) out << ",rate_" << i;
  out << '\n';
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& s = trace.steps[k];
    out << k + 1 << ',' << s.reward;
    for (double v : s.observation) out << ',' << v;
    for (double v : s.action) out << ',' << v;
    for (double v : s.rates) out << ',' << v;
    out << '\n';
  }
}

}  // namespace wellrl
