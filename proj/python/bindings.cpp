#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wellrl/config.hpp"
#include "wellrl/de_baseline.hpp"
#include "wellrl/error.hpp"
#include "wellrl/orchestrator.hpp"
#include "wellrl/rl_train.hpp"
#include "wellrl/scenario_cluster.hpp"

namespace py = pybind11;
using namespace wellrl;

namespace {

RunConfig config_from(const py::object& obj) {
  if (py::isinstance<py::str>(obj)) {
    const auto s = obj.cast<std::string>();
    for (const auto& p : preset_names())
      if (p == s) return preset(s);
    return load_run_config(s);
  }
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return parse_run_config(nlohmann::json::parse(text));
}

py::object config_dict(const RunConfig& cfg) {
  return py::module_::import("json").attr("loads")(to_json(cfg).dump());
}

CommandOptions options(const std::string& algo, std::optional<int> frozen, bool full_state) {
  CommandOptions o;
  o.algo = parse_algo(algo);
  o.frozen = frozen;
  o.full_state = full_state;
  return o;
}

std::vector<PermField> to_fields(const std::vector<std::vector<double>>& raw) {
  std::vector<PermField> f;
  for (const auto& r : raw) f.push_back(PermField{r});
  return f;
}

}  // namespace

PYBIND11_MODULE(_wellrl, m) {
  m.doc() = "Reservoir well-control environment, RL trainers and pipeline stages";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("preset_names", &preset_names);
  m.def("load_config", [](const py::object& src) { return config_dict(config_from(src)); }, py::arg("source"),
        "Resolve a preset name, a JSON file path or a dict into a validated config dict.");

  m.def("sample", [](const py::object& c) { return cmd_sample(config_from(c)).skipped; }, py::arg("config"));
  m.def("cluster", [](const py::object& c) { return cmd_cluster(config_from(c)).skipped; }, py::arg("config"));
  m.def(
      "train",
      [](const py::object& c, const std::string& algo, std::optional<int> frozen, bool full_state) {
        const RunConfig cfg = config_from(c);
        std::vector<StageOutcome> outcomes;
        {
          py::gil_scoped_release release;
          outcomes = cmd_train(cfg, options(algo, frozen, full_state));
        }
        std::vector<std::string> stages;
        for (const auto& o : outcomes)
          if (!o.skipped) stages.push_back(o.stage);
        return stages;
      },
      py::arg("config"), py::arg("algo") = "ppo", py::arg("frozen") = py::none(), py::arg("full_state") = false);
  m.def("benchmark", [](const py::object& c) { return cmd_benchmark(config_from(c)).skipped; }, py::arg("config"));
  m.def("evaluate", [](const py::object& c) { return cmd_evaluate(config_from(c)).skipped; }, py::arg("config"));
  m.def("report", [](const py::object& c) { cmd_report(config_from(c)); }, py::arg("config"));

  m.def(
      "accounting",
      [](const py::object& c) {
        py::list rows;
        for (const auto& r : accounting_table(config_from(c)))
          rows.append(py::dict(py::arg("algorithm") = r.algorithm, py::arg("formula") = r.formula,
                               py::arg("expected") = r.expected, py::arg("note") = r.note));
        return rows;
      },
      py::arg("config"));

  py::class_<ReservoirProblem, std::shared_ptr<ReservoirProblem>>(m, "ReservoirProblem")
      .def(py::init([](const py::object& c) { return std::make_shared<ReservoirProblem>(make_problem(config_from(c))); }),
           py::arg("config"))
      .def_property_readonly("nx", [](const ReservoirProblem& p) { return p.grid.nx(); })
      .def_property_readonly("ny", [](const ReservoirProblem& p) { return p.grid.ny(); })
      .def_property_readonly("producers", [](const ReservoirProblem& p) { return p.wells.producer_count(); })
      .def_property_readonly("injectors", [](const ReservoirProblem& p) { return p.wells.injector_count(); })
      .def_property_readonly("control_steps", [](const ReservoirProblem& p) { return p.control_steps; })
      .def("sample_fields", [](const ReservoirProblem& p, const py::object& c, int n, std::uint64_t seed) {
        const RunConfig cfg = config_from(c);
        std::vector<std::vector<double>> out;
        if (cfg.distribution.kind == "gaussian") {
          std::vector<int> cond;
          for (int w = 0; w < p.wells.well_count(); ++w) cond.push_back(p.wells.cell_of(w));
          ConditionalGaussianSampler s(p.grid, cond, cfg.distribution.gaussian);
          for (int i = 0; i < n; ++i) {
            Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
            out.push_back(s.sample(rng).log_perm);
          }
        } else {
          for (int i = 0; i < n; ++i) {
            Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
            out.push_back(sample_channel(rng, p.grid, cfg.distribution.channel).log_perm);
          }
        }
        return out;
      }, py::arg("config"), py::arg("n"), py::arg("seed"), "Log-permeability fields, one list per sample.");

  py::class_<WellEnv>(m, "WellEnv")
      .def(py::init([](std::shared_ptr<ReservoirProblem> p, const std::vector<std::vector<double>>& fields,
                       bool base_first_action, bool full_state, std::uint64_t seed) {
             auto fs = to_fields(fields);
             return std::make_unique<WellEnv>(p, make_pool(*p, fs), EnvConfig{base_first_action, full_state}, seed);
           }),
           py::arg("problem"), py::arg("fields"), py::arg("base_first_action") = false, py::arg("full_state") = false,
           py::arg("seed") = 0)
      .def_property_readonly("observation_dim", &WellEnv::observation_dim)
      .def_property_readonly("action_dim", &WellEnv::action_dim)
      .def_property_readonly("scenario_index", &WellEnv::scenario_index)
      .def_property_readonly("last_rates", &WellEnv::last_rates)
      .def("reset", &WellEnv::reset)
      .def("reset_to", &WellEnv::reset_to, py::arg("scenario"))
      .def("step", [](WellEnv& e, const std::vector<double>& a) {
        Transition t = e.step(a);
        return py::make_tuple(t.observation, t.reward, t.done);
      }, py::arg("action"));

  m.def("base_return", [](std::shared_ptr<ReservoirProblem> p, const std::vector<double>& field) {
    const auto model = make_flow_model(*p, PermField{field});
    return episode_return(base_policy(ActionCodec(p->wells).action_dim()), p, model, EnvConfig{});
  }, py::arg("problem"), py::arg("field"));

  m.def("sequence_return", [](std::shared_ptr<ReservoirProblem> p, const std::vector<double>& field,
                              const std::vector<double>& seq) {
    return sequence_fitness(seq, p, make_flow_model(*p, PermField{field}));
  }, py::arg("problem"), py::arg("field"), py::arg("sequence"));

  m.def("compute_gae", [](const std::vector<double>& r, const std::vector<double>& v, const std::vector<double>& d,
                          double bootstrap, double gamma, double lam) {
    std::vector<double> adv(r.size()), ret(r.size());
    compute_gae(r, v, d, bootstrap, gamma, lam, adv, ret);
    return py::make_tuple(adv, ret);
  }, py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("bootstrap"), py::arg("gamma"), py::arg("lam"));

  m.def("classical_mds", &classical_mds, py::arg("dist"), py::arg("dim") = 2);
  m.def("kmeans", [](const Eigen::MatrixXd& x, int l, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    KMeansResult r = kmeans(x, l, rng);
    return py::make_tuple(r.labels, r.centers, r.inertia);
  }, py::arg("coords"), py::arg("clusters"), py::arg("seed") = 0);

  m.def("de_optimize", [](const std::function<double(std::vector<double>)>& f, const std::vector<double>& lower,
                          const std::vector<double>& upper, int population, int iterations, std::uint64_t seed) {
    DeConfig cfg;
    cfg.population = population;
    cfg.iterations = iterations;
    cfg.seed = seed;
    Rng rng = make_rng(seed);
    DeResult r = de_optimize([&](std::span<const double> x) { return f({x.begin(), x.end()}); },
                             Bounds{lower, upper}, cfg, rng);
    return py::make_tuple(r.best, r.best_fitness, r.history);
  }, py::arg("fitness"), py::arg("lower"), py::arg("upper"), py::arg("population") = 20, py::arg("iterations") = 200,
     py::arg("seed") = 0);

  m.def("git_blob_sha1", [](const py::bytes& b) { return git_blob_sha1(std::string(b)); }, py::arg("data"));
}
