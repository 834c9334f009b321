#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "opme/config.hpp"
#include "opme/diagnostics.hpp"
#include "opme/driver.hpp"
#include "opme/experiment.hpp"
#include "opme/npiv.hpp"
#include "opme/planner.hpp"
#include "opme/scenarios.hpp"
#include "opme/serialize.hpp"

namespace py = pybind11;
using namespace opme;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<int> shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape.push_back(static_cast<int>(a.shape(i)));
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

const Tensor& population(const StrategicModel& m, const std::string& which) {
  if (which == "source") return m.source_type_dist;
  if (which == "target") return m.target_type_dist;
  throw ConfigError("population must be 'source' or 'target', got '" + which + "'");
}

py::dict sample_dict(const Sample& s) {
  py::dict d;
  d["s"] = s.s;
  d["a"] = s.a;
  d["e"] = s.e;
  d["r"] = s.r;
  d["next_s"] = s.next_s;
  if (!s.x.empty()) {
    d["x"] = s.x;
    d["next_x"] = s.next_x;
  }
  return d;
}

py::dict ratio_dict(const RatioResult& r) {
  py::dict d;
  d["value"] = r.infinite ? std::numeric_limits<double>::infinity() : r.value;
  d["infinite"] = r.infinite;
  d["degenerate"] = r.degenerate;
  d["lower_bound"] = r.lower_bound;
  d["policies_evaluated"] = r.policies_evaluated;
  d["witness_kind"] = r.witness_nu.kind;
  d["witness_index"] = r.witness_nu.index;
  d["witness_policy"] = r.witness_policy;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Optimistic planning with minimax estimation for strategic principal-agent MDPs";
  m.attr("__version__") = OPME_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
  py::register_exception<RealizabilityError>(m, "RealizabilityError", PyExc_RuntimeError);

  py::enum_<TransitionMode>(m, "TransitionMode")
      .value("General", TransitionMode::General)
      .value("Dynamical", TransitionMode::Dynamical);
  py::enum_<OptimismMode>(m, "OptimismMode")
      .value("ExactEnumeration", OptimismMode::ExactEnumeration)
      .value("PointwiseOptimistic", OptimismMode::PointwiseOptimistic);

  py::class_<StrategicModel>(m, "Model")
      .def_readonly("horizon", &StrategicModel::horizon)
      .def_readonly("num_states", &StrategicModel::num_states)
      .def_readonly("num_actions", &StrategicModel::num_actions)
      .def_readonly("num_feedbacks", &StrategicModel::num_feedbacks)
      .def_readonly("num_types", &StrategicModel::num_types)
      .def_readonly("num_agent_actions", &StrategicModel::num_agent_actions)
      .def_readonly("initial_state", &StrategicModel::initial_state)
      .def_readonly("mode", &StrategicModel::mode)
      .def_readwrite("reward_noise_std", &StrategicModel::reward_noise_std)
      .def_readwrite("trans_noise_std", &StrategicModel::trans_noise_std)
      .def_property(
          "source_type_dist", [](const StrategicModel& s) { return to_numpy(s.source_type_dist); },
          [](StrategicModel& s, const py::array_t<double>& a) { s.source_type_dist = from_numpy(a); })
      .def_property(
          "target_type_dist", [](const StrategicModel& s) { return to_numpy(s.target_type_dist); },
          [](StrategicModel& s, const py::array_t<double>& a) { s.target_type_dist = from_numpy(a); })
      .def_property_readonly("principal_reward", [](const StrategicModel& s) { return to_numpy(s.principal_reward); })
      .def_property_readonly("reward_confound", [](const StrategicModel& s) { return to_numpy(s.reward_confound); })
      .def("validate", &StrategicModel::validate)
      .def("copy", [](const StrategicModel& s) { return s; })
      .def("to_json", [](const StrategicModel& s, int indent) { return model_to_json(s, indent); },
           py::arg("indent") = -1)
      .def_static("from_json", &model_from_json);

  py::class_<HypothesisClasses>(m, "Classes")
      .def_readonly("bound", &HypothesisClasses::bound)
      .def_readonly("truth_reward", &HypothesisClasses::truth_reward)
      .def_readonly("truth_transition", &HypothesisClasses::truth_transition)
      .def_property_readonly("reward_sizes",
                             [](const HypothesisClasses& c) {
                               std::vector<std::size_t> out;
                               for (const auto& r : c.reward) out.push_back(r.size());
                               return out;
                             })
      .def("total_reward", &HypothesisClasses::total_reward)
      .def("total_transition", &HypothesisClasses::total_transition)
      .def("to_json", [](const HypothesisClasses& c, int indent) { return classes_to_json(c, indent); },
           py::arg("indent") = -1)
      .def_static("from_json", &classes_from_json);

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("seed", &Scenario::seed)
      .def_readonly("env", &Scenario::env)
      .def_readonly("classes", &Scenario::classes);

  m.def("scenario_names", &scenario_names);
  m.def(
      "make_scenario",
      [](const std::string& name, std::uint64_t seed, bool closure_f, bool closure_g, std::optional<int> grid_cells) {
        ClosureOptions closures;
        closures.closure_f = closure_f;
        closures.closure_g = closure_g;
        GeneratorOptions options;
        options.grid_cells = grid_cells;
        return make_scenario(name, seed, closures, options);
      },
      py::arg("name"), py::arg("seed") = 0, py::arg("closure_f") = true, py::arg("closure_g") = true,
      py::arg("grid_cells") = py::none());
  m.def("check_realizability", [](const StrategicModel& env, const HypothesisClasses& c) {
    const RealizabilityReport r = check_realizability(env, c);
    py::dict d;
    d["pass"] = r.all_pass();
    d["truth"] = r.truth_membership.pass;
    d["projection"] = r.projection_membership.pass;
    d["value"] = r.value_membership.pass;
    std::string first;
    for (const ClauseResult* c : {&r.truth_membership, &r.projection_membership, &r.value_membership})
      if (!c->pass && first.empty()) first = c->counterexample;
    d["counterexample"] = first;
    return d;
  });

  py::class_<Policy>(m, "Policy")
      .def(py::init([](const py::array_t<double>& probs) { return Policy(from_numpy(probs)); }))
      .def_static("uniform", &Policy::uniform)
      .def_static("deterministic",
                  [](int H, int S, int A, const std::vector<int>& actions) {
                    return Policy::deterministic(H, S, A, actions);
                  })
      .def_property_readonly("probs", [](const Policy& p) { return to_numpy(p.probs()); })
      .def("deterministic_action", &Policy::deterministic_action)
      .def(py::self == py::self);

  py::class_<AggregatedMDP>(m, "AggregatedMDP")
      .def_readonly("horizon", &AggregatedMDP::horizon)
      .def_readonly("num_states", &AggregatedMDP::num_states)
      .def_readonly("num_actions", &AggregatedMDP::num_actions)
      .def_readonly("initial_state", &AggregatedMDP::initial_state)
      .def_property_readonly("reward", [](const AggregatedMDP& a) { return to_numpy(a.reward); })
      .def_property_readonly("transition", [](const AggregatedMDP& a) { return to_numpy(a.transition); });

  py::class_<PlanResult>(m, "PlanResult")
      .def_readonly("initial_value", &PlanResult::initial_value)
      .def_readonly("policy", &PlanResult::policy)
      .def_property_readonly("value", [](const PlanResult& p) { return to_numpy(p.value); })
      .def_property_readonly("q", [](const PlanResult& p) { return to_numpy(p.q); });

  m.def(
      "true_aggregated_model",
      [](const StrategicModel& env, const std::string& which) {
        return true_aggregated_model(env, population(env, which));
      },
      py::arg("env"), py::arg("population") = "target");
  m.def("value_iteration", &value_iteration);
  m.def("evaluate_policy", &evaluate_policy);
  m.def(
      "rollout",
      [](const StrategicModel& env, const Policy& policy, std::uint64_t seed) {
        Rng rng(seed);
        py::list out;
        for (const Sample& s : rollout(env, policy, rng).steps) out.append(sample_dict(s));
        return out;
      },
      py::arg("env"), py::arg("policy"), py::arg("seed") = 0);

  py::class_<EpisodeLog>(m, "Episode")
      .def_readonly("episode", &EpisodeLog::episode)
      .def_readonly("policy", &EpisodeLog::policy)
      .def_readonly("reward_set_sizes", &EpisodeLog::reward_set_sizes)
      .def_readonly("transition_set_sizes", &EpisodeLog::transition_set_sizes)
      .def_readonly("optimistic_value", &EpisodeLog::optimistic_value)
      .def_readonly("truth_in_sets", &EpisodeLog::truth_in_sets)
      .def_readonly("flags", &EpisodeLog::flags)
      .def_readonly("instant_regret", &EpisodeLog::instant_regret)
      .def_readonly("cumulative_regret", &EpisodeLog::cumulative_regret);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("episodes", &RunResult::episodes)
      .def_readonly("flags", &RunResult::flags)
      .def_readonly("dataset_sizes", &RunResult::dataset_sizes)
      .def_readonly("truth_always_in_sets", &RunResult::truth_always_in_sets)
      .def_readonly("first_miss_episode", &RunResult::first_miss_episode)
      .def_property_readonly("betas",
                             [](const RunResult& r) {
                               return std::vector<double>{r.levels.beta1, r.levels.beta2, r.levels.beta3};
                             })
      .def_property_readonly("mixture", [](const RunResult& r) { return r.mixture.components; });

  m.def(
      "run_opme",
      [](const StrategicModel& env, const HypothesisClasses& classes, int episodes, std::uint64_t seed, double delta,
         double beta_scale, OptimismMode optimism, bool strict_realizability) {
        RunConfig cfg;
        cfg.episodes = episodes;
        cfg.seed = seed;
        cfg.delta = delta;
        cfg.beta_scale = beta_scale;
        cfg.optimism = optimism;
        cfg.mode = env.mode;
        cfg.strict_realizability = strict_realizability;
        py::gil_scoped_release release;
        return run_opme(env, make_knowledge(env), classes, cfg);
      },
      py::arg("env"), py::arg("classes"), py::arg("episodes") = 100, py::arg("seed") = 0, py::arg("delta") = 0.1,
      py::arg("beta_scale") = 1.0, py::arg("optimism") = OptimismMode::ExactEnumeration,
      py::arg("strict_realizability") = true);
  m.def("mixture_value", [](const std::vector<Policy>& policies, const AggregatedMDP& oracle) {
    return mixture_value(MixturePolicy{policies}, oracle);
  });

  m.def("regret_curve", [](RunResult& run, const StrategicModel& env) {
    const RegretSeries r = regret_curve(run, env);
    py::dict d;
    d["optimal_value"] = r.optimal_value;
    d["instant"] = r.instant;
    d["cumulative"] = r.cumulative;
    d["grid_resolution"] = r.grid_resolution;
    return d;
  });
  m.def(
      "occupancy",
      [](const StrategicModel& env, const Policy& policy, const std::string& which) {
        const OccupancyTable occ = occupancy(env, policy, population(env, which));
        py::dict d;
        d["state"] = to_numpy(occ.state);
        d["sa"] = to_numpy(occ.sa);
        d["sae"] = to_numpy(occ.sae);
        return d;
      },
      py::arg("env"), py::arg("policy"), py::arg("population") = "source");
  m.def(
      "ill_posedness",
      [](const StrategicModel& env, const HypothesisClasses& c, int h, long long budget, std::uint64_t seed) {
        return ratio_dict(ill_posedness(env, c, h, budget, seed));
      },
      py::arg("env"), py::arg("classes"), py::arg("h"), py::arg("policy_budget") = 4096, py::arg("seed") = 0);
  m.def(
      "transfer_term",
      [](const StrategicModel& env, const HypothesisClasses& c, int h, long long budget, std::uint64_t seed) {
        return ratio_dict(transfer_term(env, c, h, budget, seed));
      },
      py::arg("env"), py::arg("classes"), py::arg("h"), py::arg("policy_budget") = 4096, py::arg("seed") = 0);

  py::class_<ScenarioConfig>(m, "Config")
      .def_readonly("name", &ScenarioConfig::name)
      .def_property_readonly("episodes", [](const ScenarioConfig& c) { return c.run.episodes; })
      .def_property_readonly("seeds", [](const ScenarioConfig& c) { return c.run.seeds; })
      .def("to_json", [](const ScenarioConfig& c, int indent) { return config_to_json(c, indent); },
           py::arg("indent") = -1)
      .def("build_scenario", &build_scenario);
  m.def("parse_config", &parse_config, py::arg("text"), py::arg("overrides") = std::vector<Override>{},
        py::arg("base_dir") = std::filesystem::path{});
  m.def("load_config", &load_config, py::arg("path"), py::arg("overrides") = std::vector<Override>{});
  m.def(
      "run_experiment",
      [](const ScenarioConfig& cfg, std::optional<std::filesystem::path> directory) {
        ExperimentOutcome out;
        {
          py::gil_scoped_release release;
          out = run_experiment(cfg, directory);
        }
        py::dict d;
        d["exit_code"] = out.exit_code;
        d["directory"] = out.directory;
        d["errors"] = out.errors;
        py::list seeds;
        for (const auto& s : out.seeds) {
          py::dict sd;
          sd["seed"] = s.seed;
          sd["ok"] = s.ok;
          sd["error"] = s.error;
          sd["cumulative_regret"] = s.regret.cumulative;
          sd["mixture_value"] = s.mixture_value;
          seeds.append(sd);
        }
        d["seeds"] = seeds;
        return d;
      },
      py::arg("config"), py::arg("directory") = py::none());
  m.def("validate_config", [](const std::filesystem::path& path) {
    const ValidationOutcome v = validate_config(path);
    return py::make_tuple(v.exit_code, v.messages);
  });
}
