#include "opme/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "opme/serialize.hpp"

#ifndef OPME_VERSION
#define OPME_VERSION "unknown"
#endif

namespace opme {

using nlohmann::json;
namespace fs = std::filesystem;

const char* version_string() { return "opme " OPME_VERSION; }

fs::path resolve_output_dir(const ScenarioConfig& cfg) {
  fs::path dir = cfg.output.directory.empty() ? fs::path(cfg.name) : fs::path(cfg.output.directory);
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv("OPME_OUTPUT_ROOT");
  return (root && *root ? fs::path(root) : fs::path("results")) / dir;
}

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const RealizabilityError*>(&e) || dynamic_cast<const ConfigError*>(&e)) {
    return kExitValidation;
  }
  return kExitRuntime;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

json tensor_json(const Tensor& t) {
  json values = json::array();
  for (double v : t.values()) {
    if (std::isfinite(v)) values.push_back(v);
    else values.push_back(nullptr);
  }
  return json{{"shape", t.shape()}, {"values", std::move(values)}};
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json ratio_json(const RatioResult& r) {
  return json{{"value", r.infinite ? json(nullptr) : json(r.value)},
              {"infinite", r.infinite},
              {"degenerate", r.degenerate},
              {"lower_bound", r.lower_bound},
              {"policies_evaluated", r.policies_evaluated},
              {"pairs_evaluated", r.pairs_evaluated},
              {"jensen_violations", r.jensen_violations},
              {"witness",
               {{"kind", r.witness_nu.kind},
                {"index", r.witness_nu.index},
                {"g_index", r.witness_nu.g_index},
                {"axis", r.witness_nu.axis}}},
              {"witness_policy", r.witness_policy}};
}

json clause_json(const ClauseResult& c) {
  json j{{"pass", c.pass}};
  if (!c.pass) {
    j["counterexample"] = c.counterexample;
    j["step"] = c.step;
    j["index"] = c.index;
  }
  return j;
}

json realizability_json(const RealizabilityReport& r) {
  return json{{"all_pass", r.all_pass()},
              {"truth_membership", clause_json(r.truth_membership)},
              {"projection_membership", clause_json(r.projection_membership)},
              {"value_membership", clause_json(r.value_membership)},
              {"value_clause_checked", r.value_clause_checked}};
}

json scenario_json(const Scenario& sc) {
  const auto& env = sc.env;
  const auto& c = sc.classes;
  json per_step = json::array();
  for (int h = 0; h < c.horizon; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    json step{{"h", h}, {"reward", c.reward[uh].size()}, {"f", c.disc_f[uh].size()}, {"g_next", c.disc_g[uh + 1].size()}};
    if (c.mode() == TransitionMode::General) {
      step["transition"] = c.transition[uh].size();
    } else {
      json axes = json::array();
      for (const auto& axis : c.dynamics[uh]) axes.push_back(axis.size());
      step["transition"] = axes;
    }
    per_step.push_back(std::move(step));
  }
  return json{{"generator", sc.name},
              {"generator_seed", sc.seed},
              {"mode", to_string(env.mode)},
              {"horizon", env.horizon},
              {"num_states", env.num_states},
              {"num_actions", env.num_actions},
              {"num_feedbacks", env.num_feedbacks},
              {"num_types", env.num_types},
              {"num_agent_actions", env.num_agent_actions},
              {"reward_bound", env.reward_bound},
              {"class_bound", c.bound},
              {"class_sizes", per_step},
              {"class_notes", c.notes}};
}

std::vector<std::string> scenario_flags(const Scenario& sc, const RealizabilityReport& report) {
  std::vector<std::string> flags;
  if (sc.classes.bound_violation) flags.push_back("class-bound-violation");
  if (sc.classes.approximate_realizability) flags.push_back("approximate-realizability");
  if (!report.value_clause_checked) flags.push_back("value-clause-unchecked");
  if (sc.env.mode == TransitionMode::Dynamical) flags.push_back("grid-resolution-oracles");
  return flags;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

struct StepOracles {
  std::vector<std::optional<RatioResult>> tau;
  std::vector<std::optional<RatioResult>> transfer;
};

StepOracles compute_oracles(const Scenario& sc, bool tau, bool transfer, long long budget) {
  StepOracles out;
  const int H = sc.env.horizon;
  out.tau.resize(static_cast<std::size_t>(H));
  out.transfer.resize(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) {
    if (tau) out.tau[static_cast<std::size_t>(h)] = ill_posedness(sc.env, sc.classes, h, budget, sc.seed);
    if (transfer) out.transfer[static_cast<std::size_t>(h)] = transfer_term(sc.env, sc.classes, h, budget, sc.seed);
  }
  return out;
}

json oracles_json(const StepOracles& o) {
  json steps = json::array();
  for (std::size_t h = 0; h < o.tau.size(); ++h) {
    json step{{"h", h}};
    if (o.tau[h]) step["tau"] = ratio_json(*o.tau[h]);
    if (o.transfer[h]) step["transfer"] = ratio_json(*o.transfer[h]);
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<std::string> oracle_flags(const StepOracles& o) {
  std::vector<std::string> flags;
  for (std::size_t h = 0; h < o.tau.size(); ++h) {
    const std::string suffix = "[h=" + std::to_string(h) + "]";
    if (o.tau[h]) {
      if (o.tau[h]->infinite) flags.push_back("tau-infinite" + suffix);
      if (o.tau[h]->degenerate) flags.push_back("tau-degenerate" + suffix);
      if (o.tau[h]->lower_bound) flags.push_back("tau-lower-bound" + suffix);
    }
    if (o.transfer[h]) {
      if (o.transfer[h]->infinite) flags.push_back("transfer-infinite" + suffix);
      if (o.transfer[h]->degenerate) flags.push_back("transfer-degenerate" + suffix);
      if (o.transfer[h]->lower_bound) flags.push_back("transfer-lower-bound" + suffix);
    }
  }
  return flags;
}

json naive_json(const NaiveBaseline& n) {
  // The cell with the largest population bias is the one worth looking at.
  double worst = -1.0;
  json cell = nullptr;
  const auto& pb = n.population_bias;
  for (int h = 0; h < pb.dim(0); ++h)
    for (int s = 0; s < pb.dim(1); ++s)
      for (int a = 0; a < pb.dim(2); ++a)
        for (int e = 0; e < pb.dim(3); ++e) {
          const double b = pb(h, s, a, e);
          if (std::isfinite(b) && std::abs(b) > worst) {
            worst = std::abs(b);
            cell = json{{"h", h},
                        {"s", s},
                        {"a", a},
                        {"e", e},
                        {"population_bias", b},
                        {"empirical_bias", number_or_null(n.empirical_bias(h, s, a, e))},
                        {"count", n.counts(h, s, a, e)}};
          }
        }
  return json{{"counts", tensor_json(n.counts)},
              {"empirical_mean", tensor_json(n.empirical_mean)},
              {"empirical_bias", tensor_json(n.empirical_bias)},
              {"population_bias", tensor_json(n.population_bias)},
              {"largest_population_bias", cell}};
}

std::string transition_sizes_field(const std::vector<std::vector<int>>& sizes) {
  std::string out;
  for (std::size_t h = 0; h < sizes.size(); ++h) {
    if (h) out += ';';
    for (std::size_t i = 0; i < sizes[h].size(); ++i) {
      if (i) out += 'x';
      out += std::to_string(sizes[h][i]);
    }
  }
  return out;
}

json seed_manifest(const ScenarioConfig& cfg, const Scenario& sc, const RealizabilityReport& report,
                   const SeedOutcome& o, const std::vector<std::string>& extra_flags) {
  json m;
  m["version"] = version_string();
  m["seed"] = o.seed;
  m["status"] = o.ok ? "ok" : "error";
  if (!o.ok) m["error"] = o.error;
  m["config"] = json::parse(config_to_json(cfg));
  m["scenario"] = scenario_json(sc);
  m["realizability"] = realizability_json(report);
  std::vector<std::string> flags = scenario_flags(sc, report);
  if (o.ok) {
    for (const auto& f : o.run.flags) flags.push_back(f);
    const auto& lv = o.run.levels;
    m["levels"] = json{{"beta1", lv.beta1}, {"beta2", lv.beta2}, {"beta3", lv.beta3}, {"scale", lv.scale}};
    m["class_totals"] = json{{"f", o.run.sizes.f},
                             {"g", o.run.sizes.g},
                             {"reward", o.run.sizes.reward},
                             {"transition", o.run.sizes.transition}};
    m["truth_always_in_sets"] = o.run.truth_always_in_sets;
    m["first_miss_episode"] = o.run.first_miss_episode;
    m["dataset_sizes"] = o.run.dataset_sizes;
    const double cum = o.regret.cumulative.empty() ? 0.0 : o.regret.cumulative.back();
    const double K = static_cast<double>(o.run.episodes.size());
    m["result"] = json{{"optimal_value", o.regret.optimal_value},
                       {"cumulative_regret", cum},
                       {"mixture_value", o.mixture_value},
                       {"mixture_suboptimality", o.regret.optimal_value - o.mixture_value},
                       {"average_regret", K > 0 ? cum / K : 0.0}};
    long long flagged[4] = {0, 0, 0, 0};
    for (const auto& log : o.run.episodes) {
      for (const auto& f : log.flags) {
        if (f == "empty-set-fallback") ++flagged[0];
        else if (f == "relaxed") ++flagged[1];
        else if (f == "capacity-fallback") ++flagged[2];
        else if (f == "stale-sets") ++flagged[3];
      }
    }
    m["episode_flag_counts"] = json{{"empty-set-fallback", flagged[0]},
                                    {"relaxed", flagged[1]},
                                    {"capacity-fallback", flagged[2]},
                                    {"stale-sets", flagged[3]}};
    double total_ms = 0.0;
    for (const auto& log : o.run.episodes) total_ms += log.wallclock_ms;
    m["wallclock_ms"] = total_ms;
  }
  for (const auto& f : extra_flags) flags.push_back(f);
  m["flags"] = flags;
  return m;
}

}  // namespace

std::string ratio_to_json(const RatioResult& r, int indent) { return ratio_json(r).dump(indent); }

std::string episodes_csv(const SeedOutcome& o) {
  std::string out = "seed,episode,instant_regret,cum_regret,conf_sizes_R,conf_sizes_P,beta1,beta2,beta3,flags,wallclock_ms\n";
  const auto& lv = o.run.levels;
  const std::string betas = format_double(lv.beta1) + "," + format_double(lv.beta2) + "," + format_double(lv.beta3);
  for (const auto& log : o.run.episodes) {
    std::string r_sizes;
    for (std::size_t h = 0; h < log.reward_set_sizes.size(); ++h) {
      if (h) r_sizes += ';';
      r_sizes += std::to_string(log.reward_set_sizes[h]);
    }
    out += std::to_string(o.seed) + "," + std::to_string(log.episode) + "," + format_double(log.instant_regret) + "," +
           format_double(log.cumulative_regret) + "," + r_sizes + "," + transition_sizes_field(log.transition_set_sizes) +
           "," + betas + "," + join(log.flags, ";") + "," + format_double(log.wallclock_ms) + "\n";
  }
  return out;
}

std::string summary_csv(const ScenarioConfig& cfg, const std::vector<SeedOutcome>& seeds) {
  std::string out = "checkpoint,num_seeds,mean_cum_regret,std_cum_regret,coverage\n";
  for (int k : cfg.checkpoints()) {
    std::vector<double> values;
    int covered = 0;
    for (const auto& o : seeds) {
      if (!o.ok || static_cast<int>(o.run.episodes.size()) < k) continue;
      values.push_back(o.run.episodes[static_cast<std::size_t>(k - 1)].cumulative_regret);
      if (o.run.first_miss_episode == 0 || o.run.first_miss_episode > k) ++covered;
    }
    const double n = static_cast<double>(values.size());
    double mean = 0.0, sd = 0.0;
    if (!values.empty()) {
      for (double v : values) mean += v;
      mean /= n;
      if (values.size() > 1) {
        for (double v : values) sd += (v - mean) * (v - mean);
        sd = std::sqrt(sd / (n - 1.0));
      }
    }
    out += std::to_string(k) + "," + std::to_string(values.size()) + "," + format_double(mean) + "," +
           format_double(sd) + "," + format_double(values.empty() ? 0.0 : covered / n) + "\n";
  }
  return out;
}

SeedOutcome run_seed(const ScenarioConfig& cfg, const Scenario& sc, std::uint64_t seed) {
  SeedOutcome o;
  o.seed = seed;
  try {
    const RunConfig rc = make_run_config(cfg, sc, seed);
    const LearnerKnowledge knowledge = make_knowledge(sc.env);
    if (cfg.diagnostics.naive_baseline) {
      StepDataset data(sc.env.horizon);
      const RolloutFn recorder = [&](const Policy& policy, Rng& rng) {
        Trajectory traj = rollout(sc.env, policy, rng);
        data.append(traj);
        return traj;
      };
      o.run = run_opme(sc.env, recorder, knowledge, sc.classes, rc);
      o.naive = naive_baseline(data, sc.env);
    } else {
      o.run = run_opme(sc.env, knowledge, sc.classes, rc);
    }
    o.regret = regret_curve(o.run, sc.env);
    o.mixture_value = mixture_value(o.run.mixture, true_aggregated_model(sc.env, sc.env.target_type_dist));
    o.ok = true;
  } catch (const std::exception& e) {
    o.ok = false;
    o.error = e.what();
    o.exit_code = exit_code_for(e);
  }
  return o;
}

ExperimentOutcome run_experiment(const ScenarioConfig& cfg, const std::optional<fs::path>& directory) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome out;
  out.directory = directory ? *directory : resolve_output_dir(cfg);

  json manifest;
  manifest["version"] = version_string();
  manifest["config"] = json::parse(config_to_json(cfg));

  auto fail = [&](int code, const std::string& msg) {
    out.exit_code = code;
    out.errors.push_back(msg);
    manifest["status"] = "error";
    manifest["error"] = msg;
    try {
      fs::create_directories(out.directory);
      write_file(out.directory / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
      out.errors.push_back(e.what());
    }
    return out;
  };

  Scenario sc;
  RealizabilityReport report;
  StepOracles oracles;
  try {
    fs::create_directories(out.directory);
    sc = build_scenario(cfg);
    report = check_realizability(sc.env, sc.classes, cfg.classes.closures.caps);
    oracles = compute_oracles(sc, cfg.diagnostics.ill_posedness, cfg.diagnostics.transfer,
                              cfg.diagnostics.policy_budget);
  } catch (const std::exception& e) {
    return fail(exit_code_for(e), e.what());
  }
  const std::vector<std::string> diag_flags = oracle_flags(oracles);

  const std::size_t n = cfg.run.seeds.size();
  out.seeds.resize(n);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      SeedOutcome o = run_seed(cfg, sc, cfg.run.seeds[i]);
      try {
        const fs::path dir = out.directory / ("seed_" + std::to_string(o.seed));
        fs::create_directories(dir);
        write_file(dir / "manifest.json", seed_manifest(cfg, sc, report, o, diag_flags).dump(2) + "\n");
        if (o.ok && cfg.output.csv) write_file(dir / "episodes.csv", episodes_csv(o));
        if (o.ok && cfg.output.json) {
          json d;
          d["optimal_value"] = o.regret.optimal_value;
          d["grid_resolution"] = o.regret.grid_resolution;
          d["cumulative_regret"] = o.regret.cumulative.empty() ? 0.0 : o.regret.cumulative.back();
          d["mixture_suboptimality"] = o.regret.optimal_value - o.mixture_value;
          d["steps"] = oracles_json(oracles);
          if (o.naive) d["naive_baseline"] = naive_json(*o.naive);
          d["flags"] = diag_flags;
          write_file(dir / "diagnostics.json", d.dump(2) + "\n");
        }
      } catch (const std::exception& e) {
        o.ok = false;
        o.exit_code = kExitRuntime;
        o.error = e.what();
      }
      if (!o.ok) {
        std::lock_guard lock(error_mutex);
        out.errors.push_back("seed " + std::to_string(o.seed) + ": " + o.error);
      }
      out.seeds[i] = std::move(o);
    }
  };
  const int workers = std::max(1, std::min<int>(cfg.run.workers, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Deterministic post-pass in config seed order.
  json seeds = json::array();
  std::vector<std::string> flags = scenario_flags(sc, report);
  for (const auto& f : diag_flags) flags.push_back(f);
  for (const auto& o : out.seeds) {
    json s{{"seed", o.seed}, {"status", o.ok ? "ok" : "error"}};
    if (!o.ok) {
      s["error"] = o.error;
      out.exit_code = std::max(out.exit_code, o.exit_code);
    } else {
      s["truth_always_in_sets"] = o.run.truth_always_in_sets;
      s["cumulative_regret"] = o.regret.cumulative.empty() ? 0.0 : o.regret.cumulative.back();
      for (const auto& f : o.run.flags) {
        if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
      }
    }
    seeds.push_back(std::move(s));
  }
  manifest["status"] = out.exit_code == kExitOk ? "ok" : "error";
  manifest["scenario"] = scenario_json(sc);
  manifest["realizability"] = realizability_json(report);
  manifest["seeds"] = seeds;
  manifest["flags"] = flags;
  manifest["checkpoints"] = cfg.checkpoints();
  if (!out.errors.empty()) manifest["errors"] = out.errors;
  manifest["wallclock_total_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  try {
    if (cfg.output.csv) write_file(out.directory / "summary.csv", summary_csv(cfg, out.seeds));
    write_file(out.directory / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    out.errors.push_back(e.what());
    out.exit_code = kExitRuntime;
  }
  return out;
}

ExperimentOutcome diagnose(const ScenarioConfig& cfg, const std::optional<fs::path>& directory) {
  ExperimentOutcome out;
  out.directory = (directory ? *directory : resolve_output_dir(cfg)) / "diagnose";
  json manifest;
  manifest["version"] = version_string();
  manifest["config"] = json::parse(config_to_json(cfg));
  try {
    fs::create_directories(out.directory);
    const Scenario sc = build_scenario(cfg);
    const RealizabilityReport report = check_realizability(sc.env, sc.classes, cfg.classes.closures.caps);
    const StepOracles oracles = compute_oracles(sc, true, true, cfg.diagnostics.policy_budget);
    const AggregatedMDP mdp = true_aggregated_model(sc.env, sc.env.target_type_dist);
    json d;
    d["optimal_value"] = value_iteration(mdp).initial_value;
    d["grid_resolution"] = sc.env.mode == TransitionMode::Dynamical;
    d["steps"] = oracles_json(oracles);
    std::vector<std::string> flags = scenario_flags(sc, report);
    for (const auto& f : oracle_flags(oracles)) flags.push_back(f);
    d["flags"] = flags;
    manifest["status"] = "ok";
    manifest["scenario"] = scenario_json(sc);
    manifest["realizability"] = realizability_json(report);
    manifest["flags"] = flags;
    write_file(out.directory / "diagnostics.json", d.dump(2) + "\n");
  } catch (const std::exception& e) {
    out.exit_code = exit_code_for(e);
    out.errors.push_back(e.what());
    manifest["status"] = "error";
    manifest["error"] = e.what();
  }
  try {
    fs::create_directories(out.directory);
    write_file(out.directory / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    out.errors.push_back(e.what());
    out.exit_code = kExitRuntime;
  }
  return out;
}

ValidationOutcome validate_config(const fs::path& path) {
  ValidationOutcome out;
  try {
    const ScenarioConfig cfg = load_config(path);
    const Scenario sc = build_scenario(cfg);
    const RealizabilityReport report = check_realizability(sc.env, sc.classes, cfg.classes.closures.caps);
    out.messages.push_back("config '" + cfg.name + "' is valid");
    out.messages.push_back(std::string("realizability: ") + (report.all_pass() ? "pass" : "FAIL"));
    for (const ClauseResult* c : {&report.truth_membership, &report.projection_membership, &report.value_membership}) {
      if (!c->pass) out.messages.push_back("  " + c->counterexample);
    }
    if (!report.value_clause_checked) out.messages.push_back("  value clause not checked (joint model cap)");
    if (!report.all_pass() && cfg.run.strict_realizability) out.exit_code = kExitValidation;
  } catch (const ValidationError& e) {
    out.exit_code = kExitValidation;
    for (const auto& v : e.violations()) out.messages.push_back(v);
  } catch (const std::exception& e) {
    out.exit_code = exit_code_for(e);
    out.messages.push_back(e.what());
  }
  return out;
}

ExperimentOutcome sweep(const fs::path& config_path, const std::string& key, const std::vector<std::string>& values,
                        const std::optional<fs::path>& directory) {
  ExperimentOutcome out;
  fs::path root;
  try {
    const ScenarioConfig base = load_config(config_path);
    root = (directory ? *directory : resolve_output_dir(base)) / "sweep";
  } catch (const std::exception& e) {
    out.exit_code = exit_code_for(e);
    out.errors.push_back(e.what());
    return out;
  }
  out.directory = root;
  json runs = json::array();
  for (const auto& value : values) {
    const fs::path dir = root / (key + "=" + value);
    json entry{{"value", value}, {"directory", dir.string()}};
    try {
      const ScenarioConfig cfg = load_config(config_path, {{key, value}});
      ExperimentOutcome one = run_experiment(cfg, dir);
      entry["exit_code"] = one.exit_code;
      out.exit_code = std::max(out.exit_code, one.exit_code);
      for (const auto& e : one.errors) out.errors.push_back(key + "=" + value + ": " + e);
    } catch (const std::exception& e) {
      const int code = exit_code_for(e);
      entry["exit_code"] = code;
      entry["error"] = e.what();
      out.exit_code = std::max(out.exit_code, code);
      out.errors.push_back(key + "=" + value + ": " + e.what());
    }
    runs.push_back(std::move(entry));
  }
  try {
    fs::create_directories(root);
    write_file(root / "manifest.json",
               json{{"version", version_string()}, {"config_path", config_path.string()}, {"key", key}, {"runs", runs}}
                       .dump(2) +
                   "\n");
  } catch (const std::exception& e) {
    out.errors.push_back(e.what());
    out.exit_code = kExitRuntime;
  }
  return out;
}

}  // namespace opme
