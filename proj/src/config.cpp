#include "opme/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "opme/serialize.hpp"

namespace opme {

using nlohmann::json;

std::vector<int> ScenarioConfig::checkpoints() const {
  std::vector<int> out;
  const int K = run.episodes;
  if (run.evaluation_cadence > 0) {
    for (int k = run.evaluation_cadence; k < K; k += run.evaluation_cadence) out.push_back(k);
  }
  out.push_back(K);
  return out;
}

namespace {

// Collects every problem before throwing so users see the full list at once.
struct Violations {
  std::vector<std::string> items;
  void add(std::string msg) { items.push_back(std::move(msg)); }
};

json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Scalar:
      break;
  }
  const std::string& text = node.Scalar();
  if (node.Tag() == "!") return text;  // quoted
  if (text == "~" || text == "null") return nullptr;
  if (text == "true" || text == "True") return true;
  if (text == "false" || text == "False") return false;
  long long i = 0;
  if (YAML::convert<long long>::decode(node, i)) return i;
  double d = 0.0;
  if (YAML::convert<double>::decode(node, d)) return d;
  return text;
}

std::string join_path(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

void check_keys(const YAML::Node& node, const std::string& section, const std::set<std::string>& allowed,
                Violations& v) {
  if (!node) return;
  if (!node.IsMap()) {
    v.add(section + ": expected a mapping");
    return;
  }
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) v.add(join_path(section, key) + ": unknown key");
  }
}

template <typename T>
std::optional<T> read(const YAML::Node& parent, const std::string& section, const char* key, Violations& v) {
  if (!parent || !parent.IsMap()) return std::nullopt;
  const YAML::Node node = parent[key];
  if (!node || node.IsNull()) return std::nullopt;
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    v.add(join_path(section, key) + ": cannot convert '" + YAML::Dump(node) + "'");
    return std::nullopt;
  }
}

template <typename T>
void read_into(T& target, const YAML::Node& parent, const std::string& section, const char* key, Violations& v) {
  if (auto value = read<T>(parent, section, key, v)) target = *value;
}

std::optional<Tensor> read_type_dist(const YAML::Node& parent, const std::string& section, const char* key,
                                     Violations& v) {
  if (!parent || !parent.IsMap() || !parent[key]) return std::nullopt;
  const YAML::Node node = parent[key];
  const std::string where = join_path(section, key);
  try {
    if (!node.IsSequence() || node.size() == 0) throw YAML::Exception(YAML::Mark::null_mark(), "not a list");
    if (node[0].IsSequence()) {
      std::vector<double> flat;
      const int T = static_cast<int>(node[0].size());
      for (const auto& row : node) {
        auto r = row.as<std::vector<double>>();
        if (static_cast<int>(r.size()) != T) {
          v.add(where + ": ragged rows");
          return std::nullopt;
        }
        flat.insert(flat.end(), r.begin(), r.end());
      }
      return Tensor({static_cast<int>(node.size()), T}, std::move(flat));
    }
    auto row = node.as<std::vector<double>>();
    const int T = static_cast<int>(row.size());
    return Tensor({T}, std::move(row));
  } catch (const YAML::Exception&) {
    v.add(where + ": expected a list of probabilities or a list of such lists");
    return std::nullopt;
  }
}

std::optional<std::string> table_document(const YAML::Node& section_node, const std::string& section,
                                          const std::filesystem::path& base_dir, Violations& v) {
  if (!section_node || !section_node.IsMap()) return std::nullopt;
  const YAML::Node inline_tables = section_node["tables"];
  const YAML::Node file = section_node["tables_file"];
  if (inline_tables && file) {
    v.add(section + ": give either tables or tables_file, not both");
    return std::nullopt;
  }
  if (inline_tables) return yaml_to_json(inline_tables).dump();
  if (file) {
    std::filesystem::path p = file.as<std::string>();
    if (p.is_relative()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) {
      v.add(section + ".tables_file: cannot open " + p.string());
      return std::nullopt;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    // The file may be JSON or YAML; YAML parsing accepts both.
    try {
      return yaml_to_json(YAML::Load(ss.str())).dump();
    } catch (const YAML::Exception& e) {
      v.add(section + ".tables_file: " + e.what());
      return std::nullopt;
    }
  }
  return std::nullopt;
}

void apply_override(YAML::Node& root, const Override& ov) {
  std::vector<std::string> parts;
  std::stringstream ss(ov.first);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ValidationError({"override '" + ov.first + "': empty path segment"});
    parts.push_back(part);
  }
  if (parts.empty()) throw ValidationError({"override with an empty key"});
  YAML::Node value;
  try {
    value = YAML::Load(ov.second);
  } catch (const YAML::Exception& e) {
    throw ValidationError({"override '" + ov.first + "': " + e.what()});
  }
  // yaml-cpp nodes are handles; walk with fresh copies so assignments attach
  // to the tree instead of rebinding the handle.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next || next.IsNull()) {
      chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next = chain.back()[parts[i]];
    }
    if (!next.IsMap()) throw ValidationError({"override '" + ov.first + "': '" + parts[i] + "' is not a section"});
    chain.push_back(next);
  }
  chain.back()[parts.back()] = value;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::vector<Override>& overrides,
                            const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ParseError("config: top level must be a mapping");
  for (const auto& ov : overrides) apply_override(root, ov);

  ScenarioConfig cfg;
  cfg.source_text = text;
  cfg.overrides = overrides;
  cfg.base_dir = base_dir;
  Violations v;

  check_keys(root, "", {"name", "environment", "classes", "run", "diagnostics", "output"}, v);
  read_into(cfg.name, root, "", "name", v);
  if (cfg.name.empty()) v.add("name: must not be empty");

  // environment
  const YAML::Node env = root["environment"];
  check_keys(env, "environment",
             {"generator", "seed", "mode", "horizon", "num_states", "num_actions", "num_feedbacks", "num_types",
              "reward_noise_std", "trans_noise_std", "grid_cells", "source_type_dist", "target_type_dist", "tables", "tables_file"},
             v);
  auto& e = cfg.environment;
  read_into(e.generator, env, "environment", "generator", v);
  read_into(e.seed, env, "environment", "seed", v);
  if (auto mode = read<std::string>(env, "environment", "mode", v)) {
    try {
      e.mode = transition_mode_from_string(*mode);
    } catch (const ConfigError&) {
      v.add("environment.mode: expected general or dynamical, got '" + *mode + "'");
    }
  }
  e.horizon = read<int>(env, "environment", "horizon", v);
  e.num_states = read<int>(env, "environment", "num_states", v);
  e.num_actions = read<int>(env, "environment", "num_actions", v);
  e.num_feedbacks = read<int>(env, "environment", "num_feedbacks", v);
  e.num_types = read<int>(env, "environment", "num_types", v);
  e.reward_noise_std = read<double>(env, "environment", "reward_noise_std", v);
  e.trans_noise_std = read<double>(env, "environment", "trans_noise_std", v);
  e.grid_cells = read<int>(env, "environment", "grid_cells", v);
  if (e.grid_cells && *e.grid_cells < 1) v.add("environment.grid_cells: must be >= 1");
  if (e.reward_noise_std && !(*e.reward_noise_std >= 0.0)) v.add("environment.reward_noise_std: must be >= 0");
  if (e.trans_noise_std && !(*e.trans_noise_std >= 0.0)) v.add("environment.trans_noise_std: must be >= 0");
  e.source_type_dist = read_type_dist(env, "environment", "source_type_dist", v);
  e.target_type_dist = read_type_dist(env, "environment", "target_type_dist", v);

  const auto known = scenario_names();
  if (e.generator.empty()) {
    v.add("environment.generator: required (a built-in generator name or 'inline')");
  } else if (e.generator != "inline" && std::find(known.begin(), known.end(), e.generator) == known.end()) {
    v.add("environment.generator: unknown generator '" + e.generator + "'");
  }
  if (auto doc = table_document(env, "environment", base_dir, v)) {
    if (e.generator != "inline") {
      v.add("environment.tables: only allowed with generator 'inline'");
    } else {
      try {
        e.tables = model_from_json(*doc);
      } catch (const Error& err) {
        v.add(std::string("environment.tables: ") + err.what());
      }
    }
  } else if (e.generator == "inline") {
    v.add("environment.tables: required when generator is 'inline'");
  }

  // classes
  const YAML::Node cls = root["classes"];
  check_keys(cls,
             "classes", {"closure_f", "closure_g", "max_class_size", "max_joint_models", "max_discriminators",
                         "tables", "tables_file"},
             v);
  auto& c = cfg.classes;
  read_into(c.closures.closure_f, cls, "classes", "closure_f", v);
  read_into(c.closures.closure_g, cls, "classes", "closure_g", v);
  read_into(c.closures.caps.max_class_size, cls, "classes", "max_class_size", v);
  read_into(c.closures.caps.max_joint_models, cls, "classes", "max_joint_models", v);
  read_into(c.closures.caps.max_discriminators, cls, "classes", "max_discriminators", v);
  if (c.closures.caps.max_class_size < 1) v.add("classes.max_class_size: must be >= 1");
  if (c.closures.caps.max_joint_models < 1) v.add("classes.max_joint_models: must be >= 1");
  if (c.closures.caps.max_discriminators < 1) v.add("classes.max_discriminators: must be >= 1");
  if (auto doc = table_document(cls, "classes", base_dir, v)) {
    try {
      c.tables = classes_from_json(*doc);
    } catch (const Error& err) {
      v.add(std::string("classes.tables: ") + err.what());
    }
  }

  // run
  const YAML::Node run = root["run"];
  check_keys(run, "run",
             {"episodes", "delta", "beta_scale", "optimism", "seeds", "evaluation_cadence", "recompute_every",
              "strict_realizability", "workers"},
             v);
  auto& r = cfg.run;
  read_into(r.episodes, run, "run", "episodes", v);
  read_into(r.delta, run, "run", "delta", v);
  read_into(r.beta_scale, run, "run", "beta_scale", v);
  if (auto mode = read<std::string>(run, "run", "optimism", v)) {
    try {
      r.optimism = optimism_mode_from_string(*mode);
    } catch (const ConfigError&) {
      v.add("run.optimism: expected exact or pointwise, got '" + *mode + "'");
    }
  }
  if (run && run.IsMap() && run["seeds"]) {
    const YAML::Node seeds = run["seeds"];
    try {
      if (seeds.IsScalar()) r.seeds = {seeds.as<std::uint64_t>()};
      else r.seeds = seeds.as<std::vector<std::uint64_t>>();
    } catch (const YAML::Exception&) {
      v.add("run.seeds: expected a non-negative integer or a list of them");
    }
  }
  read_into(r.evaluation_cadence, run, "run", "evaluation_cadence", v);
  read_into(r.recompute_every, run, "run", "recompute_every", v);
  read_into(r.strict_realizability, run, "run", "strict_realizability", v);
  read_into(r.workers, run, "run", "workers", v);
  if (r.episodes < 1) v.add("run.episodes: must be >= 1, got " + std::to_string(r.episodes));
  if (!(r.delta > 0.0 && r.delta < 1.0)) v.add("run.delta: must lie in (0, 1)");
  if (!(r.beta_scale > 0.0)) v.add("run.beta_scale: must be positive");
  if (r.seeds.empty()) v.add("run.seeds: must not be empty");
  {
    std::set<std::uint64_t> seen;
    for (auto s : r.seeds) {
      if (!seen.insert(s).second) v.add("run.seeds: duplicate seed " + std::to_string(s));
    }
  }
  if (r.evaluation_cadence < 0) v.add("run.evaluation_cadence: must be >= 0");
  if (r.recompute_every < 1) v.add("run.recompute_every: must be >= 1");
  if (r.workers < 1) v.add("run.workers: must be >= 1");

  // diagnostics
  const YAML::Node diag = root["diagnostics"];
  check_keys(diag, "diagnostics", {"ill_posedness", "transfer", "naive_baseline", "policy_budget"}, v);
  auto& d = cfg.diagnostics;
  read_into(d.ill_posedness, diag, "diagnostics", "ill_posedness", v);
  read_into(d.transfer, diag, "diagnostics", "transfer", v);
  read_into(d.naive_baseline, diag, "diagnostics", "naive_baseline", v);
  read_into(d.policy_budget, diag, "diagnostics", "policy_budget", v);
  if (d.policy_budget < 1) v.add("diagnostics.policy_budget: must be >= 1");

  // output
  const YAML::Node out = root["output"];
  check_keys(out, "output", {"directory", "formats"}, v);
  read_into(cfg.output.directory, out, "output", "directory", v);
  if (auto formats = read<std::vector<std::string>>(out, "output", "formats", v)) {
    cfg.output.csv = cfg.output.json = false;
    for (const auto& f : *formats) {
      if (f == "csv") cfg.output.csv = true;
      else if (f == "json") cfg.output.json = true;
      else v.add("output.formats: unknown format '" + f + "'");
    }
  }

  if (!v.items.empty()) throw ValidationError(v.items);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides, path.parent_path());
}

std::pair<std::string, std::vector<std::string>> parse_sweep_param(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ValidationError({"--param: expected key=v1,v2,..., got '" + spec + "'"});
  }
  std::string key = spec.substr(0, eq);
  std::vector<std::string> values;
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw ValidationError({"--param: empty value in '" + spec + "'"});
    values.push_back(item);
  }
  return {key, values};
}

std::string config_to_json(const ScenarioConfig& cfg, int indent) {
  json j;
  j["name"] = cfg.name;
  const auto& e = cfg.environment;
  json env{{"generator", e.generator}, {"seed", e.seed}};
  if (e.mode) env["mode"] = to_string(*e.mode);
  auto opt_int = [&](const char* key, const std::optional<int>& x) {
    if (x) env[key] = *x;
  };
  opt_int("horizon", e.horizon);
  opt_int("num_states", e.num_states);
  opt_int("num_actions", e.num_actions);
  opt_int("num_feedbacks", e.num_feedbacks);
  opt_int("num_types", e.num_types);
  if (e.reward_noise_std) env["reward_noise_std"] = *e.reward_noise_std;
  if (e.trans_noise_std) env["trans_noise_std"] = *e.trans_noise_std;
  opt_int("grid_cells", e.grid_cells);
  auto dist = [](const Tensor& t) { return json{{"shape", t.shape()}, {"values", t.values()}}; };
  if (e.source_type_dist) env["source_type_dist"] = dist(*e.source_type_dist);
  if (e.target_type_dist) env["target_type_dist"] = dist(*e.target_type_dist);
  if (e.tables) env["tables"] = json::parse(model_to_json(*e.tables));
  j["environment"] = std::move(env);

  const auto& c = cfg.classes;
  json cls{{"closure_f", c.closures.closure_f},
           {"closure_g", c.closures.closure_g},
           {"max_class_size", c.closures.caps.max_class_size},
           {"max_joint_models", c.closures.caps.max_joint_models},
           {"max_discriminators", c.closures.caps.max_discriminators}};
  if (c.tables) cls["tables"] = json::parse(classes_to_json(*c.tables));
  j["classes"] = std::move(cls);

  const auto& r = cfg.run;
  j["run"] = json{{"episodes", r.episodes},
                  {"delta", r.delta},
                  {"beta_scale", r.beta_scale},
                  {"optimism", to_string(r.optimism)},
                  {"seeds", r.seeds},
                  {"evaluation_cadence", r.evaluation_cadence},
                  {"recompute_every", r.recompute_every},
                  {"strict_realizability", r.strict_realizability},
                  {"workers", r.workers}};
  const auto& d = cfg.diagnostics;
  j["diagnostics"] = json{{"ill_posedness", d.ill_posedness},
                          {"transfer", d.transfer},
                          {"naive_baseline", d.naive_baseline},
                          {"policy_budget", d.policy_budget}};
  json formats = json::array();
  if (cfg.output.csv) formats.push_back("csv");
  if (cfg.output.json) formats.push_back("json");
  j["output"] = json{{"directory", cfg.output.directory}, {"formats", formats}};
  json ov = json::array();
  for (const auto& [k, val] : cfg.overrides) ov.push_back(k + "=" + val);
  j["overrides"] = std::move(ov);
  j["source_text"] = cfg.source_text;
  return j.dump(indent);
}

namespace {

Tensor broadcast_dist(const Tensor& dist, int horizon) {
  if (dist.rank() == 2) return dist;
  const int T = dist.dim(0);
  Tensor out({horizon, T});
  for (int h = 0; h < horizon; ++h)
    for (int t = 0; t < T; ++t) out(h, t) = dist(t);
  return out;
}

void check_dist(const Tensor& dist, const StrategicModel& env, const char* key, Violations& v) {
  const std::string where = std::string("environment.") + key;
  if (dist.rank() != 2 || dist.dim(0) != env.horizon || dist.dim(1) != env.num_types) {
    v.add(where + ": expected " + std::to_string(env.horizon) + " rows of " + std::to_string(env.num_types) +
          " probabilities");
    return;
  }
  for (int h = 0; h < env.horizon; ++h) {
    if (!is_distribution(dist.slice({h}))) v.add(where + ": row " + std::to_string(h) + " is not a distribution");
  }
}

}  // namespace

Scenario build_scenario(const ScenarioConfig& cfg) {
  const auto& e = cfg.environment;
  Scenario sc;
  if (e.generator == "inline") {
    if (!e.tables) throw ValidationError({"environment.tables: required when generator is 'inline'"});
    sc.name = "inline";
    sc.seed = e.seed;
    sc.env = *e.tables;
  } else {
    GeneratorOptions options;
    options.grid_cells = e.grid_cells;
    sc = generate_scenario(e.generator, e.seed, options);
  }

  Violations v;
  StrategicModel& env = sc.env;
  if (e.reward_noise_std) env.reward_noise_std = *e.reward_noise_std;
  if (e.trans_noise_std) {
    if (env.mode != TransitionMode::Dynamical) v.add("environment.trans_noise_std: only meaningful in dynamical mode");
    env.trans_noise_std = *e.trans_noise_std;
  }
  if (e.source_type_dist) {
    Tensor dist = broadcast_dist(*e.source_type_dist, env.horizon);
    check_dist(dist, env, "source_type_dist", v);
    env.source_type_dist = std::move(dist);
  }
  if (e.target_type_dist) {
    Tensor dist = broadcast_dist(*e.target_type_dist, env.horizon);
    check_dist(dist, env, "target_type_dist", v);
    env.target_type_dist = std::move(dist);
  }
  if (e.grid_cells && env.mode != TransitionMode::Dynamical) {
    v.add("environment.grid_cells: only meaningful in dynamical mode");
  }
  if (e.grid_cells && e.generator == "inline") v.add("environment.grid_cells: set the grid inside the inline tables");
  if (e.mode && *e.mode != env.mode) {
    v.add(std::string("environment.mode: config says ") + to_string(*e.mode) + " but the tables are " +
          to_string(env.mode));
  }
  auto size_check = [&](const char* key, const std::optional<int>& expected, int actual) {
    if (expected && *expected != actual) {
      v.add(std::string("environment.") + key + ": config says " + std::to_string(*expected) + " but the tables have " +
            std::to_string(actual));
    }
  };
  size_check("horizon", e.horizon, env.horizon);
  size_check("num_states", e.num_states, env.num_states);
  size_check("num_actions", e.num_actions, env.num_actions);
  size_check("num_feedbacks", e.num_feedbacks, env.num_feedbacks);
  size_check("num_types", e.num_types, env.num_types);
  if (!v.items.empty()) throw ValidationError(v.items);

  if (e.source_type_dist) env.demean_confounds();
  env.validate();

  if (cfg.classes.tables) {
    sc.classes = *cfg.classes.tables;
  } else if (e.generator == "inline") {
    sc.classes = singleton_truth_classes(env);
  }
  sc.classes = close_classes(env, std::move(sc.classes), cfg.classes.closures);
  sc.classes.validate(env);
  if (sc.classes.mode() != env.mode) {
    throw ValidationError({std::string("classes: hypothesis tables are ") + to_string(sc.classes.mode()) +
                           " but the environment is " + to_string(env.mode)});
  }
  return sc;
}

RunConfig make_run_config(const ScenarioConfig& cfg, const Scenario& scenario, std::uint64_t seed) {
  RunConfig rc;
  rc.episodes = cfg.run.episodes;
  rc.delta = cfg.run.delta;
  rc.mode = scenario.env.mode;
  rc.optimism = cfg.run.optimism;
  rc.beta_scale = cfg.run.beta_scale;
  rc.seed = seed;
  rc.caps = cfg.classes.closures.caps;
  rc.evaluation_cadence = std::max(1, cfg.run.evaluation_cadence);
  rc.recompute_every = cfg.run.recompute_every;
  rc.strict_realizability = cfg.run.strict_realizability;
  return rc;
}

}  // namespace opme
