#include "opme/serialize.hpp"

#include <charconv>
#include <cmath>

#include "json.hpp"

namespace opme {

using nlohmann::json;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) value = 0.0;  // fold -0 into 0
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

namespace {

json tensor_json(const Tensor& t) {
  json values = json::array();
  for (double v : t.values()) {
    if (std::isfinite(v)) values.push_back(v);
    else values.push_back(nullptr);
  }
  return json{{"shape", t.shape()}, {"values", std::move(values)}};
}

Tensor tensor_from(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("values"))
    throw ParseError(where + ": expected {\"shape\", \"values\"}");
  std::vector<int> shape = j.at("shape").get<std::vector<int>>();
  std::vector<double> values;
  for (const auto& v : j.at("values")) values.push_back(v.is_null() ? std::nan("") : v.get<double>());
  std::size_t expected = 1;
  for (int d : shape) {
    if (d < 0) throw ParseError(where + ": negative extent");
    expected *= static_cast<std::size_t>(d);
  }
  if (values.size() != expected)
    throw ParseError(where + ": " + std::to_string(values.size()) + " values for " + std::to_string(expected) +
                     " cells");
  return Tensor(std::move(shape), std::move(values));
}

json tensor_list(const std::vector<Tensor>& ts) {
  json out = json::array();
  for (const auto& t : ts) out.push_back(tensor_json(t));
  return out;
}

std::vector<Tensor> tensors_from(const json& j, const std::string& where) {
  std::vector<Tensor> out;
  if (!j.is_array()) throw ParseError(where + ": expected a list");
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(tensor_from(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

json map_json(const CoordinateMap& m) { return json{{"offset", tensor_json(m.offset)}, {"gain", tensor_json(m.gain)}}; }

CoordinateMap map_from(const json& j, const std::string& where) {
  return CoordinateMap{tensor_from(j.at("offset"), where + ".offset"), tensor_from(j.at("gain"), where + ".gain")};
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed document: ") + e.what());
  }
}

}  // namespace

std::string model_to_json(const StrategicModel& m, int indent) {
  json j;
  j["horizon"] = m.horizon;
  j["num_states"] = m.num_states;
  j["num_actions"] = m.num_actions;
  j["num_feedbacks"] = m.num_feedbacks;
  j["num_types"] = m.num_types;
  j["num_agent_actions"] = m.num_agent_actions;
  j["initial_state"] = m.initial_state;
  j["mode"] = to_string(m.mode);
  j["source_type_dist"] = tensor_json(m.source_type_dist);
  j["target_type_dist"] = tensor_json(m.target_type_dist);
  j["agent_reward"] = tensor_json(m.agent_reward);
  j["feedback_kernel"] = tensor_json(m.feedback_kernel);
  j["principal_reward"] = tensor_json(m.principal_reward);
  j["reward_bound"] = m.reward_bound;
  j["reward_confound"] = tensor_json(m.reward_confound);
  j["reward_noise_std"] = m.reward_noise_std;
  if (m.mode == TransitionMode::General) {
    j["transition_kernel"] = tensor_json(m.transition_kernel);
  } else {
    j["grid"] = json{{"lower", m.grid.lower}, {"upper", m.grid.upper}, {"cells", m.grid.cells}};
    j["initial_point"] = m.initial_point;
    json maps = json::array();
    for (const auto& step : m.mean_map) {
      json row = json::array();
      for (const auto& cm : step) row.push_back(map_json(cm));
      maps.push_back(std::move(row));
    }
    j["mean_map"] = std::move(maps);
    j["trans_confound"] = tensor_json(m.trans_confound);
    j["trans_noise_std"] = m.trans_noise_std;
  }
  return j.dump(indent);
}

StrategicModel model_from_json(const std::string& text) {
  json j = parse(text);
  return guarded([&] {
    StrategicModel m;
    m.horizon = j.at("horizon").get<int>();
    m.num_states = j.at("num_states").get<int>();
    m.num_actions = j.at("num_actions").get<int>();
    m.num_feedbacks = j.at("num_feedbacks").get<int>();
    m.num_types = j.at("num_types").get<int>();
    m.num_agent_actions = j.value("num_agent_actions", 1);
    m.initial_state = j.value("initial_state", 0);
    m.mode = transition_mode_from_string(j.value("mode", std::string("general")));
    m.source_type_dist = tensor_from(j.at("source_type_dist"), "source_type_dist");
    m.target_type_dist = tensor_from(j.at("target_type_dist"), "target_type_dist");
    m.agent_reward = tensor_from(j.at("agent_reward"), "agent_reward");
    m.feedback_kernel = tensor_from(j.at("feedback_kernel"), "feedback_kernel");
    m.principal_reward = tensor_from(j.at("principal_reward"), "principal_reward");
    m.reward_bound = j.value("reward_bound", 1.0);
    m.reward_confound = j.contains("reward_confound") ? tensor_from(j["reward_confound"], "reward_confound")
                                                      : Tensor({m.horizon, m.num_types});
    m.reward_noise_std = j.value("reward_noise_std", 0.0);
    if (m.mode == TransitionMode::General) {
      m.transition_kernel = tensor_from(j.at("transition_kernel"), "transition_kernel");
    } else {
      const json& g = j.at("grid");
      m.grid.lower = g.at("lower").get<std::vector<double>>();
      m.grid.upper = g.at("upper").get<std::vector<double>>();
      m.grid.cells = g.at("cells").get<std::vector<int>>();
      m.initial_point = j.at("initial_point").get<std::vector<double>>();
      const json& maps = j.at("mean_map");
      for (std::size_t h = 0; h < maps.size(); ++h) {
        std::vector<CoordinateMap> row;
        for (std::size_t i = 0; i < maps[h].size(); ++i)
          row.push_back(map_from(maps[h][i], "mean_map[" + std::to_string(h) + "][" + std::to_string(i) + "]"));
        m.mean_map.push_back(std::move(row));
      }
      m.trans_confound = j.contains("trans_confound") ? tensor_from(j["trans_confound"], "trans_confound")
                                                      : Tensor({m.horizon, m.num_types, m.grid.dim()});
      m.trans_noise_std = j.value("trans_noise_std", 1.0);
      m.num_states = m.grid.num_cells();
      m.initial_state = m.grid.cell_of(m.initial_point);
    }
    return m;
  });
}

std::string classes_to_json(const HypothesisClasses& c, int indent) {
  json j;
  j["horizon"] = c.horizon;
  j["bound"] = c.bound;
  json reward = json::array(), transition = json::array(), f = json::array(), g = json::array();
  for (const auto& step : c.reward) reward.push_back(tensor_list(step));
  for (const auto& step : c.transition) transition.push_back(tensor_list(step));
  for (const auto& step : c.disc_f) f.push_back(tensor_list(step));
  for (const auto& step : c.disc_g) g.push_back(tensor_list(step));
  j["reward"] = std::move(reward);
  j["transition"] = std::move(transition);
  j["disc_f"] = std::move(f);
  j["disc_g"] = std::move(g);
  if (!c.dynamics.empty()) {
    json dyn = json::array();
    for (const auto& step : c.dynamics) {
      json axes = json::array();
      for (const auto& axis : step) {
        json members = json::array();
        for (const auto& cm : axis) members.push_back(map_json(cm));
        axes.push_back(std::move(members));
      }
      dyn.push_back(std::move(axes));
    }
    j["dynamics"] = std::move(dyn);
    j["truth_dynamics"] = c.truth_dynamics;
  }
  j["truth_reward"] = c.truth_reward;
  j["truth_transition"] = c.truth_transition;
  return j.dump(indent);
}

HypothesisClasses classes_from_json(const std::string& text) {
  json j = parse(text);
  return guarded([&] {
    HypothesisClasses c;
    c.horizon = j.at("horizon").get<int>();
    c.bound = j.value("bound", 1.0);
    auto nested = [&](const char* key) {
      std::vector<std::vector<Tensor>> out;
      if (!j.contains(key)) return out;
      const json& arr = j.at(key);
      for (std::size_t h = 0; h < arr.size(); ++h)
        out.push_back(tensors_from(arr[h], std::string(key) + "[" + std::to_string(h) + "]"));
      return out;
    };
    c.reward = nested("reward");
    c.transition = nested("transition");
    c.disc_f = nested("disc_f");
    c.disc_g = nested("disc_g");
    if (j.contains("dynamics")) {
      const json& dyn = j.at("dynamics");
      for (std::size_t h = 0; h < dyn.size(); ++h) {
        std::vector<std::vector<CoordinateMap>> axes;
        for (std::size_t i = 0; i < dyn[h].size(); ++i) {
          std::vector<CoordinateMap> members;
          for (std::size_t k = 0; k < dyn[h][i].size(); ++k)
            members.push_back(map_from(dyn[h][i][k], "dynamics[" + std::to_string(h) + "][" + std::to_string(i) +
                                                         "][" + std::to_string(k) + "]"));
          axes.push_back(std::move(members));
        }
        c.dynamics.push_back(std::move(axes));
      }
      c.truth_dynamics = j.value("truth_dynamics", std::vector<std::vector<int>>{});
    }
    c.truth_reward = j.value("truth_reward", std::vector<int>(static_cast<std::size_t>(c.horizon), -1));
    c.truth_transition = j.value("truth_transition", std::vector<int>(static_cast<std::size_t>(c.horizon), -1));
    return c;
  });
}

}  // namespace opme
