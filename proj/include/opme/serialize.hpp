#pragma once

// JSON round trips for models and classes. Tensors are written as
// {"shape": [...], "values": [...]} in row-major order; non-finite values
// become null.

#include <string>

#include "opme/classes.hpp"
#include "opme/env.hpp"

namespace opme {

std::string model_to_json(const StrategicModel& model, int indent = -1);
StrategicModel model_from_json(const std::string& text);

std::string classes_to_json(const HypothesisClasses& classes, int indent = -1);
HypothesisClasses classes_from_json(const std::string& text);

/// Shortest round-trip decimal form of a double; "inf", "-inf", "nan" for
/// non-finite values.
std::string format_double(double value);

}  // namespace opme
