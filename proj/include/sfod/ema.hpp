// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "sfod/core/error.hpp"
#include "sfod/tensor_io.hpp"

namespace sfod {

inline constexpr double kDefaultEmaAlpha = 0.998;

/// Teacher weights tracked as an exponential moving average of the student.
/// Fixed alpha, no warm-up ramp. Single writer; copy the teacher map to read
/// a snapshot while updates continue elsewhere.
struct EmaState {
  double alpha = kDefaultEmaAlpha;
  NamedTensors teacher;
  std::uint64_t step_count = 0;
};

inline EmaState ema_init(const NamedTensors& source, double alpha = kDefaultEmaAlpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "alpha must lie in [0, 1]");
  return EmaState{alpha, source, 0};
}

/// teacher <- alpha * teacher + (1 - alpha) * student, tensor by tensor.
inline void ema_update(EmaState& state, const NamedTensors& student) {
  std::string offenders;
  auto note = [&](const std::string& s) { offenders += (offenders.empty() ? "" : ", ") + s; };
  for (const auto& [name, t] : state.teacher) {
    auto it = student.find(name);
    if (it == student.end())
      note(name + " (missing in student)");
    else if (it->second.shape != t.shape)
      note(name + " (shape mismatch)");
  }
  for (const auto& [name, t] : student)
    if (!state.teacher.contains(name)) note(name + " (missing in teacher)");
  if (!offenders.empty()) throw DataError("ema_update: parameter mismatch: " + offenders);

  const double a = state.alpha, b = 1.0 - state.alpha;
  for (auto& [name, t] : state.teacher) {
    const auto& s = student.at(name).values;
    for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = a * t.values[i] + b * s[i];
  }
  ++state.step_count;
}

}  // namespace sfod
