// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sfod/core/error.hpp"

namespace sfod {

/// Corruption kinds in results-table order: Noise, Blur, Weather, Digital,
/// then the cloud composite.
enum class CorruptionKind {
  gaussian_noise,
  shot_noise,
  impulse_noise,
  speckle_noise,
  defocus_blur,
  glass_blur,
  motion_blur,
  zoom_blur,
  gaussian_blur,
  snow,
  frost,
  fog,
  brightness,
  spatter,
  contrast,
  elastic,
  pixelate,
  jpeg,
  saturate,
  cloudy,
};

inline constexpr std::size_t kNumCorruptionKinds = 20;
inline constexpr int kDefaultSeverity = 3;

inline constexpr std::array<std::string_view, kNumCorruptionKinds> kCorruptionNames{
    "gaussian_noise", "shot_noise", "impulse_noise", "speckle_noise", "defocus_blur",
    "glass_blur",     "motion_blur", "zoom_blur",    "gaussian_blur", "snow",
    "frost",          "fog",         "brightness",   "spatter",       "contrast",
    "elastic",        "pixelate",    "jpeg",         "saturate",      "cloudy"};

/// Short column labels for printed tables.
inline constexpr std::array<std::string_view, kNumCorruptionKinds> kCorruptionLabels{
    "Ga.",   "Shot", "Im.",  "Spec.", "De.",  "Glass", "Mo.",   "Zoom", "Ga.Bl", "Snow",
    "Frost", "Fog",  "Br.",  "Spat.", "Co.",  "El.",   "Pixel", "JPEG", "Sa.",   "Cloudy"};

inline constexpr std::string_view to_string(CorruptionKind k) noexcept {
  return kCorruptionNames[static_cast<std::size_t>(k)];
}

inline std::optional<CorruptionKind> parse_corruption(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNumCorruptionKinds; ++i)
    if (kCorruptionNames[i] == name) return static_cast<CorruptionKind>(i);
  return std::nullopt;
}

inline std::vector<CorruptionKind> all_corruptions() {
  std::vector<CorruptionKind> v;
  for (std::size_t i = 0; i < kNumCorruptionKinds; ++i) v.push_back(static_cast<CorruptionKind>(i));
  return v;
}

/// The full description of one corrupted image.
struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  int severity = kDefaultSeverity;
  std::uint64_t seed = 0;
};

/// Per-kind, per-severity parameter tuples. Row s-1 holds severity s.
/// Parameter meaning per kind (all in pixels or [0,1] intensity units):
///   gaussian_noise  {sigma}              shot_noise     {photons}
///   impulse_noise   {amount}             speckle_noise  {sigma}
///   defocus_blur    {radius, alias_sigma}
///   glass_blur      {sigma, max_delta, iterations}
///   motion_blur     {radius, sigma}      zoom_blur      {max_zoom, step}
///   gaussian_blur   {sigma}
///   snow            {loc, scale, zoom, threshold, blur_radius, blur_sigma, blend}
///   frost           {image_weight, frost_weight}
///   fog             {strength, wibble_decay}
///   brightness      {delta}
///   spatter         {loc, scale, sigma, threshold, intensity, mud}
///   contrast        {factor}
///   elastic         {alpha, sigma, affine}
///   pixelate        {scale}              jpeg           {quality}
///   saturate        {factor, offset}     cloudy         {coverage, opacity}
class SeverityTable {
 public:
  using Rows = std::array<std::vector<double>, 5>;

  const std::vector<double>& params(CorruptionKind kind, int severity) const {
    if (severity < 1 || severity > 5) throw ConfigError("severity", "severity must lie in [1, 5]");
    return rows_.at(kind)[static_cast<std::size_t>(severity - 1)];
  }

  void set(CorruptionKind kind, Rows rows) { rows_[kind] = std::move(rows); }
  bool contains(CorruptionKind kind) const { return rows_.contains(kind); }
  const std::string& version() const noexcept { return version_; }
  void set_version(std::string v) { version_ = std::move(v); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = version_;
    for (const auto& [kind, rows] : rows_) {
      auto& arr = j["kinds"][std::string(to_string(kind))];
      for (const auto& r : rows) arr.push_back(r);
    }
    return j;
  }

  static SeverityTable from_json(const nlohmann::json& j) {
    SeverityTable t;
    if (!j.contains("version") || !j.contains("kinds"))
      throw ConfigError("severity_table", "severity table needs 'version' and 'kinds'");
    t.version_ = j.at("version").get<std::string>();
    for (const auto& [name, arr] : j.at("kinds").items()) {
      auto kind = parse_corruption(name);
      if (!kind) throw ConfigError(name, "unknown corruption kind '" + name + "' in severity table");
      if (!arr.is_array() || arr.size() != 5)
        throw ConfigError(name, "severity table entry '" + name + "' needs 5 rows");
      Rows rows;
      for (std::size_t s = 0; s < 5; ++s) rows[s] = arr[s].get<std::vector<double>>();
      t.rows_[*kind] = std::move(rows);
    }
    return t;
  }

 private:
  std::string version_;
  std::map<CorruptionKind, Rows> rows_;
};

/// Constants follow the ImageNet-C reference implementation except where
/// its severities are not monotone in degradation: saturate and elastic
/// levels 1-2 are replaced with milder versions of level 3, which itself is
/// unchanged. zoom_blur stores {max_zoom, step} for the canonical
/// arange(1, max_zoom, step) factor lists.
inline SeverityTable default_severity_table() {
  using K = CorruptionKind;
  SeverityTable t;
  t.set_version("sfod-severity-v1");
  t.set(K::gaussian_noise, {{{0.08}, {0.12}, {0.18}, {0.26}, {0.38}}});
  t.set(K::shot_noise, {{{60}, {25}, {12}, {5}, {3}}});
  t.set(K::impulse_noise, {{{0.03}, {0.06}, {0.09}, {0.17}, {0.27}}});
  t.set(K::speckle_noise, {{{0.15}, {0.2}, {0.35}, {0.45}, {0.6}}});
  t.set(K::defocus_blur, {{{3, 0.1}, {4, 0.5}, {6, 0.5}, {8, 0.5}, {10, 0.5}}});
  t.set(K::glass_blur, {{{0.7, 1, 2}, {0.9, 2, 1}, {1, 2, 3}, {1.1, 3, 2}, {1.5, 4, 2}}});
  t.set(K::motion_blur, {{{10, 3}, {15, 5}, {15, 8}, {15, 12}, {20, 15}}});
  t.set(K::zoom_blur, {{{1.11, 0.01}, {1.16, 0.01}, {1.21, 0.02}, {1.26, 0.02}, {1.31, 0.03}}});
  t.set(K::gaussian_blur, {{{1}, {2}, {3}, {4}, {6}}});
  t.set(K::snow, {{{0.1, 0.3, 3, 0.5, 10, 4, 0.8},
                   {0.2, 0.3, 2, 0.5, 12, 4, 0.7},
                   {0.55, 0.3, 4, 0.9, 12, 8, 0.7},
                   {0.55, 0.3, 4.5, 0.85, 12, 8, 0.65},
                   {0.55, 0.3, 2.5, 0.85, 12, 12, 0.55}}});
  // Frost weights at 4-5 and mud coverage at 4-5 are raised above the
  // ImageNet-C values so mean PSNR stays non-increasing in severity.
  t.set(K::frost, {{{1, 0.4}, {0.8, 0.6}, {0.7, 0.7}, {0.65, 0.75}, {0.6, 0.8}}});
  t.set(K::fog, {{{1.5, 2}, {2.0, 2}, {2.5, 1.7}, {2.5, 1.5}, {3.0, 1.4}}});
  t.set(K::brightness, {{{0.1}, {0.2}, {0.3}, {0.4}, {0.5}}});
  t.set(K::spatter, {{{0.65, 0.3, 4, 0.69, 0.6, 0},
                      {0.65, 0.3, 3, 0.68, 0.6, 0},
                      {0.65, 0.3, 2, 0.68, 0.5, 0},
                      {0.72, 0.3, 1, 0.65, 1.5, 1},
                      {0.76, 0.4, 1, 0.65, 1.5, 1}}});
  t.set(K::contrast, {{{0.4}, {0.3}, {0.2}, {0.1}, {0.05}}});
  t.set(K::elastic, {{{7.32, 2.44, 2.44}, {9.76, 2.44, 3.66}, {12.2, 2.44, 4.88}, {17.08, 2.44, 4.88},
                      {29.28, 2.44, 4.88}}});
  t.set(K::pixelate, {{{0.6}, {0.5}, {0.4}, {0.3}, {0.25}}});
  t.set(K::jpeg, {{{25}, {18}, {15}, {10}, {7}}});
  t.set(K::saturate, {{{1.5, 0}, {1.75, 0}, {2, 0}, {5, 0.1}, {20, 0.2}}});
  t.set(K::cloudy, {{{0.3, 0.4}, {0.4, 0.5}, {0.5, 0.6}, {0.6, 0.7}, {0.7, 0.8}}});
  return t;
}

inline SeverityTable load_severity_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open severity table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("severity_table", std::string("malformed severity table: ") + e.what());
  }
  auto t = SeverityTable::from_json(j);
  for (auto k : all_corruptions())
    if (!t.contains(k)) throw ConfigError(std::string(to_string(k)), "severity table lacks kind " + std::string(to_string(k)));
  return t;
}

}  // namespace sfod
