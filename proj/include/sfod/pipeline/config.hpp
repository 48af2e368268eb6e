// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <type_traits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sfod/augment.hpp"
#include "sfod/core/error.hpp"
#include "sfod/corrupt/severity.hpp"
#include "sfod/ema.hpp"
#include "sfod/geometry.hpp"
#include "sfod/pipeline/scenes.hpp"
#include "sfod/pseudo_label.hpp"

namespace sfod {

/// Every knob of an adaptation run. Serialized as a flat JSON object; the
/// resolved form written next to each output reproduces the run exactly.
struct PipelineConfig {
  // method
  double tau = kDefaultTau;
  double lambda = 0.2;
  double alpha = kDefaultEmaAlpha;
  double nms_iou = kDefaultNmsIou;
  double temperature = kDefaultTemperature;
  bool use_cga = true;
  std::string prompt_template{kDefaultPromptTemplate};
  int patch_size = kDefaultPatchSize;

  // optimization
  double lr = 0.001;
  double momentum = 0.9;
  std::size_t batch_size = 2;
  std::size_t epochs = 1;
  std::size_t steps = 0;  // 0: epochs over the target set
  std::size_t ema_stride = 1;

  // augmentation
  double flip_prob = 0.5;
  StrongAugmentConfig strong;

  // seeds and workers
  std::uint64_t seed = 0;
  unsigned workers = 1;

  // backends
  std::string detector = "toy";
  std::string classifier = "centroid";  // centroid | file
  double classifier_sigma = 0.0;
  double classifier_accuracy = 0.0;  // > 0: calibrate sigma to this accuracy
  std::size_t embedding_dim = 64;
  std::string text_embeddings;
  std::string image_embeddings;
  double objectness_threshold = 0.5;

  // synthetic harness
  std::size_t num_classes = 4;
  int image_size = 128;
  std::size_t source_scenes = 200;
  std::size_t target_train_scenes = 200;
  std::size_t target_test_scenes = 200;
  ProposalConfig proposals;
  double source_lr = 0.5;
  std::size_t source_epochs = 40;
  std::size_t source_batch = 32;
  std::vector<std::string> kinds{"fog", "frost", "cloudy"};
  int severity = kDefaultSeverity;

  /// Visits (key, member) for every field; shared by load, save and checks.
  template <typename Self, typename F>
  static void fields(Self& c, F&& f) {
    f("tau", c.tau);
    f("lambda", c.lambda);
    f("alpha", c.alpha);
    f("nms_iou", c.nms_iou);
    f("temperature", c.temperature);
    f("use_cga", c.use_cga);
    f("prompt_template", c.prompt_template);
    f("patch_size", c.patch_size);
    f("lr", c.lr);
    f("momentum", c.momentum);
    f("batch_size", c.batch_size);
    f("epochs", c.epochs);
    f("steps", c.steps);
    f("ema_stride", c.ema_stride);
    f("flip_prob", c.flip_prob);
    f("strong_jitter_prob", c.strong.jitter_prob);
    f("strong_brightness", c.strong.brightness);
    f("strong_contrast", c.strong.contrast);
    f("strong_saturation", c.strong.saturation);
    f("strong_hue", c.strong.hue);
    f("strong_grayscale_prob", c.strong.grayscale_prob);
    f("strong_blur_prob", c.strong.blur_prob);
    f("strong_blur_sigma_min", c.strong.blur_sigma_min);
    f("strong_blur_sigma_max", c.strong.blur_sigma_max);
    f("strong_cutout_prob", c.strong.cutout_prob);
    f("strong_cutout_min", c.strong.cutout_min);
    f("strong_cutout_max", c.strong.cutout_max);
    f("strong_cutout_max_frac", c.strong.cutout_max_frac);
    f("strong_cutout_fill", c.strong.cutout_fill);
    f("seed", c.seed);
    f("workers", c.workers);
    f("detector", c.detector);
    f("classifier", c.classifier);
    f("classifier_sigma", c.classifier_sigma);
    f("classifier_accuracy", c.classifier_accuracy);
    f("embedding_dim", c.embedding_dim);
    f("text_embeddings", c.text_embeddings);
    f("image_embeddings", c.image_embeddings);
    f("objectness_threshold", c.objectness_threshold);
    f("num_classes", c.num_classes);
    f("image_size", c.image_size);
    f("source_scenes", c.source_scenes);
    f("target_train_scenes", c.target_train_scenes);
    f("target_test_scenes", c.target_test_scenes);
    f("proposals_per_object", c.proposals.per_object);
    f("proposal_distractors", c.proposals.distractors);
    f("proposal_center_sigma", c.proposals.center_sigma);
    f("proposal_size_sigma", c.proposals.size_sigma);
    f("proposal_angle_sigma", c.proposals.angle_sigma);
    f("source_lr", c.source_lr);
    f("source_epochs", c.source_epochs);
    f("source_batch", c.source_batch);
    f("kinds", c.kinds);
    f("severity", c.severity);
  }

  std::vector<CorruptionKind> corruption_kinds() const {
    std::vector<CorruptionKind> out;
    for (const auto& k : kinds) {
      auto p = parse_corruption(k);
      if (!p) throw ConfigError("kinds", "unknown corruption kind '" + k + "'");
      out.push_back(*p);
    }
    return out;
  }

  std::vector<std::string> class_names() const { return scene_class_names(num_classes); }

  /// Range checks; throws ConfigError naming the first offending key.
  void validate() const {
    auto unit = [](const char* key, double v) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, std::string(key) + " must lie in [0, 1]");
    };
    auto positive = [](const char* key, double v) {
      if (!(v > 0.0)) throw ConfigError(key, std::string(key) + " must be positive");
    };
    unit("tau", tau);
    unit("lambda", lambda);
    unit("alpha", alpha);
    unit("nms_iou", nms_iou);
    positive("temperature", temperature);
    build_prompts({"x"}, prompt_template);
    if (patch_size < 1) throw ConfigError("patch_size", "patch_size must be >= 1");
    positive("lr", lr);
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "momentum must lie in [0, 1)");
    if (batch_size < 1) throw ConfigError("batch_size", "batch_size must be >= 1");
    if (epochs < 1 && steps == 0) throw ConfigError("epochs", "epochs must be >= 1 when steps is 0");
    if (ema_stride < 1) throw ConfigError("ema_stride", "ema_stride must be >= 1");
    unit("flip_prob", flip_prob);
    unit("strong_jitter_prob", strong.jitter_prob);
    unit("strong_grayscale_prob", strong.grayscale_prob);
    unit("strong_blur_prob", strong.blur_prob);
    unit("strong_cutout_prob", strong.cutout_prob);
    unit("strong_cutout_max_frac", strong.cutout_max_frac);
    if (!(strong.hue >= 0.0 && strong.hue <= 0.5)) throw ConfigError("strong_hue", "strong_hue must lie in [0, 0.5]");
    if (strong.brightness < 0 || strong.contrast < 0 || strong.saturation < 0)
      throw ConfigError("strong_brightness", "jitter strengths must be >= 0");
    if (!(strong.blur_sigma_min >= 0 && strong.blur_sigma_max >= strong.blur_sigma_min))
      throw ConfigError("strong_blur_sigma_min", "need 0 <= strong_blur_sigma_min <= strong_blur_sigma_max");
    if (strong.cutout_min < 0 || strong.cutout_max < strong.cutout_min)
      throw ConfigError("strong_cutout_min", "need 0 <= strong_cutout_min <= strong_cutout_max");
    if (strong.cutout_fill.size() != 3) throw ConfigError("strong_cutout_fill", "strong_cutout_fill needs 3 values");
    if (workers < 1) throw ConfigError("workers", "workers must be >= 1");
    if (detector != "toy") throw ConfigError("detector", "unknown detector '" + detector + "' (expected toy)");
    if (classifier != "centroid" && classifier != "file")
      throw ConfigError("classifier", "unknown classifier '" + classifier + "' (expected centroid or file)");
    if (classifier_sigma < 0) throw ConfigError("classifier_sigma", "classifier_sigma must be >= 0");
    if (classifier_accuracy != 0.0 && !(classifier_accuracy > 1.0 / static_cast<double>(num_classes) && classifier_accuracy < 1.0))
      throw ConfigError("classifier_accuracy", "classifier_accuracy must be 0 (off) or lie in (1/K, 1)");
    if (embedding_dim <= num_classes) throw ConfigError("embedding_dim", "embedding_dim must exceed num_classes");
    if (classifier == "file" && (text_embeddings.empty() || image_embeddings.empty()))
      throw ConfigError("text_embeddings", "classifier 'file' needs text_embeddings and image_embeddings");
    unit("objectness_threshold", objectness_threshold);
    if (num_classes < kMinSceneClasses || num_classes > kMaxSceneClasses)
      throw ConfigError("num_classes", "num_classes must lie in [2, 16]");
    if (image_size < 32) throw ConfigError("image_size", "image_size must be >= 32");
    if (source_scenes < 1) throw ConfigError("source_scenes", "source_scenes must be >= 1");
    if (target_train_scenes < 1) throw ConfigError("target_train_scenes", "target_train_scenes must be >= 1");
    if (target_test_scenes < 1) throw ConfigError("target_test_scenes", "target_test_scenes must be >= 1");
    if (proposals.center_sigma < 0 || proposals.size_sigma < 0 || proposals.angle_sigma < 0)
      throw ConfigError("proposal_center_sigma", "proposal jitter must be >= 0");
    positive("source_lr", source_lr);
    if (source_batch < 1) throw ConfigError("source_batch", "source_batch must be >= 1");
    if (severity < 1 || severity > 5) throw ConfigError("severity", "severity must lie in [1, 5]");
    corruption_kinds();
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    fields(*this, [&](const char* key, const auto& v) { j[key] = v; });
    return j;
  }

  /// Applies the keys present in `j` on top of the current values. Unknown
  /// keys and type mismatches throw ConfigError naming the key.
  void merge_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config", "config must be a JSON object");
    std::set<std::string> known;
    fields(*this, [&](const char* key, auto&) { known.insert(key); });
    for (const auto& [key, v] : j.items())
      if (!known.contains(key)) throw ConfigError(key, "unknown config key '" + key + "'");
    fields(*this, [&](const char* key, auto& member) {
      auto it = j.find(key);
      if (it == j.end()) return;
      using T = std::decay_t<decltype(member)>;
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError(key, std::string(key) + " must be a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError(key, std::string(key) + " must be a string");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigError(key, std::string(key) + " must be a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError(key, std::string(key) + " must be an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError(key, std::string(key) + " must be a number");
      } else {
        if (!it->is_array()) throw ConfigError(key, std::string(key) + " must be an array");
      }
      try {
        member = it->template get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(key, std::string(key) + " has the wrong type");
      }
    });
  }

  static PipelineConfig from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.merge_json(j);
    c.validate();
    return c;
  }

  /// "key=value" override; the value is parsed as JSON and falls back to a
  /// plain string.
  void set_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    nlohmann::json v = nlohmann::json::parse(text, nullptr, false);
    if (v.is_discarded()) v = text;
    merge_json(nlohmann::json{{key, v}});
  }

  std::string dump() const { return to_json().dump(2) + "\n"; }
  friend bool operator==(const PipelineConfig& a, const PipelineConfig& b) { return a.to_json() == b.to_json(); }
};

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("malformed config: ") + e.what());
  }
  return PipelineConfig::from_json(j);
}

}  // namespace sfod
