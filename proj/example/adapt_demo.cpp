// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Small end-to-end run: train a toy detector on clean synthetic scenes,
// then adapt it to fogged scenes with and without CGA.

#include <cstdio>

#include "sfod/sfod.hpp"

int main() {
  sfod::PipelineConfig cfg;
  cfg.source_scenes = 60;
  cfg.target_train_scenes = 60;
  cfg.target_test_scenes = 60;
  cfg.kinds = {"fog"};
  cfg.lr = 0.05;
  cfg.epochs = 5;
  cfg.classifier_accuracy = 0.7;

  const auto data = sfod::synthesize_experiment(cfg);
  const auto source = sfod::train_source(cfg, data.source);
  const auto& train = data.target_train.at(sfod::CorruptionKind::fog);
  const auto& test = data.target_test.at(sfod::CorruptionKind::fog);

  sfod::ToyDetector det = sfod::make_detector(cfg);
  det.set_parameters(source);
  std::printf("clean  direct      mAP %.3f\n", sfod::direct_test(det, data.target_test_clean, cfg).map_or(0));
  std::printf("fog    direct      mAP %.3f\n", sfod::direct_test(det, test, cfg).map_or(0));

  cfg.use_cga = false;
  std::printf("fog    self-train  mAP %.3f\n", sfod::adapt_and_evaluate(cfg, source, train, test).eval.map_or(0));
  cfg.use_cga = true;
  std::printf("fog    CGA         mAP %.3f\n", sfod::adapt_and_evaluate(cfg, source, train, test).eval.map_or(0));
}
