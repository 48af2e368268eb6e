// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Mean-teacher self-training with CLIP-guided aggregation, plus the
// desk-scale experiment harness built around it.
//
// One adaptation step:
//   weak view -> teacher -> NMS -> [zero-shot scores -> refine] -> tau
//   strong view of the same frame -> student loss vs pseudo-labels
//   SGD step -> EMA update of the teacher

#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sfod/augment.hpp"
#include "sfod/backends.hpp"
#include "sfod/core/error.hpp"
#include "sfod/core/image_io.hpp"
#include "sfod/core/parallel.hpp"
#include "sfod/core/rng.hpp"
#include "sfod/corrupt.hpp"
#include "sfod/ema.hpp"
#include "sfod/eval.hpp"
#include "sfod/geometry.hpp"
#include "sfod/pipeline/config.hpp"
#include "sfod/pipeline/scenes.hpp"
#include "sfod/pseudo_label.hpp"
#include "sfod/tensor_io.hpp"

namespace sfod {

// ---- run report ----------------------------------------------------------------

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::size_t detections = 0;     // teacher boxes after NMS
  std::size_t pseudo_labels = 0;  // after tau
  std::size_t pseudo_correct = 0; // pseudo-labels matching a same-class object (diagnostic only)
  std::size_t compared = 0;       // boxes with a zero-shot score
  std::size_t agreements = 0;     // ... whose argmax matches the teacher's
  std::size_t samples = 0;        // student training samples
  bool skipped = false;
  double loss_roi = 0.0;
  double loss_rpn = 0.0;

  std::optional<double> agreement_rate() const {
    return compared ? std::optional<double>(static_cast<double>(agreements) / static_cast<double>(compared)) : std::nullopt;
  }
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct RunReport {
  std::string method;
  std::vector<StepRecord> steps;
  std::map<std::string, EvalResult> results;  // final evaluation per variant
  std::string teacher_sha256;                  // digest of the final teacher file

  std::size_t skipped_steps() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.skipped;
    return n;
  }
  std::size_t total_pseudo_labels() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.pseudo_labels;
    return n;
  }
  std::size_t total_pseudo_correct() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.pseudo_correct;
    return n;
  }
  friend bool operator==(const RunReport&, const RunReport&) = default;
};

inline nlohmann::json eval_to_json(const EvalResult& r) {
  nlohmann::json j;
  j["map"] = r.map ? nlohmann::json(*r.map) : nlohmann::json(nullptr);
  j["ap"] = nlohmann::json::array();
  j["counts"] = nlohmann::json::array();
  for (std::size_t c = 0; c < r.ap.size(); ++c) {
    j["ap"].push_back(r.ap[c] ? nlohmann::json(*r.ap[c]) : nlohmann::json(nullptr));
    const auto& n = r.counts[c];
    j["counts"].push_back({{"gt", n.gt}, {"det", n.det}, {"tp", n.tp}, {"fp", n.fp}});
  }
  return j;
}

/// One JSON object per line: a record per step, then a summary.
inline std::string format_report(const RunReport& r) {
  std::string out;
  for (const auto& s : r.steps) {
    nlohmann::json j{{"record", "step"},
                     {"step", s.step},
                     {"epoch", s.epoch},
                     {"detections", s.detections},
                     {"pseudo_labels", s.pseudo_labels},
                     {"pseudo_correct", s.pseudo_correct},
                     {"compared", s.compared},
                     {"agreements", s.agreements},
                     {"samples", s.samples},
                     {"skipped", s.skipped},
                     {"loss_roi", s.loss_roi},
                     {"loss_rpn", s.loss_rpn}};
    const auto rate = s.agreement_rate();
    j["agreement"] = rate ? nlohmann::json(*rate) : nlohmann::json(nullptr);
    out += j.dump() + "\n";
  }
  nlohmann::json sum{{"record", "summary"},
                     {"method", r.method},
                     {"steps", r.steps.size()},
                     {"skipped_steps", r.skipped_steps()},
                     {"pseudo_labels", r.total_pseudo_labels()},
                     {"teacher_sha256", r.teacher_sha256}};
  sum["results"] = nlohmann::json::object();
  for (const auto& [name, e] : r.results) sum["results"][name] = eval_to_json(e);
  out += sum.dump() + "\n";
  return out;
}

// ---- detection and evaluation --------------------------------------------------

/// Proposals for every scene, keyed by (seed, scene id).
inline std::vector<std::vector<OrientedBox>> proposals_for(const Dataset& ds, const PipelineConfig& cfg) {
  std::vector<std::vector<OrientedBox>> out(ds.size());
  parallel_for(ds.size(), cfg.workers, [&](std::size_t i) { out[i] = make_proposals(ds[i], cfg.proposals, cfg.seed); });
  return out;
}

/// infer -> NMS -> argmax per box.
inline std::vector<ScoredBox> detect(const Detector& det, const Image& img, const std::vector<OrientedBox>& proposals,
                                     double nms_iou) {
  return filter_by_confidence(nms_rotated(det.infer(img, proposals), nms_iou), 0.0);
}

/// Source model applied unchanged to a dataset.
inline EvalResult direct_test(const Detector& det, const Dataset& ds, const PipelineConfig& cfg) {
  const auto props = proposals_for(ds, cfg);
  std::vector<std::vector<ScoredBox>> dets(ds.size());
  std::vector<std::vector<GroundTruthBox>> gts(ds.size());
  parallel_for(ds.size(), cfg.workers, [&](std::size_t i) {
    dets[i] = detect(det, ds[i].image, props[i], cfg.nms_iou);
    gts[i] = ds[i].gt;
  });
  return evaluate(dets, gts, det.num_classes());
}

inline ToyDetector make_detector(const PipelineConfig& cfg) {
  if (cfg.detector != "toy") throw ConfigError("detector", "unknown detector '" + cfg.detector + "'");
  return ToyDetector(cfg.num_classes, cfg.momentum, cfg.objectness_threshold);
}

// ---- source training ----------------------------------------------------------

/// Supervised recipe for the toy detector on labeled source scenes:
/// proposals at IoU >= 0.5 with an object are positives of its class,
/// proposals below 0.3 are background, the rest are ignored. Minibatch SGD
/// with momentum from a small random init.
inline NamedTensors train_source(const PipelineConfig& cfg, const Dataset& source) {
  ToyDetector det = make_detector(cfg);
  det.randomize(derive_key(cfg.seed, 0x50C3));
  const auto props = proposals_for(source, cfg);
  std::vector<std::vector<TrainingSample>> per_image(source.size());
  parallel_for(source.size(), cfg.workers, [&](std::size_t i) {
    TrainingImage ti{&source[i].image, props[i], {}};
    for (const auto& p : props[i]) {
      double best = 0.0;
      std::size_t cls = 0;
      for (const auto& g : source[i].gt) {
        const double iou = rotated_iou(p, g.box);
        if (iou > best) best = iou, cls = g.class_id;
      }
      ProposalTarget t;
      if (best >= 0.5)
        t = {static_cast<int>(cls), 1};
      else if (best < 0.3)
        t = {-1, 0};
      ti.targets.push_back(t);
    }
    per_image[i] = ToyDetector::samples_of({ti});
  });
  std::vector<TrainingSample> samples;
  for (auto& v : per_image) samples.insert(samples.end(), v.begin(), v.end());
  if (samples.empty()) throw DataError("source set yields no training samples");

  std::vector<std::size_t> order(samples.size());
  for (std::size_t e = 0; e < cfg.source_epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(derive_key(cfg.seed, 0x50C4, e));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t b = 0; b < order.size(); b += cfg.source_batch) {
      std::vector<TrainingSample> batch;
      for (std::size_t j = b; j < std::min(order.size(), b + cfg.source_batch); ++j) batch.push_back(samples[order[j]]);
      auto lg = det.loss_and_grad(batch);
      if (!std::isfinite(lg.loss.total())) throw DataError("non-finite source loss in epoch " + std::to_string(e));
      det.apply_gradient_step(lg.grads, cfg.source_lr);
    }
  }
  return det.parameters();
}

// ---- zero-shot classifier -------------------------------------------------------

inline std::string patch_key(const std::string& image_id, std::size_t proposal_index) {
  return image_id + ":" + std::to_string(proposal_index);
}

/// Truth table for the centroid classifier: patch key -> class of the
/// object the proposal covers. The harness owns the labels; the adaptation
/// loop itself never reads them.
inline PatchLabeler oracle_labeler(const Dataset& ds, const PipelineConfig& cfg) {
  auto table = std::make_shared<std::unordered_map<std::string, std::optional<std::size_t>>>();
  const auto props = proposals_for(ds, cfg);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto truth = proposal_truth(props[i], ds[i].gt);
    for (std::size_t j = 0; j < truth.size(); ++j) (*table)[patch_key(ds[i].id, j)] = truth[j];
  }
  return [table](const Patch& p) -> std::optional<std::size_t> {
    auto it = table->find(p.key);
    return it == table->end() ? std::nullopt : it->second;
  };
}

/// classifier_accuracy > 0 calibrates sigma (memoized per K, D, target);
/// otherwise classifier_sigma is used as given.
inline double resolve_classifier_sigma(const PipelineConfig& cfg) {
  if (!(cfg.classifier_accuracy > 0.0)) return cfg.classifier_sigma;
  static std::mutex mu;
  static std::map<std::tuple<std::size_t, std::size_t, double>, double> memo;
  const auto key = std::make_tuple(cfg.num_classes, cfg.embedding_dim, cfg.classifier_accuracy);
  std::lock_guard lk(mu);
  auto it = memo.find(key);
  if (it == memo.end())
    it = memo.emplace(key, calibrate_sigma(cfg.num_classes, cfg.embedding_dim, cfg.classifier_accuracy, 0xCA1)).first;
  return it->second;
}

inline std::unique_ptr<ZeroShotClassifier> make_classifier(const PipelineConfig& cfg, const Dataset& target) {
  if (cfg.classifier == "file")
    return std::make_unique<FileEmbeddingClassifier>(load_file_embeddings(cfg.text_embeddings, cfg.image_embeddings));
  if (cfg.classifier != "centroid") throw ConfigError("classifier", "unknown classifier '" + cfg.classifier + "'");
  return std::make_unique<CentroidClassifier>(cfg.num_classes, cfg.embedding_dim, resolve_classifier_sigma(cfg),
                                              derive_key(cfg.seed, 0xC1A), oracle_labeler(target, cfg));
}

// ---- self-training --------------------------------------------------------------

/// Teacher output for one weak view, before and after refinement.
struct PseudoLabelStep {
  std::vector<std::size_t> proposal_index;  // per post-NMS detection
  std::vector<Detection> teacher;           // post-NMS teacher scores
  std::vector<Detection> refined;           // after CGA (== teacher when disabled)
  std::vector<PseudoLabel> labels;          // after tau
  std::vector<double> objectness;           // per proposal
  std::size_t compared = 0;
  std::size_t agreements = 0;
};

/// weak view -> teacher -> NMS -> optional CGA -> tau.
inline PseudoLabelStep make_pseudo_labels(const PipelineConfig& cfg, const Detector& teacher,
                                          const ZeroShotClassifier* classifier, const EmbeddingMatrix* text,
                                          const Image& weak, const std::vector<OrientedBox>& weak_proposals,
                                          const std::string& image_id) {
  PseudoLabelStep out;
  const InferResult inf = teacher.infer_detailed(weak, weak_proposals);
  out.objectness = inf.objectness;
  for (std::size_t k : nms_rotated_indices(inf.detections, cfg.nms_iou)) {
    out.teacher.push_back(inf.detections[k]);
    out.proposal_index.push_back(inf.kept[k]);
  }
  out.refined = out.teacher;
  if (cfg.use_cga && !out.teacher.empty()) {
    if (!classifier || !text) throw ConfigError("classifier", "CGA enabled without a zero-shot classifier");
    std::vector<OrientedBox> boxes;
    for (const auto& d : out.teacher) boxes.push_back(d.box);
    PatchBatch pb = extract_patches(weak, boxes, classifier->reads_pixels() ? cfg.patch_size : 1);
    for (auto& p : pb.patches) p.key = patch_key(image_id, out.proposal_index[p.box_index]);
    if (!pb.patches.empty()) {
      const EmbeddingMatrix emb = l2_normalized(classifier->embed_images(pb.patches), "image embedding");
      const ClassScores zs = zero_shot_scores(emb, *text, cfg.temperature);
      ClassScores yw(pb.patches.size(), teacher.num_classes());
      for (std::size_t r = 0; r < pb.patches.size(); ++r) {
        const auto& s = out.teacher[pb.patches[r].box_index].scores;
        std::copy(s.begin(), s.end(), yw.row(r).begin());
        ++out.compared;
        out.agreements += argmax(s) == argmax(zs.row_vector(r));
      }
      const ClassScores refined = cga_refine(yw, zs, cfg.lambda);
      for (std::size_t r = 0; r < pb.patches.size(); ++r) out.refined[pb.patches[r].box_index].scores = refined.row_vector(r);
    }
  }
  out.labels = filter_by_confidence(out.refined, cfg.tau);
  return out;
}

/// Student targets: proposals covering a pseudo-label (IoU >= 0.5, best
/// match) take its class with objectness 1; proposals the teacher rejected
/// on objectness become background; everything else is left untargeted.
inline std::vector<ProposalTarget> student_targets(const std::vector<OrientedBox>& proposals,
                                                   const std::vector<PseudoLabel>& labels,
                                                   const std::vector<double>& objectness, double objectness_threshold) {
  std::vector<ProposalTarget> t(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (std::isnan(objectness[i])) continue;
    double best = 0.5;
    for (const auto& l : labels) {
      const double iou = rotated_iou(proposals[i], l.box);
      if (iou >= best) {
        best = iou;
        t[i] = {static_cast<int>(l.class_id), 1};
      }
    }
    if (t[i].class_id < 0 && objectness[i] < objectness_threshold) t[i] = {-1, 0};
  }
  return t;
}

struct SelfTrainResult {
  RunReport report;
  NamedTensors teacher;
};

inline std::size_t total_steps(const PipelineConfig& cfg, std::size_t n) {
  if (cfg.steps) return cfg.steps;
  return cfg.epochs * ((n + cfg.batch_size - 1) / cfg.batch_size);
}

/// The adaptation loop. `teacher` and `student` must start from the same
/// source parameters; on return `teacher` holds the adapted EMA weights.
/// Ground truth in `target` is read only for the pseudo_correct diagnostic.
inline SelfTrainResult self_train(const PipelineConfig& cfg, Detector& teacher, Detector& student,
                                  const ZeroShotClassifier* classifier, const Dataset& target) {
  cfg.validate();
  if (teacher.parameters() != student.parameters())
    throw DataError("teacher and student must start from the same parameters");
  SelfTrainResult res;
  res.report.method = cfg.use_cga ? "cga" : "self_train";
  EmaState ema = ema_init(teacher.parameters(), cfg.alpha);
  if (target.empty()) {
    res.teacher = ema.teacher;
    res.report.teacher_sha256 = sha256_hex(encode_tensors(res.teacher));
    return res;
  }

  std::optional<EmbeddingMatrix> text;
  if (cfg.use_cga) {
    if (!classifier) throw ConfigError("classifier", "CGA enabled without a zero-shot classifier");
    text = l2_normalized(classifier->text_embeddings(build_prompts(cfg.class_names(), cfg.prompt_template)),
                         "text embedding");
  }
  const auto props = proposals_for(target, cfg);
  const std::size_t n = target.size(), steps = total_steps(cfg, n);
  std::vector<std::size_t> order;
  std::size_t order_epoch = static_cast<std::size_t>(-1);

  for (std::size_t s = 0; s < steps; ++s) {
    StepRecord rec;
    rec.step = s;
    rec.epoch = s * cfg.batch_size / n;
    std::vector<std::size_t> batch;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t pos = s * cfg.batch_size + b, epoch = pos / n;
      if (epoch != order_epoch) {
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
        CounterRng rng(derive_key(cfg.seed, 0x0DE5, epoch));
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        order_epoch = epoch;
      }
      batch.push_back(order[pos % n]);
    }

    struct PerImage {
      AugmentedPair pair;
      PseudoLabelStep pl;
      std::size_t correct = 0;
    };
    std::vector<PerImage> work(batch.size());
    parallel_for(batch.size(), cfg.workers, [&](std::size_t b) {
      const SyntheticScene& sc = target[batch[b]];
      PerImage& w = work[b];
      w.pair = make_augmented_pair(sc.image, props[batch[b]], derive_key(cfg.seed, 0xA06, s, b), cfg.strong, cfg.flip_prob);
      w.pl = make_pseudo_labels(cfg, teacher, classifier, text ? &*text : nullptr, w.pair.weak_image, w.pair.weak_labels,
                                sc.id);
      for (const auto& l : w.pl.labels)
        for (const auto& g : sc.gt) {
          const OrientedBox gb = w.pair.flipped ? flip_box(g.box, sc.image.width) : g.box;
          if (g.class_id == l.class_id && rotated_iou(gb, l.box) >= kVocIou) {
            ++w.correct;
            break;
          }
        }
    });

    std::vector<TrainingImage> train;
    for (auto& w : work) {
      rec.detections += w.pl.teacher.size();
      rec.pseudo_labels += w.pl.labels.size();
      rec.pseudo_correct += w.correct;
      rec.compared += w.pl.compared;
      rec.agreements += w.pl.agreements;
      train.push_back({&w.pair.strong_image, w.pair.weak_labels,
                       student_targets(w.pair.weak_labels, w.pl.labels, w.pl.objectness, cfg.objectness_threshold)});
    }
    if (rec.pseudo_labels == 0) {
      rec.skipped = true;
      res.report.steps.push_back(rec);
      continue;
    }
    for (const auto& t : train)
      for (const auto& pt : t.targets) rec.samples += pt.class_id >= 0 || pt.objectness >= 0;
    LossAndGrad lg = student.loss_and_grad(train);
    rec.loss_roi = lg.loss.roi;
    rec.loss_rpn = lg.loss.rpn;
    if (!std::isfinite(lg.loss.roi) || !std::isfinite(lg.loss.rpn)) {
      std::ostringstream os;
      os << "non-finite student loss at step " << s << " (roi=" << lg.loss.roi << ", rpn=" << lg.loss.rpn << ")";
      throw DataError(os.str());
    }
    student.apply_gradient_step(lg.grads, cfg.lr);
    if ((s + 1) % cfg.ema_stride == 0) {
      ema_update(ema, student.parameters());
      teacher.set_parameters(ema.teacher);
    }
    res.report.steps.push_back(rec);
  }
  res.teacher = ema.teacher;
  res.report.teacher_sha256 = sha256_hex(encode_tensors(res.teacher));
  return res;
}

// ---- experiments ----------------------------------------------------------------

/// Clean source scenes plus target train/test splits, clean and corrupted.
struct ExperimentData {
  Dataset source;
  Dataset target_train_clean;
  Dataset target_test_clean;
  std::map<CorruptionKind, Dataset> target_train;
  std::map<CorruptionKind, Dataset> target_test;
};

/// Generates everything in memory from cfg.seed.
inline ExperimentData synthesize_experiment(const PipelineConfig& cfg) {
  ExperimentData d;
  CounterRng src(derive_key(cfg.seed, 0x5C01)), trn(derive_key(cfg.seed, 0x5C02)), tst(derive_key(cfg.seed, 0x5C03));
  d.source = generate_scenes(cfg.source_scenes, cfg.num_classes, src, cfg.image_size, "src", cfg.workers);
  d.target_train_clean = generate_scenes(cfg.target_train_scenes, cfg.num_classes, trn, cfg.image_size, "trn", cfg.workers);
  d.target_test_clean = generate_scenes(cfg.target_test_scenes, cfg.num_classes, tst, cfg.image_size, "tst", cfg.workers);
  for (auto k : cfg.corruption_kinds()) {
    d.target_train[k] = corrupt_dataset(d.target_train_clean, k, cfg.severity, cfg.seed, cfg.workers);
    d.target_test[k] = corrupt_dataset(d.target_test_clean, k, cfg.severity, cfg.seed, cfg.workers);
  }
  return d;
}

/// Disk layout under ROOT: source/, clean/target_train/, clean/target_test/
/// (datasets), and target_train/<kind>/, target_test/<kind>/ as written by
/// generate_dataset.
inline void save_experiment(const std::filesystem::path& root, const ExperimentData& d, unsigned workers = 1) {
  save_dataset(root / "source", d.source, workers);
  save_dataset(root / "clean" / "target_train", d.target_train_clean, workers);
  save_dataset(root / "clean" / "target_test", d.target_test_clean, workers);
  for (const auto& [k, ds] : d.target_train) save_dataset(root / "target_train" / std::string(to_string(k)), ds, workers);
  for (const auto& [k, ds] : d.target_test) save_dataset(root / "target_test" / std::string(to_string(k)), ds, workers);
}

inline ExperimentData load_experiment(const std::filesystem::path& root, const std::vector<CorruptionKind>& kinds,
                                      unsigned workers = 1) {
  namespace fs = std::filesystem;
  ExperimentData d;
  d.source = load_dataset(root / "source", workers);
  if (fs::is_directory(root / "clean" / "target_test")) d.target_test_clean = load_dataset(root / "clean" / "target_test", workers);
  if (fs::is_directory(root / "clean" / "target_train"))
    d.target_train_clean = load_dataset(root / "clean" / "target_train", workers);
  for (auto k : kinds) {
    const std::string name(to_string(k));
    for (const char* split : {"target_train", "target_test"})
      if (!fs::is_directory(root / split / name / "images"))
        throw DataError("missing corrupted split for kind " + name + ": " + (root / split / name).string());
    d.target_train[k] = load_dataset(root / "target_train" / name, workers);
    d.target_test[k] = load_dataset(root / "target_test" / name, workers);
  }
  return d;
}

/// Self-train from source parameters on `train`, evaluate the adapted
/// teacher on `test`.
struct AdaptOutcome {
  RunReport report;
  NamedTensors teacher;
  EvalResult eval;
};

inline AdaptOutcome adapt_and_evaluate(const PipelineConfig& cfg, const NamedTensors& source_params, const Dataset& train,
                                       const Dataset& test) {
  ToyDetector teacher = make_detector(cfg), student = make_detector(cfg);
  teacher.set_parameters(source_params);
  student.set_parameters(source_params);
  std::unique_ptr<ZeroShotClassifier> clf;
  if (cfg.use_cga) clf = make_classifier(cfg, train);
  auto st = self_train(cfg, teacher, student, clf.get(), train);
  AdaptOutcome out{std::move(st.report), std::move(st.teacher), {}};
  out.eval = direct_test(teacher, test, cfg);
  out.report.results[out.report.method] = out.eval;
  return out;
}

/// One self-training run per lambda with identical seeds; runs execute in
/// parallel (cfg.workers) with sequential internals.
inline std::map<double, EvalResult> lambda_sweep(const PipelineConfig& cfg, const std::vector<double>& lambdas,
                                                 const NamedTensors& source_params, const Dataset& train,
                                                 const Dataset& test) {
  if (lambdas.size() < 2) throw ConfigError("lambdas", "a sweep needs at least two lambda values");
  for (double l : lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("lambdas", "lambda values must lie in [0, 1]");
  std::vector<EvalResult> results(lambdas.size());
  parallel_for(lambdas.size(), cfg.workers, [&](std::size_t i) {
    PipelineConfig c = cfg;
    c.lambda = lambdas[i];
    c.use_cga = true;
    c.workers = 1;
    results[i] = adapt_and_evaluate(c, source_params, train, test).eval;
  });
  std::map<double, EvalResult> out;
  for (std::size_t i = 0; i < lambdas.size(); ++i) out[lambdas[i]] = results[i];
  return out;
}

inline constexpr const char* kMethodDirect = "direct";
inline constexpr const char* kMethodSelfTrain = "self_train";
inline constexpr const char* kMethodCga = "cga";

inline std::vector<std::string> parse_methods(const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("methods", "no methods given");
  for (const auto& m : names)
    if (m != kMethodDirect && m != kMethodSelfTrain && m != kMethodCga)
      throw ConfigError("methods", "unknown method '" + m + "' (expected direct, self_train or cga)");
  return names;
}

struct MatrixResult {
  std::vector<std::string> methods;
  std::map<std::string, std::map<CorruptionKind, EvalResult>> results;
  std::map<std::string, std::map<CorruptionKind, RunReport>> reports;  // adaptation methods only
  std::optional<EvalResult> clean;  // source model on the clean target test split

  CorruptionTable table() const { return corruption_table(results, methods); }

  /// Mean over kinds of the method's mAP (undefined kinds skipped).
  std::optional<double> mean_map(const std::string& method) const {
    const auto row = corruption_row(method, results.at(method));
    return row.values.back();
  }
};

/// Per (method, kind): adapt on the corrupted train split (no-op for
/// direct), evaluate on the corrupted test split. Jobs run in parallel.
inline MatrixResult run_experiment_matrix(const PipelineConfig& cfg, const std::vector<std::string>& methods,
                                          const std::vector<CorruptionKind>& kinds, const ExperimentData& data,
                                          const NamedTensors& source_params) {
  parse_methods(methods);
  if (kinds.empty()) throw ConfigError("kinds", "no corruption kinds given");
  for (auto k : kinds)
    if (!data.target_train.contains(k) || !data.target_test.contains(k))
      throw DataError("missing corrupted split for kind " + std::string(to_string(k)));
  struct Job {
    std::string method;
    CorruptionKind kind;
  };
  std::vector<Job> jobs;
  for (const auto& m : methods)
    for (auto k : kinds) jobs.push_back({m, k});
  std::vector<EvalResult> evals(jobs.size());
  std::vector<RunReport> reports(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
    PipelineConfig c = cfg;
    c.workers = 1;
    const auto& train = data.target_train.at(jobs[i].kind);
    const auto& test = data.target_test.at(jobs[i].kind);
    if (jobs[i].method == kMethodDirect) {
      ToyDetector det = make_detector(c);
      det.set_parameters(source_params);
      evals[i] = direct_test(det, test, c);
      return;
    }
    c.use_cga = jobs[i].method == kMethodCga;
    auto out = adapt_and_evaluate(c, source_params, train, test);
    evals[i] = out.eval;
    reports[i] = std::move(out.report);
  });
  MatrixResult r;
  r.methods = methods;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    r.results[jobs[i].method][jobs[i].kind] = evals[i];
    if (jobs[i].method != kMethodDirect) r.reports[jobs[i].method][jobs[i].kind] = std::move(reports[i]);
  }
  if (!data.target_test_clean.empty()) {
    ToyDetector det = make_detector(cfg);
    det.set_parameters(source_params);
    r.clean = direct_test(det, data.target_test_clean, cfg);
  }
  return r;
}

}  // namespace sfod
