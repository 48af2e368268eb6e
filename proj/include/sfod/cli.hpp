// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Needs CLI11 on the include path.
//
// Exit codes:
//   0  success (including --help)
//   1  data error (inconsistent inputs, failed corruption jobs)
//   2  configuration error (bad flag, key or value)
//   3  I/O error (missing or unreadable files)
//
// Failures print one JSON line to stderr:
//   {"error":"config","key":"tau","message":"tau must lie in [0, 1]"}

#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sfod/core/error.hpp"
#include "sfod/corrupt.hpp"
#include "sfod/eval.hpp"
#include "sfod/pipeline.hpp"
#include "sfod/tensor_io.hpp"

namespace sfod::cli {

enum ExitCode : int { kOk = 0, kDataError = 1, kConfigError = 2, kIoError = 3 };

namespace fs = std::filesystem;

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

inline std::vector<CorruptionKind> parse_kinds(const std::string& list) {
  if (list.empty() || list == "all") return all_corruptions();
  std::vector<CorruptionKind> out;
  for (const auto& name : split_list(list)) {
    auto k = parse_corruption(name);
    if (!k) throw ConfigError("kinds", "unknown corruption kind '" + name + "'");
    out.push_back(*k);
  }
  return out;
}

inline void write_resolved(const fs::path& dir, const nlohmann::json& j) {
  fs::create_directories(dir);
  write_text_file(dir / "resolved_config.json", j.dump(2) + "\n");
}

/// Shared --seed / --config / --set / --workers handling.
struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<unsigned> workers;

  void attach(CLI::App* app) {
    app->add_option("--seed", seed, "master seed");
    app->add_option("--config", config_path, "JSON config file (flat keys)");
    app->add_option("--set", overrides, "config override key=value (repeatable)");
    app->add_option("--workers", workers, "worker threads for parallel stages");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& o : overrides) cfg.set_override(o);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    return cfg;
  }
};

// ---- subcommand bodies ---------------------------------------------------------

inline int cmd_corrupt(const fs::path& src, const fs::path& out, const std::string& kinds, int severity,
                       std::uint64_t seed, unsigned workers, const std::string& table_path, std::ostream& os) {
  const SeverityTable table = table_path.empty() ? default_severity_table() : load_severity_table(table_path);
  const auto ks = parse_kinds(kinds);
  const Manifest m = generate_dataset(src, out, ks, severity, seed, workers, table);
  nlohmann::json r{{"command", "corrupt"},
                   {"src", src.string()},
                   {"kinds", nlohmann::json::array()},
                   {"severity", severity},
                   {"seed", seed},
                   {"severity_table", table.to_json()}};
  for (auto k : ks) r["kinds"].push_back(std::string(to_string(k)));
  write_resolved(out, r);
  os << m.entries.size() << " images written, " << m.failed_count() << " failed\n";
  return m.failed_count() ? kDataError : kOk;
}

inline int cmd_scenes(const PipelineConfig& cfg, const fs::path& out, const std::string& layout, std::size_t n,
                      const std::string& prefix, std::ostream& os) {
  if (layout == "experiment") {
    PipelineConfig c = cfg;
    c.kinds.clear();
    save_experiment(out, synthesize_experiment(c), cfg.workers);
    os << "experiment written: " << cfg.source_scenes << " source, " << cfg.target_train_scenes << " train, "
       << cfg.target_test_scenes << " test scenes\n";
  } else if (layout == "dataset") {
    CounterRng rng(derive_key(cfg.seed, 0x5C00));
    save_dataset(out, generate_scenes(n, cfg.num_classes, rng, cfg.image_size, prefix, cfg.workers), cfg.workers);
    os << n << " scenes written\n";
  } else {
    throw ConfigError("layout", "layout must be 'dataset' or 'experiment'");
  }
  write_resolved(out, {{"command", "scenes"}, {"layout", layout}, {"n", n}, {"prefix", prefix}, {"config", cfg.to_json()}});
  return kOk;
}

/// Source model, target train split and target test split for one kind,
/// from disk (--data) or synthesized in memory.
struct AdaptInputs {
  NamedTensors source;
  Dataset train;
  Dataset test;
};

inline AdaptInputs adapt_inputs(const PipelineConfig& cfg, const std::string& data_root, const std::string& kind,
                                const std::string& source_params) {
  const auto k = parse_corruption(kind);
  if (!k) throw ConfigError("kind", "unknown corruption kind '" + kind + "'");
  AdaptInputs in;
  ExperimentData d;
  if (!data_root.empty()) {
    d = load_experiment(data_root, {*k}, cfg.workers);
  } else {
    PipelineConfig c = cfg;
    c.kinds = {kind};
    d = synthesize_experiment(c);
  }
  in.source = source_params.empty() ? train_source(cfg, d.source) : load_tensors(source_params);
  in.train = std::move(d.target_train[*k]);
  in.test = std::move(d.target_test[*k]);
  return in;
}

inline int cmd_adapt(const PipelineConfig& cfg, const fs::path& out, const std::string& data_root,
                     const std::string& kind, const std::string& source_params, std::ostream& os) {
  cfg.validate();
  const AdaptInputs in = adapt_inputs(cfg, data_root, kind, source_params);
  const AdaptOutcome r = adapt_and_evaluate(cfg, in.source, in.train, in.test);
  fs::create_directories(out);
  write_text_file(out / "report.jsonl", format_report(r.report));
  save_tensors(out / "source.sfodt", in.source);
  save_tensors(out / "teacher.sfodt", r.teacher);
  write_resolved(out, {{"command", "adapt"},
                       {"data", data_root},
                       {"kind", kind},
                       {"source_params", source_params},
                       {"config", cfg.to_json()}});
  os << r.report.method << " " << kind << " mAP " << (r.eval.map ? format_number(*r.eval.map) : "undefined") << "\n";
  return kOk;
}

inline int cmd_eval(const fs::path& det_dir, const fs::path& gt_dir, std::size_t classes, double iou, bool use07,
                    const std::string& out, std::ostream& os) {
  if (classes < 1) throw ConfigError("classes", "classes must be >= 1");
  const EvalResult r = evaluate_dirs(det_dir, gt_dir, classes, iou, use07 ? ApMethod::eleven_point : ApMethod::all_points);
  os << "class\tap\tgt\tdet\ttp\tfp\n";
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& n = r.counts[c];
    os << c << '\t' << (r.ap[c] ? format_number(*r.ap[c]) : "nan") << '\t' << n.gt << '\t' << n.det << '\t' << n.tp
       << '\t' << n.fp << '\n';
  }
  os << "mAP\t" << (r.map ? format_number(*r.map) : "nan") << '\n';
  if (!out.empty()) {
    write_resolved(out, {{"command", "eval"},
                         {"det", det_dir.string()},
                         {"gt", gt_dir.string()},
                         {"classes", classes},
                         {"iou", iou},
                         {"use07", use07}});
    write_text_file(fs::path(out) / "eval.json", eval_to_json(r).dump(2) + "\n");
  }
  return kOk;
}

inline int cmd_sweep(const PipelineConfig& cfg, const fs::path& out, const std::string& data_root,
                     const std::string& kind, const std::string& lambdas_text, std::ostream& os) {
  cfg.validate();
  std::vector<double> lambdas;
  for (const auto& t : split_list(lambdas_text)) {
    try {
      lambdas.push_back(parse_number(t, "lambdas"));
    } catch (const IoError&) {
      throw ConfigError("lambdas", "bad lambda value '" + t + "'");
    }
  }
  const AdaptInputs in = adapt_inputs(cfg, data_root, kind, "");
  const auto res = lambda_sweep(cfg, lambdas, in.source, in.train, in.test);
  std::string table = "lambda\tmap\n";
  for (const auto& [l, e] : res) table += format_number(l) + "\t" + (e.map ? format_number(*e.map) : "nan") + "\n";
  fs::create_directories(out);
  write_text_file(out / "sweep.tsv", table);
  write_resolved(out, {{"command", "sweep"}, {"data", data_root}, {"kind", kind}, {"lambdas", lambdas}, {"config", cfg.to_json()}});
  os << table;
  return kOk;
}

inline int cmd_matrix(const PipelineConfig& cfg, const fs::path& out, const std::string& data_root,
                      const std::string& kinds_text, const std::string& methods_text, std::ostream& os) {
  PipelineConfig c = cfg;
  if (!kinds_text.empty()) {
    c.kinds.clear();
    for (auto k : parse_kinds(kinds_text)) c.kinds.emplace_back(to_string(k));
  }
  c.validate();
  const auto methods = parse_methods(split_list(methods_text));
  const auto kinds = c.corruption_kinds();
  const ExperimentData data = data_root.empty() ? synthesize_experiment(c) : load_experiment(data_root, kinds, c.workers);
  const NamedTensors source = train_source(c, data.source);
  const MatrixResult r = run_experiment_matrix(c, methods, kinds, data, source);
  const CorruptionTable t = r.table();
  fs::create_directories(out / "reports");
  write_text_file(out / "table.txt", t.to_text());
  write_text_file(out / "table.tsv", t.to_rows());
  for (const auto& [m, by_kind] : r.reports)
    for (const auto& [k, rep] : by_kind)
      write_text_file(out / "reports" / (m + "_" + std::string(to_string(k)) + ".jsonl"), format_report(rep));
  nlohmann::json extra = nlohmann::json::object();
  if (r.clean) extra["clean_direct"] = eval_to_json(*r.clean);
  write_text_file(out / "clean.json", extra.dump(2) + "\n");
  write_resolved(out, {{"command", "matrix"}, {"data", data_root}, {"methods", methods}, {"config", c.to_json()}});
  os << t.to_text();
  if (r.clean && r.clean->map) os << "clean direct mAP " << format_number(100.0 * *r.clean->map) << "\n";
  return kOk;
}

/// `validate FILE` prints a summary; `convert IN OUT` rewrites between the
/// binary format (.emb) and tab-separated text (.tsv: key, then values).
inline KeyedEmbeddings read_any_embeddings(const fs::path& p) {
  if (p.extension() != ".tsv") return load_embeddings(p);
  KeyedEmbeddings e;
  std::vector<std::vector<double>> rows;
  std::istringstream is(read_text_file(p));
  for (std::string line; std::getline(is, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    std::getline(ls, key, '\t');
    std::vector<double> row;
    for (std::string tok; ls >> tok;) row.push_back(parse_number(tok, p.string()));
    if (!rows.empty() && row.size() != rows[0].size()) throw IoError(p.string() + ": ragged embedding rows");
    e.keys.push_back(key);
    rows.push_back(std::move(row));
  }
  e.matrix.values = Matrix(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), e.matrix.values.row(i).begin());
  return e;
}

inline void write_any_embeddings(const fs::path& p, const KeyedEmbeddings& e) {
  if (p.extension() != ".tsv") return save_embeddings(p, e);
  std::string s;
  for (std::size_t i = 0; i < e.matrix.rows(); ++i) {
    s += i < e.keys.size() ? e.keys[i] : std::to_string(i);
    for (double v : e.matrix.values.row(i)) s += '\t' + format_number(static_cast<float>(v));
    s += '\n';
  }
  write_text_file(p, s);
}

inline int cmd_embed_io(const std::string& action, const fs::path& in, const std::string& out, bool normalize,
                        std::ostream& os) {
  KeyedEmbeddings e = read_any_embeddings(in);
  if (normalize) e.matrix = l2_normalized(e.matrix, in.string());
  if (action == "validate") {
    l2_normalized(e.matrix, in.string());  // rejects zero or non-finite rows
    bool unit = true;
    for (std::size_t i = 0; i < e.matrix.rows(); ++i) {
      double n2 = 0;
      for (double v : e.matrix.values.row(i)) n2 += v * v;
      unit = unit && std::abs(n2 - 1.0) < 1e-5;
    }
    os << "rows " << e.matrix.rows() << " dim " << e.matrix.dim() << " keys " << e.keys.size() << " flagged_normalized "
       << (e.matrix.normalized ? "yes" : "no") << " unit_rows " << (unit ? "yes" : "no") << "\n";
    if (e.matrix.normalized && !unit) throw DataError(in.string() + ": flagged normalized but rows are not unit length");
    return kOk;
  }
  if (action == "convert") {
    if (out.empty()) throw ConfigError("out", "convert needs an output path");
    write_any_embeddings(out, e);
    os << "wrote " << out << "\n";
    return kOk;
  }
  throw ConfigError("action", "embed-io action must be 'validate' or 'convert'");
}

// ---- entry point ----------------------------------------------------------------

inline int report_error(std::ostream& err, const char* kind, const std::string& key, const std::string& msg, int code) {
  nlohmann::json j{{"error", kind}, {"message", msg}};
  if (!key.empty()) j["key"] = key;
  err << j.dump() << "\n";
  return code;
}

inline int run(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"sfod: source-free oriented object detection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sfod 1.0.0");

  std::function<int()> action;
  CommonFlags common;
  std::string out, data_root, kind = "fog", kinds, methods = "direct,self_train,cga", source_params;

  auto* c = app.add_subcommand("corrupt", "generate corrupted copies of an image directory");
  std::string src, table_path;
  int severity = kDefaultSeverity;
  c->add_option("--src", src, "source directory (images/ and optional annotations/)")->required();
  c->add_option("--out", out, "destination root")->required();
  c->add_option("--kinds", kinds, "comma-separated kinds or 'all'")->default_str("all");
  c->add_option("--severity", severity, "severity 1-5")->default_val(kDefaultSeverity);
  c->add_option("--severity-table", table_path, "JSON severity table (default built in)");
  common.attach(c);
  c->callback([&] {
    action = [&] {
      const PipelineConfig cfg = common.resolve();
      return cmd_corrupt(src, out, kinds, severity, cfg.seed, cfg.workers, table_path, os);
    };
  });

  auto* s = app.add_subcommand("scenes", "render synthetic scenes to disk");
  std::string layout = "dataset", prefix = "scene";
  std::size_t n = 10;
  s->add_option("--out", out, "output directory")->required();
  s->add_option("--layout", layout, "'dataset' (one split) or 'experiment' (source + clean target splits)");
  s->add_option("--n", n, "scene count for --layout dataset");
  s->add_option("--prefix", prefix, "scene id prefix");
  common.attach(s);
  s->callback([&] { action = [&] { return cmd_scenes(common.resolve(), out, layout, n, prefix, os); }; });

  auto* a = app.add_subcommand("adapt", "self-train on a corrupted target split and evaluate");
  bool no_cga = false;
  std::optional<double> lambda, tau, alpha, lr;
  std::optional<std::size_t> epochs, steps;
  a->add_option("--out", out, "output directory")->required();
  a->add_option("--data", data_root, "experiment root on disk (default: synthesize in memory)");
  a->add_option("--kind", kind, "corruption kind of the target domain");
  a->add_option("--source-params", source_params, "source model tensor file (default: train on source split)");
  a->add_flag("--no-cga", no_cga, "plain self-training baseline");
  a->add_option("--lambda", lambda, "aggregation weight");
  a->add_option("--tau", tau, "confidence threshold");
  a->add_option("--alpha", alpha, "EMA rate");
  a->add_option("--lr", lr, "student learning rate");
  a->add_option("--epochs", epochs, "passes over the target split");
  a->add_option("--steps", steps, "explicit step count (overrides epochs)");
  common.attach(a);
  a->callback([&] {
    action = [&] {
      PipelineConfig cfg = common.resolve();
      if (no_cga) cfg.use_cga = false;
      if (lambda) cfg.lambda = *lambda;
      if (tau) cfg.tau = *tau;
      if (alpha) cfg.alpha = *alpha;
      if (lr) cfg.lr = *lr;
      if (epochs) cfg.epochs = *epochs;
      if (steps) cfg.steps = *steps;
      return cmd_adapt(cfg, out, data_root, kind, source_params, os);
    };
  });

  auto* e = app.add_subcommand("eval", "VOC evaluation of detection files against ground truth");
  std::string det_dir, gt_dir;
  std::size_t classes = 0;
  double iou = kVocIou;
  bool use07 = false;
  e->add_option("--det", det_dir, "directory of <id>.txt detection files")->required();
  e->add_option("--gt", gt_dir, "directory of <id>.txt ground-truth files")->required();
  e->add_option("--classes", classes, "number of classes")->required();
  e->add_option("--iou", iou, "matching threshold");
  e->add_flag("--use-07", use07, "11-point interpolated AP");
  e->add_option("--out", out, "write eval.json and resolved_config.json here");
  common.attach(e);
  e->callback([&] { action = [&] { return cmd_eval(det_dir, gt_dir, classes, iou, use07, out, os); }; });

  auto* w = app.add_subcommand("sweep", "lambda ablation");
  std::string lambdas = "0,0.2,0.5,0.8,1";
  w->add_option("--out", out, "output directory")->required();
  w->add_option("--data", data_root, "experiment root on disk (default: synthesize in memory)");
  w->add_option("--kind", kind, "corruption kind of the target domain");
  w->add_option("--lambdas", lambdas, "comma-separated lambda values");
  common.attach(w);
  w->callback([&] { action = [&] { return cmd_sweep(common.resolve(), out, data_root, kind, lambdas, os); }; });

  auto* m = app.add_subcommand("matrix", "methods x corruption kinds results table");
  m->add_option("--out", out, "output directory")->required();
  m->add_option("--data", data_root, "experiment root on disk (default: synthesize in memory)");
  m->add_option("--kinds", kinds, "comma-separated kinds (default: config kinds)");
  m->add_option("--methods", methods, "comma-separated subset of direct,self_train,cga");
  common.attach(m);
  m->callback([&] { action = [&] { return cmd_matrix(common.resolve(), out, data_root, kinds, methods, os); }; });

  auto* io = app.add_subcommand("embed-io", "validate or convert embedding files");
  std::string io_action, io_in;
  bool normalize = false;
  io->add_option("action", io_action, "validate | convert")->required();
  io->add_option("input", io_in, "embedding file (.emb binary or .tsv text)")->required();
  io->add_option("--out", out, "output path for convert");
  io->add_flag("--normalize", normalize, "L2-normalize rows before writing");
  common.attach(io);
  io->callback([&] { action = [&] { return cmd_embed_io(io_action, io_in, out, normalize, os); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    os << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    os << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    os << app.version() << "\n";
    return kOk;
  } catch (const CLI::ParseError& ex) {
    return report_error(err, "config", "", ex.what(), kConfigError);
  }

  try {
    return action ? action() : kOk;
  } catch (const ConfigError& ex) {
    return report_error(err, "config", ex.key(), ex.what(), kConfigError);
  } catch (const IoError& ex) {
    return report_error(err, "io", "", ex.what(), kIoError);
  } catch (const fs::filesystem_error& ex) {
    return report_error(err, "io", "", ex.what(), kIoError);
  } catch (const DataError& ex) {
    return report_error(err, "data", "", ex.what(), kDataError);
  } catch (const std::exception& ex) {
    return report_error(err, "data", "", ex.what(), kDataError);
  }
}

}  // namespace sfod::cli
