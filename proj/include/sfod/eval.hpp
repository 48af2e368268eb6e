// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// PASCAL VOC style evaluation for rotated boxes.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sfod/core/error.hpp"
#include "sfod/core/image_io.hpp"
#include "sfod/corrupt/severity.hpp"
#include "sfod/geometry.hpp"
#include "sfod/pseudo_label.hpp"

namespace sfod {

inline constexpr double kVocIou = 0.5;

struct GroundTruthBox {
  OrientedBox box;
  std::size_t class_id = 0;
  bool difficult = false;
  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

/// Single-class scored box (same shape as a pseudo-label).
using ScoredBox = PseudoLabel;

enum class MatchFlag { tp, fp, ignored };

/// Greedy one-to-one matching within one image. Detections are visited by
/// descending score (ties by input order); each takes the highest-IoU
/// not-yet-matched ground truth of its class with IoU >= iou_thr. Matching a
/// difficult ground truth yields `ignored`. Flags are returned in input order.
inline std::vector<MatchFlag> match_detections(const std::vector<ScoredBox>& dets,
                                               const std::vector<GroundTruthBox>& gts, double iou_thr = kVocIou) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> used(gts.size(), false);
  std::vector<MatchFlag> flags(dets.size(), MatchFlag::fp);
  for (std::size_t i : order) {
    double best = -1.0;
    std::size_t best_j = gts.size();
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (gts[j].class_id != dets[i].class_id || used[j]) continue;
      const double iou = rotated_iou(dets[i].box, gts[j].box);
      if (iou >= iou_thr && iou > best) {
        best = iou;
        best_j = j;
      }
    }
    if (best_j == gts.size()) continue;
    if (gts[best_j].difficult) {
      flags[i] = MatchFlag::ignored;
    } else {
      used[best_j] = true;
      flags[i] = MatchFlag::tp;
    }
  }
  return flags;
}

enum class ApMethod { all_points, eleven_point };

/// AP from TP/FP flags already sorted by descending score. Ignored entries
/// are skipped. Returns nullopt when num_gt == 0.
inline std::optional<double> average_precision(const std::vector<MatchFlag>& sorted_flags, std::size_t num_gt,
                                               ApMethod method = ApMethod::all_points) {
  if (num_gt == 0) return std::nullopt;
  std::vector<double> rec, prec;
  double tp = 0, fp = 0;
  for (auto f : sorted_flags) {
    if (f == MatchFlag::ignored) continue;
    (f == MatchFlag::tp ? tp : fp) += 1;
    rec.push_back(tp / static_cast<double>(num_gt));
    prec.push_back(tp / (tp + fp));
  }
  if (method == ApMethod::eleven_point) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double thr = t / 10.0;
      double p = 0.0;
      for (std::size_t i = 0; i < rec.size(); ++i)
        if (rec[i] >= thr) p = std::max(p, prec[i]);
      ap += p / 11.0;
    }
    return ap;
  }
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), rec.begin(), rec.end());
  mpre.insert(mpre.end(), prec.begin(), prec.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i)
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return ap;
}

struct ClassCounts {
  std::size_t gt = 0;   // non-difficult ground truths
  std::size_t det = 0;  // detections, including ignored ones
  std::size_t tp = 0;
  std::size_t fp = 0;
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct EvalResult {
  std::vector<std::optional<double>> ap;  // per class; nullopt without ground truth
  std::vector<ClassCounts> counts;
  std::optional<double> map;  // mean over classes with ground truth

  double map_or(double fallback) const noexcept { return map.value_or(fallback); }
  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

/// Per-image detections and ground truths must be index-aligned.
inline EvalResult evaluate(const std::vector<std::vector<ScoredBox>>& dets,
                           const std::vector<std::vector<GroundTruthBox>>& gts, std::size_t num_classes,
                           double iou_thr = kVocIou, ApMethod method = ApMethod::all_points) {
  if (dets.size() != gts.size())
    throw DataError("evaluate: " + std::to_string(dets.size()) + " detection lists for " +
                    std::to_string(gts.size()) + " images");
  EvalResult r;
  r.ap.assign(num_classes, std::nullopt);
  r.counts.assign(num_classes, {});
  struct Scored {
    double score;
    MatchFlag flag;
  };
  std::vector<std::vector<Scored>> per_class(num_classes);
  for (std::size_t img = 0; img < gts.size(); ++img) {
    for (const auto& g : gts[img]) {
      if (g.class_id >= num_classes) throw DataError("ground truth class id out of range");
      if (!g.difficult) ++r.counts[g.class_id].gt;
    }
    for (const auto& d : dets[img])
      if (d.class_id >= num_classes) throw DataError("detection class id out of range");
    const auto flags = match_detections(dets[img], gts[img], iou_thr);
    for (std::size_t i = 0; i < flags.size(); ++i) per_class[dets[img][i].class_id].push_back({dets[img][i].score, flags[i]});
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& v = per_class[c];
    std::stable_sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
    std::vector<MatchFlag> flags;
    for (const auto& s : v) {
      flags.push_back(s.flag);
      ++r.counts[c].det;
      if (s.flag == MatchFlag::tp) ++r.counts[c].tp;
      if (s.flag == MatchFlag::fp) ++r.counts[c].fp;
    }
    r.ap[c] = average_precision(flags, r.counts[c].gt, method);
    if (r.ap[c]) {
      sum += *r.ap[c];
      ++n;
    }
  }
  if (n > 0) r.map = sum / static_cast<double>(n);
  return r;
}

// ---- results table ----------------------------------------------------------

struct TableRow {
  std::string method;
  std::vector<std::optional<double>> values;  // per column, then the mean
};

struct CorruptionTable {
  std::vector<std::string> columns;  // kind names in table order
  std::vector<TableRow> rows;

  /// Aligned text, values in percent with one decimal.
  std::string to_text() const {
    std::ostringstream os;
    std::size_t w0 = 6;
    for (const auto& r : rows) w0 = std::max(w0, r.method.size());
    os << std::left << std::setw(static_cast<int>(w0)) << "Method";
    for (const auto& c : columns) {
      auto k = parse_corruption(c);
      os << ' ' << std::right << std::setw(7) << (k ? std::string(kCorruptionLabels[static_cast<std::size_t>(*k)]) : c);
    }
    os << ' ' << std::setw(7) << "mAP" << '\n';
    for (const auto& r : rows) {
      os << std::left << std::setw(static_cast<int>(w0)) << r.method;
      for (const auto& v : r.values) {
        os << ' ' << std::right << std::setw(7);
        if (v) {
          std::ostringstream cell;
          cell << std::fixed << std::setprecision(1) << 100.0 * *v;
          os << cell.str();
        } else {
          os << "-";
        }
      }
      os << '\n';
    }
    return os.str();
  }

  /// Tab-separated: header "method <kinds...> mean", one line per method,
  /// raw fractions with 17 significant digits ("nan" when undefined).
  std::string to_rows() const {
    std::ostringstream os;
    os << "method";
    for (const auto& c : columns) os << '\t' << c;
    os << "\tmean\n";
    for (const auto& r : rows) {
      os << r.method;
      for (const auto& v : r.values) {
        os << '\t';
        if (v) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.17g", *v);
          os << buf;
        } else {
          os << "nan";
        }
      }
      os << '\n';
    }
    return os.str();
  }
};

/// One row from per-kind results; columns follow the corruption order and
/// the last value is the mean mAP over kinds with a defined mAP.
inline TableRow corruption_row(const std::string& method, const std::map<CorruptionKind, EvalResult>& results) {
  if (results.empty()) throw DataError("corruption_table: no results");
  TableRow row{method, {}};
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [kind, res] : results) {  // std::map orders by enum = table order
    row.values.push_back(res.map);
    if (res.map) {
      sum += *res.map;
      ++n;
    }
  }
  row.values.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
  return row;
}

inline CorruptionTable corruption_table(const std::map<std::string, std::map<CorruptionKind, EvalResult>>& by_method,
                                        const std::vector<std::string>& method_order = {}) {
  if (by_method.empty()) throw DataError("corruption_table: no results");
  CorruptionTable t;
  const auto& first = by_method.begin()->second;
  for (const auto& [kind, res] : first) t.columns.emplace_back(to_string(kind));
  std::vector<std::string> order = method_order;
  if (order.empty())
    for (const auto& [m, r] : by_method) order.push_back(m);
  for (const auto& m : order) {
    auto it = by_method.find(m);
    if (it == by_method.end()) throw DataError("corruption_table: no results for method '" + m + "'");
    if (it->second.size() != first.size()) throw DataError("corruption_table: methods cover different kinds");
    t.rows.push_back(corruption_row(m, it->second));
  }
  return t;
}

inline CorruptionTable corruption_table(const std::map<CorruptionKind, EvalResult>& results,
                                        const std::string& method = "result") {
  return corruption_table(std::map<std::string, std::map<CorruptionKind, EvalResult>>{{method, results}});
}

// ---- per-image text files ------------------------------------------------------
//
// Detections: one line per box, "class_id score cx cy w h theta".
// Ground truth: "class_id cx cy w h theta" with an optional trailing
// "difficult" token. Fields are separated by single spaces, numbers use the
// shortest round-trip decimal form, lines end in '\n'. Blank lines and
// lines starting with '#' are ignored on read.

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_number(const std::string& tok, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw IoError(where + ": bad number '" + tok + "'");
  return v;
}

inline std::size_t parse_class_id(const std::string& tok, const std::string& where) {
  std::size_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw IoError(where + ": bad class id '" + tok + "'");
  return v;
}

inline std::string format_detections(const std::vector<ScoredBox>& dets) {
  std::string s;
  for (const auto& d : dets) {
    s += std::to_string(d.class_id) + ' ' + format_number(d.score) + ' ' + format_number(d.box.cx) + ' ' +
         format_number(d.box.cy) + ' ' + format_number(d.box.w) + ' ' + format_number(d.box.h) + ' ' +
         format_number(d.box.theta) + '\n';
  }
  return s;
}

inline std::string format_ground_truth(const std::vector<GroundTruthBox>& gts) {
  std::string s;
  for (const auto& g : gts) {
    s += std::to_string(g.class_id) + ' ' + format_number(g.box.cx) + ' ' + format_number(g.box.cy) + ' ' +
         format_number(g.box.w) + ' ' + format_number(g.box.h) + ' ' + format_number(g.box.theta);
    if (g.difficult) s += " difficult";
    s += '\n';
  }
  return s;
}

namespace detail {
inline std::vector<std::vector<std::string>> tokenize_lines(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}
}  // namespace detail

inline std::vector<ScoredBox> parse_detections(const std::string& text, const std::string& where = "detections") {
  std::vector<ScoredBox> out;
  for (const auto& t : detail::tokenize_lines(text)) {
    if (t.size() != 7) throw IoError(where + ": expected 7 fields per detection line");
    out.push_back({{parse_number(t[2], where), parse_number(t[3], where), parse_number(t[4], where),
                    parse_number(t[5], where), parse_number(t[6], where)},
                   parse_class_id(t[0], where),
                   parse_number(t[1], where)});
  }
  return out;
}

inline std::vector<GroundTruthBox> parse_ground_truth(const std::string& text, const std::string& where = "ground truth") {
  std::vector<GroundTruthBox> out;
  for (const auto& t : detail::tokenize_lines(text)) {
    if (t.size() != 6 && !(t.size() == 7 && t[6] == "difficult"))
      throw IoError(where + ": expected 'class_id cx cy w h theta [difficult]'");
    out.push_back({{parse_number(t[1], where), parse_number(t[2], where), parse_number(t[3], where),
                    parse_number(t[4], where), parse_number(t[5], where)},
                   parse_class_id(t[0], where),
                   t.size() == 7});
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& p) {
  auto bytes = read_file_bytes(p);
  return {bytes.begin(), bytes.end()};
}

inline void write_text_file(const std::filesystem::path& p, const std::string& s) { write_file_bytes(p, s.data(), s.size()); }

/// Loads `<dir>/<image_id>.txt` files, keyed by image id (the file stem).
template <typename Parse>
auto read_annotation_dir(const std::filesystem::path& dir, Parse parse) {
  using T = decltype(parse(std::string(), std::string()));
  std::map<std::string, T> out;
  if (!std::filesystem::is_directory(dir)) throw IoError("directory not found: " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt")
      out[e.path().stem().string()] = parse(read_text_file(e.path()), e.path().string());
  return out;
}

/// Evaluates detection files against ground-truth files. The image set is
/// the ground-truth set; an image without a detection file has no detections.
inline EvalResult evaluate_dirs(const std::filesystem::path& det_dir, const std::filesystem::path& gt_dir,
                                std::size_t num_classes, double iou_thr = kVocIou,
                                ApMethod method = ApMethod::all_points) {
  auto gts = read_annotation_dir(gt_dir, [](const std::string& s, const std::string& w) { return parse_ground_truth(s, w); });
  auto dets = read_annotation_dir(det_dir, [](const std::string& s, const std::string& w) { return parse_detections(s, w); });
  std::vector<std::vector<ScoredBox>> d;
  std::vector<std::vector<GroundTruthBox>> g;
  for (auto& [id, boxes] : gts) {
    g.push_back(std::move(boxes));
    auto it = dets.find(id);
    d.push_back(it == dets.end() ? std::vector<ScoredBox>{} : it->second);
  }
  return evaluate(d, g, num_classes, iou_thr, method);
}

}  // namespace sfod
