// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

namespace sfod {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(Point2 a, double s) noexcept { return {a.x * s, a.y * s}; }
  friend bool operator==(Point2, Point2) = default;
};

inline double cross(Point2 a, Point2 b) noexcept { return a.x * b.y - a.y * b.x; }

/// Maps any angle to [-pi/2, pi/2). A rectangle rotated by pi is the same set,
/// so this loses nothing.
inline double normalize_angle(double theta) noexcept {
  constexpr double pi = std::numbers::pi;
  double t = theta - pi * std::floor((theta + pi / 2) / pi);
  if (t >= pi / 2) t -= pi;
  if (t < -pi / 2) t += pi;
  return t;
}

/// Rotated rectangle. theta rotates the box's local x-axis (the `w` edge)
/// away from the image x-axis. Angles are kept in [-pi/2, pi/2); `w` is
/// whichever edge the source lists first (no long-edge convention).
struct OrientedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  double theta = 0.0;

  double area() const noexcept { return w * h; }
  OrientedBox normalized() const noexcept { return {cx, cy, w, h, normalize_angle(theta)}; }
  friend bool operator==(const OrientedBox&, const OrientedBox&) = default;
};

inline bool is_valid(const OrientedBox& b) noexcept {
  constexpr double half = std::numbers::pi / 2;
  return std::isfinite(b.cx) && std::isfinite(b.cy) && b.w > 0 && b.h > 0 &&
         b.theta >= -half && b.theta < half;
}

/// Axis-aligned box stored by center and size.
struct HorizontalBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x0() const noexcept { return cx - w / 2; }
  double y0() const noexcept { return cy - h / 2; }
  double x1() const noexcept { return cx + w / 2; }
  double y1() const noexcept { return cy + h / 2; }
  double area() const noexcept { return w * h; }

  static HorizontalBox from_corners(double x0, double y0, double x1, double y1) noexcept {
    return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
  }
  friend bool operator==(const HorizontalBox&, const HorizontalBox&) = default;
};

/// A box plus one score per class. Which model produced it decides whether
/// the scores are teacher, student or refined values.
struct Detection {
  OrientedBox box;
  std::vector<double> scores;
};

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(const double* first, std::size_t n) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (first[i] > first[best]) best = i;
  return best;
}

inline std::size_t argmax(const std::vector<double>& v) noexcept { return argmax(v.data(), v.size()); }

using Quad = std::array<Point2, 4>;

/// Corners counterclockwise (in a y-up frame), starting at local (-w/2, -h/2).
inline Quad corners(const OrientedBox& b) noexcept {
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double hw = b.w / 2, hh = b.h / 2;
  const std::array<Point2, 4> local{{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}};
  Quad out;
  for (std::size_t i = 0; i < 4; ++i)
    out[i] = {b.cx + c * local[i].x - s * local[i].y, b.cy + s * local[i].x + c * local[i].y};
  return out;
}

/// Tight axis-aligned hull of the rotated rectangle, same center.
inline HorizontalBox to_horizontal(const OrientedBox& b) noexcept {
  const double ac = std::abs(std::cos(b.theta)), as = std::abs(std::sin(b.theta));
  return {b.cx, b.cy, b.w * ac + b.h * as, b.w * as + b.h * ac};
}

/// Signed shoelace area; positive for counterclockwise input.
inline double polygon_area(const std::vector<Point2>& poly) noexcept {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < n; ++i) a += cross(poly[i], poly[(i + 1) % n]);
  return a / 2;
}

/// Sutherland-Hodgman: clips `subject` against the convex counterclockwise
/// polygon `clip`. Output is counterclockwise, possibly empty.
inline std::vector<Point2> clip_convex(std::vector<Point2> subject, const std::vector<Point2>& clip) {
  const std::size_t m = clip.size();
  std::vector<Point2> input;
  for (std::size_t e = 0; e < m && !subject.empty(); ++e) {
    const Point2 a = clip[e], b = clip[(e + 1) % m];
    const Point2 edge = b - a;
    input.swap(subject);
    subject.clear();
    const std::size_t n = input.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 p = input[i], q = input[(i + 1) % n];
      const double dp = cross(edge, p - a), dq = cross(edge, q - a);
      const bool p_in = dp >= 0.0, q_in = dq >= 0.0;
      if (p_in) subject.push_back(p);
      if (p_in != q_in) {
        const double t = dp / (dp - dq);
        subject.push_back(p + (q - p) * t);
      }
    }
  }
  return subject;
}

/// Intersection-over-union of two rotated rectangles by exact polygon clipping.
inline double rotated_iou(const OrientedBox& a, const OrientedBox& b) {
  const double area_a = a.area(), area_b = b.area();
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  // Cheap reject on circumscribed circles.
  const double ra = std::hypot(a.w, a.h) / 2, rb = std::hypot(b.w, b.h) / 2;
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) > ra + rb) return 0.0;
  const Quad qa = corners(a), qb = corners(b);
  std::vector<Point2> pa(qa.begin(), qa.end()), pb(qb.begin(), qb.end());
  const double inter = std::abs(polygon_area(clip_convex(pa, pb)));
  if (inter <= 1e-12 * std::min(area_a, area_b)) return 0.0;
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline constexpr double kDefaultNmsIou = 0.1;

/// Class-wise greedy NMS. Each detection competes in the class of its
/// argmax score; within a class, higher score wins and later boxes with
/// IoU > iou_thr against a kept box are dropped. Output is ordered by
/// descending max score, ties by input position. Returns kept input indices.
inline std::vector<std::size_t> nms_rotated_indices(const std::vector<Detection>& dets,
                                                    double iou_thr = kDefaultNmsIou) {
  const std::size_t n = dets.size();
  std::vector<std::size_t> cls(n);
  std::vector<double> top(n);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = argmax(dets[i].scores);
    top[i] = dets[i].scores.empty() ? 0.0 : dets[i].scores[cls[i]];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return top[a] > top[b]; });

  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (cls[k] == cls[i] && rotated_iou(dets[k].box, dets[i].box) > iou_thr) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

inline std::vector<Detection> nms_rotated(const std::vector<Detection>& dets,
                                          double iou_thr = kDefaultNmsIou) {
  const auto kept = nms_rotated_indices(dets, iou_thr);
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(dets[k]);
  return out;
}

/// Intersection with [0, width] x [0, height]; nullopt when nothing is left.
inline std::optional<HorizontalBox> clip_to_image(const HorizontalBox& b, double width,
                                                  double height) noexcept {
  if (b.x0() >= 0.0 && b.y0() >= 0.0 && b.x1() <= width && b.y1() <= height && b.w > 0 && b.h > 0)
    return b;
  const double x0 = std::max(b.x0(), 0.0), y0 = std::max(b.y0(), 0.0);
  const double x1 = std::min(b.x1(), width), y1 = std::min(b.y1(), height);
  if (!(x1 > x0) || !(y1 > y0)) return std::nullopt;
  return HorizontalBox::from_corners(x0, y0, x1, y1);
}

}  // namespace sfod
