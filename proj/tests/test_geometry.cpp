#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sfod/geometry.hpp"

using namespace sfod;
constexpr double kPi = std::numbers::pi;

namespace {

OrientedBox random_box(CounterRng& rng, double span = 100.0) {
  return {rng.uniform(-span, span), rng.uniform(-span, span), rng.uniform(1.0, 40.0), rng.uniform(1.0, 40.0),
          rng.uniform(-kPi / 2, kPi / 2)};
}

void expect_point(Point2 p, double x, double y) {
  EXPECT_NEAR(p.x, x, 1e-12);
  EXPECT_NEAR(p.y, y, 1e-12);
}

}  // namespace

TEST(ToHorizontal, IdentityAtZeroAngle) {
  EXPECT_EQ(to_horizontal({0, 0, 4, 2, 0}), (HorizontalBox{0, 0, 4, 2}));
}

TEST(ToHorizontal, QuarterTurnSwapsSides) {
  const auto h = to_horizontal({0, 0, 4, 2, -kPi / 2});
  EXPECT_NEAR(h.w, 2.0, 1e-12);
  EXPECT_NEAR(h.h, 4.0, 1e-12);
}

TEST(ToHorizontal, DiagonalSquare) {
  const auto h = to_horizontal({0, 0, 2, 2, kPi / 4});
  const auto o = oracle::hull_by_extrema({0, 0, 2, 2, kPi / 4});
  EXPECT_NEAR(h.w, 2 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(h.h, 2 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(h.w, o.w, 1e-12);
  EXPECT_NEAR(h.h, o.h, 1e-12);
}

TEST(ToHorizontal, MatchesCornerExtrema) {
  CounterRng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto b = random_box(rng);
    const auto h = to_horizontal(b), o = oracle::hull_by_extrema(b);
    EXPECT_NEAR(h.w, o.w, 1e-9);
    EXPECT_NEAR(h.h, o.h, 1e-9);
    EXPECT_NEAR(h.cx, o.cx, 1e-9);
    EXPECT_NEAR(h.cy, o.cy, 1e-9);
  }
}

TEST(ToHorizontal, HalfTurnInvarianceAndQuarterTurnSwap) {
  CounterRng rng(12);
  for (int i = 0; i < 500; ++i) {
    const auto b = random_box(rng);
    const auto h = to_horizontal(b);
    const auto h_pi = to_horizontal({b.cx, b.cy, b.w, b.h, b.theta + kPi});
    EXPECT_NEAR(h.w, h_pi.w, 1e-9);
    EXPECT_NEAR(h.h, h_pi.h, 1e-9);
    const auto q = to_horizontal({b.cx, b.cy, b.w, b.h, b.theta + kPi / 2});
    EXPECT_NEAR(h.w, q.h, 1e-9);
    EXPECT_NEAR(h.h, q.w, 1e-9);
    const auto same = to_horizontal({b.cx, b.cy, b.h, b.w, b.theta + kPi / 2});
    EXPECT_NEAR(h.w, same.w, 1e-9);
    EXPECT_NEAR(h.h, same.h, 1e-9);
  }
}

TEST(ToHorizontal, ContainsAllCorners) {
  CounterRng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const auto b = random_box(rng);
    const auto h = to_horizontal(b);
    for (auto p : corners(b)) {
      EXPECT_GE(p.x, h.x0() - 1e-9);
      EXPECT_LE(p.x, h.x1() + 1e-9);
      EXPECT_GE(p.y, h.y0() - 1e-9);
      EXPECT_LE(p.y, h.y1() + 1e-9);
    }
  }
}

TEST(Corners, AxisAlignedUnitSquare) {
  const auto q = corners({0, 0, 2, 2, 0});
  expect_point(q[0], -1, -1);
  expect_point(q[1], 1, -1);
  expect_point(q[2], 1, 1);
  expect_point(q[3], -1, 1);
}

TEST(Corners, TranslationEquivariance) {
  const auto a = corners({0, 0, 2, 2, 0}), b = corners({5, 5, 2, 2, 0});
  for (int i = 0; i < 4; ++i) expect_point(b[i], a[i].x + 5, a[i].y + 5);
}

TEST(Corners, RotatedSquare) {
  const double r = std::sqrt(2.0);
  const auto q = corners({0, 0, 2, 2, kPi / 4});
  expect_point(q[0], 0, -r);
  expect_point(q[1], r, 0);
  expect_point(q[2], 0, r);
  expect_point(q[3], -r, 0);
}

TEST(Corners, AreaAndCentroid) {
  CounterRng rng(14);
  for (int i = 0; i < 1000; ++i) {
    const auto b = random_box(rng);
    const auto q = corners(b);
    const double area = polygon_area({q.begin(), q.end()});
    EXPECT_NEAR(area, b.w * b.h, 1e-6 * b.w * b.h);  // positive: counterclockwise
    EXPECT_NEAR((q[0].x + q[1].x + q[2].x + q[3].x) / 4, b.cx, 1e-9);
    EXPECT_NEAR((q[0].y + q[1].y + q[2].y + q[3].y) / 4, b.cy, 1e-9);
  }
}

TEST(NormalizeAngle, Range) {
  CounterRng rng(15);
  for (int i = 0; i < 1000; ++i) {
    const double t = rng.uniform(-20, 20), n = normalize_angle(t);
    EXPECT_GE(n, -kPi / 2);
    EXPECT_LT(n, kPi / 2);
    const double k = (t - n) / kPi;
    EXPECT_NEAR(k, std::round(k), 1e-9);
  }
  EXPECT_DOUBLE_EQ(normalize_angle(kPi / 2), -kPi / 2);
}

TEST(RotatedIou, IdenticalAndDisjoint) {
  const OrientedBox a{3, 4, 5, 2, 0.3};
  EXPECT_NEAR(rotated_iou(a, a), 1.0, 1e-12);
  EXPECT_EQ(rotated_iou({0, 0, 2, 2, 0}, {100, 0, 2, 2, 0}), 0.0);
}

TEST(RotatedIou, SquareVersusRotatedSquare) {
  const OrientedBox a{0, 0, 1, 1, 0}, b{0, 0, 1, 1, kPi / 4};
  const double expected = oracle::raster_iou(a, b);
  EXPECT_NEAR(rotated_iou(a, b), expected, 1e-3);
  // Closed form: the overlap is a regular octagon of area 2(sqrt2 - 1).
  const double inter = 2 * (std::sqrt(2.0) - 1);
  EXPECT_NEAR(rotated_iou(a, b), inter / (2 - inter), 1e-12);
}

TEST(RotatedIou, SymmetricBoundedAndMatchesRaster) {
  CounterRng rng(16);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_box(rng, 10);
    auto b = random_box(rng, 10);
    const double ab = rotated_iou(a, b), ba = rotated_iou(b, a);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(ab, oracle::raster_iou(a, b), 1e-3) << i;
  }
}

namespace {
Detection det(OrientedBox b, std::vector<double> s) { return {b, std::move(s)}; }
}  // namespace

TEST(Nms, EmptyAndSingle) {
  EXPECT_TRUE(nms_rotated({}, 0.5).empty());
  const auto out = nms_rotated({det({0, 0, 2, 2, 0}, {0.7, 0.3})}, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].scores, (std::vector<double>{0.7, 0.3}));
}

TEST(Nms, IdenticalBoxesKeepHigher) {
  const auto out = nms_rotated({det({0, 0, 2, 2, 0}, {0.8, 0.2}), det({0, 0, 2, 2, 0}, {0.9, 0.1})}, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].scores[0], 0.9);
}

TEST(Nms, ThreeBoxGreedyExample) {
  // A-B overlap with IoU 0.6: widths 10 and 6 sharing a left edge give 6/10.
  const OrientedBox a{5, 0, 10, 2, 0}, b{3, 0, 6, 2, 0}, c{50, 0, 4, 4, 0};
  ASSERT_NEAR(rotated_iou(a, b), 0.6, 1e-12);
  const auto kept = nms_rotated_indices({det(a, {0.9}), det(b, {0.8}), det(c, {0.7})}, 0.5);
  EXPECT_EQ(kept, (std::vector<std::size_t>{0, 2}));
}

TEST(Nms, OtherClassesDoNotSuppress) {
  const OrientedBox a{0, 0, 4, 4, 0};
  const auto kept = nms_rotated_indices({det(a, {0.9, 0.1}), det(a, {0.2, 0.8})}, 0.1);
  EXPECT_EQ(kept, (std::vector<std::size_t>{0, 1}));
}

TEST(Nms, TiesPreferLowerIndex) {
  const OrientedBox a{0, 0, 4, 4, 0};
  const auto kept = nms_rotated_indices({det(a, {0.5, 0.5}), det(a, {0.5, 0.5})}, 0.1);
  EXPECT_EQ(kept, (std::vector<std::size_t>{0}));
}

TEST(Nms, SubsetAndNoSurvivingOverlap) {
  CounterRng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Detection> dets;
    for (int i = 0; i < 30; ++i) {
      const double p = rng.uniform();
      dets.push_back(det(random_box(rng, 30), {p, 1 - p}));
    }
    const double thr = rng.uniform(0.05, 0.9);
    const auto kept = nms_rotated_indices(dets, thr);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      ASSERT_LT(kept[i], dets.size());
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        EXPECT_NE(kept[i], kept[j]);
        const auto &di = dets[kept[i]], &dj = dets[kept[j]];
        if (argmax(di.scores) == argmax(dj.scores)) {
          EXPECT_LE(rotated_iou(di.box, dj.box), thr);
        }
      }
      if (i > 0) {
        const auto &prev = dets[kept[i - 1]].scores, &cur = dets[kept[i]].scores;
        EXPECT_GE(prev[argmax(prev)], cur[argmax(cur)]);
      }
    }
  }
}

TEST(ClipToImage, InsideOutsideAndPartial) {
  EXPECT_EQ(clip_to_image({50, 50, 10, 10}, 100, 100), (HorizontalBox{50, 50, 10, 10}));
  EXPECT_FALSE(clip_to_image({-50, -50, 10, 10}, 100, 100).has_value());
  const auto c = clip_to_image({0, 0, 4, 4}, 100, 100);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(*c, (HorizontalBox{1, 1, 2, 2}));
}

TEST(ClipToImage, TouchingEdgeIsEmpty) {
  EXPECT_FALSE(clip_to_image({-5, 50, 10, 10}, 100, 100).has_value());
}
