#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "sfod/eval.hpp"

using namespace sfod;
namespace fs = std::filesystem;

namespace {

using F = MatchFlag;

GroundTruthBox gt(OrientedBox b, std::size_t c = 0, bool difficult = false) { return {b, c, difficult}; }
ScoredBox det(OrientedBox b, double score, std::size_t c = 0) { return {b, c, score}; }

std::vector<F> to_flags(const std::vector<int>& v) {
  std::vector<F> out;
  for (int x : v) out.push_back(x ? F::tp : F::fp);
  return out;
}

EvalResult with_map(double m) {
  EvalResult r;
  r.map = m;
  return r;
}

}  // namespace

TEST(Match, ExactHitIsTp) {
  const OrientedBox b{10, 10, 4, 6, 0.3};
  EXPECT_EQ(match_detections({det(b, 0.9)}, {gt(b)}), (std::vector<F>{F::tp}));
}

TEST(Match, OneToOne) {
  const OrientedBox b{10, 10, 4, 6, 0.3};
  EXPECT_EQ(match_detections({det(b, 0.6), det(b, 0.9)}, {gt(b)}), (std::vector<F>{F::fp, F::tp}));
}

TEST(Match, BelowThresholdIsFp) {
  const OrientedBox g{5, 0.5, 10, 1, 0}, d{2.25, 0.5, 4.5, 1, 0};
  ASSERT_NEAR(oracle::aabb_iou(g, d), 0.45, 1e-12);
  EXPECT_EQ(match_detections({det(d, 0.9)}, {gt(g)}), (std::vector<F>{F::fp}));
}

TEST(Match, ClassMustAgree) {
  const OrientedBox b{10, 10, 4, 6, 0};
  EXPECT_EQ(match_detections({det(b, 0.9, 1)}, {gt(b, 0)}), (std::vector<F>{F::fp}));
}

TEST(Match, PrefersHighestIouUnmatched) {
  const OrientedBox g0{0, 0, 10, 10, 0}, g1{1, 0, 10, 10, 0}, d{1, 0, 10, 10, 0};
  // The detection sits on g1 exactly; a second weaker detection then takes g0.
  EXPECT_EQ(match_detections({det(d, 0.9), det(d, 0.8)}, {gt(g0), gt(g1)}), (std::vector<F>{F::tp, F::tp}));
}

TEST(Match, DifficultIsIgnored) {
  const OrientedBox b{10, 10, 4, 6, 0};
  EXPECT_EQ(match_detections({det(b, 0.9)}, {gt(b, 0, true)}), (std::vector<F>{F::ignored}));
  const auto r = evaluate({{det(b, 0.9)}}, {{gt(b, 0, true)}}, 1);
  EXPECT_FALSE(r.ap[0].has_value());  // difficult GTs do not count
  EXPECT_EQ(r.counts[0].fp, 0u);
}

TEST(AveragePrecision, PerfectRanking) {
  EXPECT_DOUBLE_EQ(*average_precision(to_flags({1, 1, 1}), 3), 1.0);
}

TEST(AveragePrecision, NoDetections) { EXPECT_DOUBLE_EQ(*average_precision({}, 4), 0.0); }

TEST(AveragePrecision, FiveSixths) {
  EXPECT_NEAR(*average_precision(to_flags({1, 0, 1}), 2), 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(oracle::exact_ap({1, 0, 1}, 2), 5.0 / 6.0, 1e-15);
}

TEST(AveragePrecision, ElevenPoint) {
  EXPECT_NEAR(*average_precision(to_flags({1, 0, 1}), 2, ApMethod::eleven_point), 28.0 / 33.0, 1e-15);
  EXPECT_NEAR(*average_precision(to_flags({1}), 1, ApMethod::eleven_point), 1.0, 1e-15);
}

TEST(AveragePrecision, UndefinedWithoutGroundTruth) {
  EXPECT_FALSE(average_precision(to_flags({0, 0}), 0).has_value());
}

TEST(AveragePrecision, IgnoredEntriesAreSkipped) {
  EXPECT_EQ(*average_precision({F::tp, F::ignored, F::fp, F::tp}, 2), *average_precision(to_flags({1, 0, 1}), 2));
}

TEST(AveragePrecision, MatchesExactOracleOnRandomFlags) {
  CounterRng rng(1);
  for (int t = 0; t < 500; ++t) {
    std::vector<int> f(1 + rng.below(12));
    int tp = 0;
    for (auto& x : f) tp += x = rng.bernoulli(0.5);
    const std::size_t n_gt = tp + rng.below(3);
    if (n_gt == 0) continue;
    EXPECT_NEAR(*average_precision(to_flags(f), n_gt), oracle::exact_ap(f, n_gt), 1e-12);
  }
}

TEST(AveragePrecision, AddingFpOrTpMovesTheRightWay) {
  CounterRng rng(2);
  for (int t = 0; t < 500; ++t) {
    std::vector<int> f(rng.below(10));
    int tp = 0;
    for (auto& x : f) tp += x = rng.bernoulli(0.5);
    const std::size_t n_gt = tp + 1 + rng.below(3);
    const double base = *average_precision(to_flags(f), n_gt);
    auto fp = f;
    fp.push_back(0);
    EXPECT_LE(*average_precision(to_flags(fp), n_gt), base + 1e-15);
    auto more = f;
    more.insert(more.begin() + static_cast<std::ptrdiff_t>(rng.below(f.size() + 1)), 1);
    EXPECT_GE(*average_precision(to_flags(more), n_gt), base - 1e-15);
  }
}

TEST(Evaluate, PerfectAndEmpty) {
  const OrientedBox a{10, 10, 4, 6, 0.2}, b{30, 30, 5, 5, -0.4};
  const std::vector<std::vector<GroundTruthBox>> gts{{gt(a, 0), gt(b, 1)}, {gt(b, 0)}};
  const auto perfect = evaluate({{det(a, 0.9, 0), det(b, 0.8, 1)}, {det(b, 0.7, 0)}}, gts, 2);
  EXPECT_DOUBLE_EQ(*perfect.map, 1.0);
  const auto empty = evaluate({{}, {}}, gts, 2);
  EXPECT_DOUBLE_EQ(*empty.map, 0.0);
}

TEST(Evaluate, OnePerfectClassOneEmpty) {
  const OrientedBox a{10, 10, 4, 6, 0.2}, b{30, 30, 5, 5, -0.4};
  const auto r = evaluate({{det(a, 0.9, 0)}}, {{gt(a, 0), gt(b, 1)}}, 2);
  EXPECT_DOUBLE_EQ(*r.map, 0.5);
  EXPECT_DOUBLE_EQ(*r.ap[0], 1.0);
  EXPECT_DOUBLE_EQ(*r.ap[1], 0.0);
}

TEST(Evaluate, ClassesWithoutGroundTruthAreExcluded) {
  const OrientedBox a{10, 10, 4, 6, 0.2};
  const auto r = evaluate({{det(a, 0.9, 0), det(a, 0.8, 2)}}, {{gt(a, 0)}}, 3);
  EXPECT_DOUBLE_EQ(*r.map, 1.0);
  EXPECT_FALSE(r.ap[2].has_value());
  EXPECT_EQ(r.counts[2].fp, 1u);
  EXPECT_FALSE(evaluate({{}}, {{}}, 2).map.has_value());
}

TEST(Evaluate, RankingOnlyDependence) {
  CounterRng rng(3);
  std::vector<std::vector<ScoredBox>> dets(4);
  std::vector<std::vector<GroundTruthBox>> gts(4);
  for (int i = 0; i < 4; ++i) {
    for (int g = 0; g < 3; ++g) gts[i].push_back(gt({rng.uniform(0, 50), rng.uniform(0, 50), 8, 8, 0}, rng.below(2)));
    for (int d = 0; d < 6; ++d) {
      const auto& t = gts[i][rng.below(3)];
      dets[i].push_back(det({t.box.cx + rng.normal(), t.box.cy + rng.normal(), 8, 8, 0}, rng.uniform(), rng.below(2)));
    }
  }
  auto transformed = dets;
  for (auto& v : transformed)
    for (auto& d : v) d.score = 1 / (1 + std::exp(-5 * d.score)) * 0.3 + 0.1;  // strictly increasing map
  EXPECT_EQ(evaluate(dets, gts, 2), evaluate(transformed, gts, 2));
}

TEST(Evaluate, MatchesBruteForceOnMicroInstances) {
  CounterRng rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<OrientedBox> g;
    const std::size_t n_gt = 1 + rng.below(3), n_det = rng.below(6);
    for (std::size_t i = 0; i < n_gt; ++i) g.push_back({rng.uniform(0, 12), rng.uniform(0, 12), rng.uniform(3, 8), rng.uniform(3, 8), 0});
    std::vector<oracle::MicroDet> d;
    for (std::size_t i = 0; i < n_det; ++i) {
      const auto& base = g[rng.below(n_gt)];
      d.push_back({{base.cx + rng.uniform(-2, 2), base.cy + rng.uniform(-2, 2), base.w * rng.uniform(0.7, 1.3),
                    base.h * rng.uniform(0.7, 1.3), 0},
                   rng.uniform()});
    }
    std::vector<GroundTruthBox> gts;
    for (const auto& b : g) gts.push_back(gt(b));
    std::vector<ScoredBox> dets;
    for (const auto& m : d) dets.push_back(det(m.box, m.score));
    const double got = *evaluate({dets}, {gts}, 1).map;
    EXPECT_NEAR(got, oracle::exact_ap(oracle::greedy_flags(d, g), n_gt), 1e-12) << "trial " << t;
  }
}

TEST(Evaluate, ImageCountMismatch) { EXPECT_THROW(evaluate({{}, {}}, {{}}, 1), DataError); }

TEST(CorruptionTable, SingleKind) {
  const auto t = corruption_table({{CorruptionKind::fog, with_map(0.42)}});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"fog"}));
  EXPECT_DOUBLE_EQ(*t.rows[0].values.back(), 0.42);
}

TEST(CorruptionTable, MeanOfTwo) {
  const auto t = corruption_table({{CorruptionKind::fog, with_map(0.2)}, {CorruptionKind::snow, with_map(0.4)}});
  EXPECT_NEAR(*t.rows[0].values.back(), 0.3, 1e-15);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"snow", "fog"}));  // weather order: snow before fog
}

TEST(CorruptionTable, AllKindsStableOrder) {
  std::map<CorruptionKind, EvalResult> m;
  for (auto k : all_corruptions()) m[k] = with_map(0.01 * (static_cast<int>(k) + 1));
  const auto t = corruption_table(m), t2 = corruption_table(m);
  ASSERT_EQ(t.rows[0].values.size(), 21u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(t.columns[i], kCorruptionNames[i]);
  EXPECT_EQ(t.to_rows(), t2.to_rows());
  EXPECT_EQ(t.to_text(), t2.to_text());
  std::istringstream rows(t.to_rows());
  std::string header, line;
  std::getline(rows, header);
  std::getline(rows, line);
  EXPECT_EQ(std::count(header.begin(), header.end(), '\t'), 21);
  EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 21);
  EXPECT_EQ(header.substr(header.rfind('\t') + 1), "mean");
}

TEST(CorruptionTable, MultipleMethodsAndText) {
  std::map<std::string, std::map<CorruptionKind, EvalResult>> by;
  by["direct"] = {{CorruptionKind::gaussian_noise, with_map(0.1)}, {CorruptionKind::fog, with_map(0.3)}};
  by["cga"] = {{CorruptionKind::gaussian_noise, with_map(0.5)}, {CorruptionKind::fog, with_map(EvalResult{}.map.value_or(0.7))}};
  const auto t = corruption_table(by, {"direct", "cga"});
  EXPECT_EQ(t.rows[0].method, "direct");
  EXPECT_NEAR(*t.rows[1].values.back(), 0.6, 1e-15);
  const std::string text = t.to_text();
  EXPECT_NE(text.find("20.0"), std::string::npos);
  EXPECT_NE(text.find("Fog"), std::string::npos);
  EXPECT_THROW(corruption_table(by, {"direct", "missing"}), DataError);
  EXPECT_THROW(corruption_table(std::map<CorruptionKind, EvalResult>{}), DataError);
}

TEST(CorruptionTable, UndefinedValuesPrintAsNan) {
  const auto t = corruption_table({{CorruptionKind::fog, EvalResult{}}});
  EXPECT_NE(t.to_rows().find("nan"), std::string::npos);
  EXPECT_FALSE(t.rows[0].values.back().has_value());
}

TEST(TextFormat, RoundTrip) {
  const std::vector<ScoredBox> d{det({1.5, 2.25, 3, 4, -0.1}, 0.123456789, 3), det({0.1, 0.2, 0.3, 0.4, 1.5}, 1, 0)};
  EXPECT_EQ(parse_detections(format_detections(d)), d);
  const std::vector<GroundTruthBox> g{gt({1, 2, 3, 4, 0.5}, 2, true), gt({5, 6, 7, 8, -0.5}, 0)};
  EXPECT_EQ(parse_ground_truth(format_ground_truth(g)), g);
  EXPECT_EQ(format_ground_truth({g[0]}), "2 1 2 3 4 0.5 difficult\n");
  EXPECT_EQ(format_detections({d[1]}), "0 1 0.1 0.2 0.3 0.4 1.5\n");
}

TEST(TextFormat, CommentsBlankLinesAndErrors) {
  EXPECT_EQ(parse_ground_truth("# header\n\n1 2 3 4 5 0\r\n").size(), 1u);
  EXPECT_THROW(parse_detections("0 0.5 1 2 3\n"), IoError);
  EXPECT_THROW(parse_ground_truth("x 1 2 3 4 0\n"), IoError);
  EXPECT_THROW(parse_ground_truth("0 1 2 3 4 0 hard\n"), IoError);
}

TEST(TextFormat, EvaluateDirs) {
  const fs::path root = fs::temp_directory_path() / "sfod_eval_dirs";
  fs::remove_all(root);
  fs::create_directories(root / "det");
  fs::create_directories(root / "gt");
  const OrientedBox a{10, 10, 4, 6, 0.2}, b{30, 30, 5, 5, -0.4};
  write_text_file(root / "gt" / "img1.txt", format_ground_truth({gt(a, 0), gt(b, 1)}));
  write_text_file(root / "gt" / "img2.txt", format_ground_truth({gt(b, 1)}));
  write_text_file(root / "det" / "img1.txt", format_detections({det(a, 0.9, 0), det(b, 0.8, 1)}));
  // img2 has no detection file: its object is missed.
  const auto r = evaluate_dirs(root / "det", root / "gt", 2);
  EXPECT_DOUBLE_EQ(*r.ap[0], 1.0);
  EXPECT_DOUBLE_EQ(*r.ap[1], 0.5);
  EXPECT_THROW(evaluate_dirs(root / "nope", root / "gt", 2), IoError);
  fs::remove_all(root);
}
