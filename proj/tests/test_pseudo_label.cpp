#include <gtest/gtest.h>

#include <cmath>

#include "sfod/core/rng.hpp"
#include "sfod/pseudo_label.hpp"

using namespace sfod;

namespace {

std::vector<double> random_simplex(CounterRng& rng, std::size_t k) {
  std::vector<double> v(k);
  double s = 0;
  for (auto& x : v) s += x = -std::log(1.0 - rng.uniform());
  for (auto& x : v) x /= s;
  return v;
}

EmbeddingMatrix emb(const std::vector<std::vector<double>>& rows, bool normalized = false) {
  return {Matrix::from_rows(rows), normalized};
}

}  // namespace

TEST(BuildPrompts, DefaultTemplateLiteral) {
  const auto p = build_prompts({"airport"});
  ASSERT_EQ(p.prompts.size(), 1u);
  EXPECT_EQ(p.prompts[0], "An aerial image of a airport");
}

TEST(BuildPrompts, KeepsInputOrder) {
  const auto p = build_prompts({"ship", "harbor"});
  EXPECT_EQ(p.prompts, (std::vector<std::string>{"An aerial image of a ship", "An aerial image of a harbor"}));
  EXPECT_EQ(p.class_names, (std::vector<std::string>{"ship", "harbor"}));
}

TEST(BuildPrompts, CustomTemplate) {
  EXPECT_EQ(build_prompts({"car"}, "photo of [Class]").prompts[0], "photo of car");
}

TEST(BuildPrompts, PlaceholderErrors) {
  EXPECT_THROW(build_prompts({"car"}, "photo of a car"), ConfigError);
  EXPECT_THROW(build_prompts({"car"}, "[Class] and [Class]"), ConfigError);
  EXPECT_THROW(build_prompts({}, "[Class]"), ConfigError);
}

TEST(ExtractPatches, WholeImageIsIdentity) {
  CounterRng rng(1);
  Image sq(5, 5, 3);
  for (auto& v : sq.pixels) v = static_cast<float>(rng.uniform());
  const auto ps = extract_patches(sq, {{2.5, 2.5, 5, 5, 0}}, 5);
  ASSERT_EQ(ps.patches.size(), 1u);
  EXPECT_EQ(ps.patches[0].pixels, sq);
}

TEST(ExtractPatches, OutsideBoxDroppedAndReported) {
  Image img(10, 10, 3, 0.5f);
  const auto pb = extract_patches(img, {{5, 5, 4, 4, 0}, {-50, -50, 4, 4, 0}, {5, 5, 2, 2, 0.3}}, 8);
  ASSERT_EQ(pb.patches.size(), 2u);
  EXPECT_EQ(pb.dropped, (std::vector<std::size_t>{1}));
  EXPECT_EQ(pb.patches[0].box_index, 0u);
  EXPECT_EQ(pb.patches[1].box_index, 2u);
}

TEST(ExtractPatches, AllDroppedIsEmpty) {
  Image img(10, 10, 1);
  const auto pb = extract_patches(img, {{-50, -50, 4, 4, 0}}, 8);
  EXPECT_TRUE(pb.patches.empty());
  EXPECT_EQ(pb.dropped.size(), 1u);
}

TEST(ExtractPatches, CheckerboardCenterBlock) {
  Image img(4, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) img.at(x, y, 0) = static_cast<float>((x + y) % 2);
  const auto pb = extract_patches(img, {{2, 2, 2, 2, 0}}, 2);
  ASSERT_EQ(pb.patches.size(), 1u);
  const Image& p = pb.patches[0].pixels;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) EXPECT_EQ(p.at(x, y, 0), img.at(x + 1, y + 1, 0));
}

TEST(ExtractPatches, OrderMatchesInput) {
  Image img(20, 20, 3, 0.1f);
  std::vector<OrientedBox> boxes;
  for (int i = 0; i < 8; ++i) boxes.push_back({2.0 + 2 * i, 10, 3, 3, 0.1 * i});
  const auto pb = extract_patches(img, boxes, 4);
  ASSERT_EQ(pb.patches.size(), boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) EXPECT_EQ(pb.patches[i].source_box, boxes[i]);
}

TEST(ZeroShot, MatchingRowClosedForm) {
  // F_v row equals text row 1; other text rows orthogonal; temperature 1.
  const auto s = zero_shot_scores(emb({{0, 1, 0}}), emb({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(s(0, 1), e / (e + 2), 1e-12);
  EXPECT_NEAR(s(0, 0), 1 / (e + 2), 1e-12);
}

TEST(ZeroShot, IdenticalTextRowsGiveUniform) {
  const auto s = zero_shot_scores(emb({{0.3, -2, 1}, {5, 5, 5}}), emb({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(s(i, j), 0.25, 1e-12);
}

TEST(ZeroShot, LargeTemperatureSaturates) {
  const auto s = zero_shot_scores(emb({{1, 0.5, 0}}), emb({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), 1000.0);
  EXPECT_NEAR(s(0, 0), 1.0, 1e-6);
}

TEST(ZeroShot, NormalizesUnflaggedRows) {
  const auto a = zero_shot_scores(emb({{3, 4}}), emb({{2, 0}, {0, 7}}), 5.0);
  const auto b = zero_shot_scores(emb({{0.6, 0.8}}, true), emb({{1, 0}, {0, 1}}, true), 5.0);
  EXPECT_NEAR(a(0, 0), b(0, 0), 1e-12);
  EXPECT_NEAR(a(0, 1), b(0, 1), 1e-12);
}

TEST(ZeroShot, ZeroRowNamesTheRow) {
  try {
    zero_shot_scores(emb({{1, 0}, {0, 0}}), emb({{1, 0}, {0, 1}}));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(ZeroShot, DimensionMismatch) {
  EXPECT_THROW(zero_shot_scores(emb({{1, 0, 0}}), emb({{1, 0}})), DataError);
}

TEST(ZeroShot, RowsSumToOneAndPermutationEquivariant) {
  CounterRng rng(2);
  const std::size_t n = 20, k = 6, d = 16;
  Matrix fv(n, d), ft(k, d);
  for (auto& v : fv.data) v = rng.normal();
  for (auto& v : ft.data) v = rng.normal();
  const auto s = zero_shot_scores({fv, false}, {ft, false});
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (double v : s.row(i)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Matrix ftp(k, d);
  for (std::size_t j = 0; j < k; ++j) std::copy(ft.row(perm[j]).begin(), ft.row(perm[j]).end(), ftp.row(j).begin());
  const auto sp = zero_shot_scores({fv, false}, {ftp, false});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) EXPECT_NEAR(sp(i, j), s(i, perm[j]), 1e-12);
}

TEST(CgaRefine, AgreementKeepsTeacher) {
  const auto w = Matrix::from_rows({{0.7, 0.3}}), c = Matrix::from_rows({{0.6, 0.4}});
  for (double lam : {0.0, 0.2, 1.0}) EXPECT_EQ(cga_refine(w, c, lam), w);
}

TEST(CgaRefine, DisagreementBlends) {
  const auto r = cga_refine(Matrix::from_rows({{0.7, 0.3}}), Matrix::from_rows({{0.1, 0.9}}), 0.2);
  EXPECT_NEAR(r(0, 0), 0.58, 1e-12);
  EXPECT_NEAR(r(0, 1), 0.42, 1e-12);
}

TEST(CgaRefine, LambdaZeroIsIdentity) {
  CounterRng rng(3);
  Matrix w(50, 5), c(50, 5);
  for (std::size_t i = 0; i < 50; ++i) {
    auto a = random_simplex(rng, 5), b = random_simplex(rng, 5);
    std::copy(a.begin(), a.end(), w.row(i).begin());
    std::copy(b.begin(), b.end(), c.row(i).begin());
  }
  EXPECT_EQ(cga_refine(w, c, 0.0), w);
}

TEST(CgaRefine, ErrorsOnShapeAndLambda) {
  EXPECT_THROW(cga_refine(Matrix(2, 3), Matrix(2, 2), 0.2), DataError);
  EXPECT_THROW(cga_refine(Matrix(1, 2), Matrix(1, 2), 1.5), ConfigError);
}

TEST(CgaRefine, ArgmaxTieGoesToLowestIndex) {
  // Teacher tie between 0 and 1 resolves to 0; zero-shot picks 0 too: agreement.
  const auto w = Matrix::from_rows({{0.4, 0.4, 0.2}}), c = Matrix::from_rows({{0.5, 0.3, 0.2}});
  EXPECT_EQ(cga_refine(w, c, 0.5), w);
}

TEST(CgaRefine, Properties) {
  CounterRng rng(4);
  const std::size_t n = 500, k = 4;
  Matrix w(n, k), c(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    auto a = random_simplex(rng, k), b = random_simplex(rng, k);
    std::copy(a.begin(), a.end(), w.row(i).begin());
    std::copy(b.begin(), b.end(), c.row(i).begin());
  }
  for (double lam : {0.2, 0.5, 1.0}) {
    const auto r = cga_refine(w, c, lam);
    for (std::size_t i = 0; i < n; ++i) {
      const bool agree = argmax(w.row(i).data(), k) == argmax(c.row(i).data(), k);
      double sum = 0;
      for (std::size_t j = 0; j < k; ++j) {
        sum += r(i, j);
        if (agree) {
          EXPECT_EQ(r(i, j), w(i, j));
        }
        if (!agree && lam == 1.0) {
          EXPECT_EQ(r(i, j), c(i, j));
        }
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
    // Idempotent once every row agrees after the first pass.
    const auto r2 = cga_refine(r, c, lam);
    bool all_agree = true;
    for (std::size_t i = 0; i < n; ++i) all_agree &= argmax(r.row(i).data(), k) == argmax(c.row(i).data(), k);
    if (all_agree) {
      EXPECT_EQ(r2, r);
    }
  }
}

TEST(FilterByConfidence, Example) {
  const std::vector<Detection> d{{{0, 0, 1, 1, 0}, {0.8, 0.2}}, {{1, 0, 1, 1, 0}, {0.55, 0.45}},
                                 {{2, 0, 1, 1, 0}, {0.3, 0.7}}};
  const auto p = filter_by_confidence(d, 0.6);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].class_id, 0u);
  EXPECT_DOUBLE_EQ(p[0].score, 0.8);
  EXPECT_EQ(p[0].box.cx, 0.0);
  EXPECT_EQ(p[1].class_id, 1u);
  EXPECT_DOUBLE_EQ(p[1].score, 0.7);
  EXPECT_EQ(p[1].box.cx, 2.0);
}

TEST(FilterByConfidence, Extremes) {
  const std::vector<Detection> d{{{0, 0, 1, 1, 0}, {0.5, 0.5}}, {{0, 0, 1, 1, 0}, {1.0, 0.0}}};
  EXPECT_EQ(filter_by_confidence(d, 0.0).size(), 2u);
  const auto one = filter_by_confidence(d, 1.0);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].score, 1.0);
  EXPECT_THROW(filter_by_confidence(d, 1.5), ConfigError);
}

TEST(FilterByConfidence, CountNonIncreasingInTau) {
  CounterRng rng(5);
  std::vector<Detection> d;
  for (int i = 0; i < 200; ++i) d.push_back({{0, 0, 1, 1, 0}, random_simplex(rng, 3)});
  std::size_t prev = d.size() + 1;
  for (int t = 0; t <= 100; ++t) {
    const auto n = filter_by_confidence(d, t / 100.0).size();
    EXPECT_LE(n, prev);
    prev = n;
  }
}
