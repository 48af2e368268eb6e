#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "sfod/backends.hpp"

using namespace sfod;

namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
  Image img(w, h, 3);
  CounterRng rng(seed);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
  return img;
}

std::vector<TrainingSample> random_samples(CounterRng& rng, std::size_t n, std::size_t k) {
  std::vector<TrainingSample> s(n);
  for (auto& x : s) {
    x.features.resize(kToyFeatureDim);
    for (auto& f : x.features) f = rng.uniform(0.0, 2.0);
    x.class_id = rng.bernoulli(0.8) ? static_cast<int>(rng.below(k)) : -1;
    x.objectness = rng.bernoulli(0.8) ? static_cast<int>(rng.below(2)) : -1;
  }
  return s;
}

}  // namespace

TEST(ToyDetector, ZeroWeightsGiveUniformScores) {
  ToyDetector det(4);
  const auto out = det.infer(noise_image(64, 64, 1), {{20, 20, 10, 12, 0.2}, {40, 30, 8, 8, -1.0}});
  ASSERT_EQ(out.size(), 2u);  // objectness sigmoid(0) = 0.5 meets the 0.5 threshold
  for (const auto& d : out)
    for (double s : d.scores) EXPECT_DOUBLE_EQ(s, 0.25);
}

TEST(ToyDetector, DominantLogitWins) {
  ToyDetector det(3);
  auto p = det.parameters();
  p["cls.bias"].values = {0, 0, 10};
  det.set_parameters(p);
  const auto out = det.infer(noise_image(64, 64, 2), {{32, 32, 16, 16, 0}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_GT(out[0].scores[2], 0.99);
  EXPECT_NEAR(out[0].scores[2], std::exp(10.0) / (std::exp(10.0) + 2), 1e-12);
}

TEST(ToyDetector, EmptyProposals) {
  ToyDetector det(3);
  EXPECT_TRUE(det.infer(noise_image(16, 16, 3), {}).empty());
}

TEST(ToyDetector, ZeroAreaAndOffImageProposalsAreSkipped) {
  ToyDetector det(3);
  const auto r = det.infer_detailed(noise_image(32, 32, 4), {{10, 10, 0, 5, 0}, {16, 16, 8, 8, 0}, {-40, -40, 4, 4, 0}});
  EXPECT_EQ(r.skipped, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(r.kept, (std::vector<std::size_t>{1}));
  EXPECT_TRUE(std::isnan(r.objectness[0]));
  EXPECT_FALSE(std::isnan(r.objectness[1]));
}

TEST(ToyDetector, ObjectnessGatesDetections) {
  ToyDetector det(2);
  auto p = det.parameters();
  p["obj.bias"].values = {-5};
  det.set_parameters(p);
  const auto r = det.infer_detailed(noise_image(32, 32, 5), {{16, 16, 8, 8, 0}});
  EXPECT_TRUE(r.detections.empty());
  EXPECT_NEAR(r.objectness[0], 1 / (1 + std::exp(5.0)), 1e-12);
}

TEST(ToyDetector, InferIsDeterministic) {
  ToyDetector det(4);
  det.randomize(6, 0.5);
  const Image img = noise_image(64, 64, 7);
  const std::vector<OrientedBox> props{{10, 10, 8, 9, 0.4}, {40, 50, 20, 11, -0.7}, {30, 30, 12, 12, 1.2}};
  const auto a = det.infer_detailed(img, props), b = det.infer_detailed(img, props);
  ASSERT_EQ(a.detections.size(), b.detections.size());
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    EXPECT_EQ(a.detections[i].box, b.detections[i].box);
    EXPECT_EQ(a.detections[i].scores, b.detections[i].scores);
  }
  EXPECT_EQ(a.kept, b.kept);
}

TEST(ToyFeatures, ShapeAndNormalization) {
  const auto f = toy_features(noise_image(32, 32, 8));
  ASSERT_EQ(f.size(), kToyFeatureDim);
  for (int c = 0; c < 3; ++c) {
    double s = 0;
    for (int b = 0; b < kColorBins; ++b) s += f[c * kColorBins + b];
    EXPECT_NEAR(s, kColorBins, 1e-9);
  }
  double o = 0;
  for (int b = 0; b < kOrientationBins; ++b) o += f[3 * kColorBins + b];
  EXPECT_NEAR(o, kOrientationBins, 1e-9);
}

TEST(ToyLoss, ConfidentCorrectIsZero) {
  ToyDetector det(3);
  auto p = det.parameters();
  p["cls.bias"].values = {0, 800, 0};
  det.set_parameters(p);
  TrainingSample s{std::vector<double>(kToyFeatureDim, 0.3), 1, -1};
  EXPECT_EQ(det.loss({s}).roi, 0.0);
}

TEST(ToyLoss, UniformIsLogK) {
  for (std::size_t k : {2u, 3u, 7u}) {
    ToyDetector det(k);
    std::vector<TrainingSample> s;
    for (std::size_t i = 0; i < 5; ++i) s.push_back({std::vector<double>(kToyFeatureDim, 0.1 * i), static_cast<int>(i % k), -1});
    EXPECT_NEAR(det.loss(s).roi, std::log(static_cast<double>(k)), 1e-12);
    EXPECT_EQ(det.loss(s).rpn, 0.0);
  }
}

TEST(ToyLoss, ObjectnessTermAtZeroWeightsIsLog2) {
  ToyDetector det(3);
  TrainingSample a{std::vector<double>(kToyFeatureDim, 1.0), -1, 1}, b{std::vector<double>(kToyFeatureDim, 1.0), -1, 0};
  EXPECT_NEAR(det.loss({a, b}).rpn, std::log(2.0), 1e-12);
  EXPECT_EQ(det.loss({a, b}).roi, 0.0);
}

TEST(ToyLoss, GradientsMatchFiniteDifferences) {
  CounterRng rng(9);
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t k = 2 + rng.below(5);
    ToyDetector det(k);
    det.randomize(100 + inst, 0.5);
    const auto samples = random_samples(rng, 1 + rng.below(12), k);
    const auto analytic = det.loss_and_grad(samples).grads;
    const auto numeric = oracle::numeric_grad(det.parameters(), [&](const NamedTensors& p) {
      ToyDetector d(k);
      d.set_parameters(p);
      return d.loss(samples).total();
    });
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-4) << "instance " << inst;
  }
}

TEST(ToyLoss, RejectsBadTargets) {
  ToyDetector det(3);
  EXPECT_THROW(det.loss({{std::vector<double>(kToyFeatureDim, 0.0), 3, -1}}), DataError);
  EXPECT_THROW(det.loss({{std::vector<double>(kToyFeatureDim, 0.0), 0, 2}}), DataError);
  EXPECT_THROW(det.loss({{std::vector<double>(5, 0.0), 0, -1}}), DataError);
  const Image img = noise_image(32, 32, 10);
  const auto pb = extract_patches(img, {{16, 16, 8, 8, 0}}, kToyPatchSize);
  EXPECT_THROW(det.loss_and_grad(pb.patches, {7}), DataError);
  EXPECT_THROW(det.loss_and_grad(pb.patches, {0, 1}), DataError);
}

TEST(ToyLoss, GradShapesMatchParameters) {
  ToyDetector det(5);
  CounterRng rng(11);
  const auto lg = det.loss_and_grad(random_samples(rng, 4, 5));
  const auto p = det.parameters();
  ASSERT_EQ(lg.grads.size(), p.size());
  for (const auto& [name, t] : p) EXPECT_EQ(lg.grads.at(name).shape, t.shape);
  EXPECT_GE(lg.loss.total(), 0.0);
}

TEST(ToyDetector, MomentumStep) {
  ToyDetector det(2, 0.9);
  NamedTensors g = det.parameters();
  for (auto& [n, t] : g) std::fill(t.values.begin(), t.values.end(), 1.0);
  det.apply_gradient_step(g, 0.1);
  det.apply_gradient_step(g, 0.1);
  // v1 = 1, v2 = 1.9; theta = -0.1 * (1 + 1.9)
  EXPECT_NEAR(det.parameters().at("obj.bias").values[0], -0.29, 1e-12);
}

TEST(ToyDetector, SetParametersValidates) {
  ToyDetector det(3);
  auto p = det.parameters();
  p.erase("obj.bias");
  EXPECT_THROW(det.set_parameters(p), DataError);
  p = det.parameters();
  p["cls.bias"] = Tensor({4});
  EXPECT_THROW(det.set_parameters(p), DataError);
}

namespace {

Patch keyed_patch(const std::string& key) {
  Patch p;
  p.key = key;
  return p;
}

}  // namespace

TEST(CentroidClassifier, ZeroSigmaEmbedsCentroid) {
  const std::size_t k = 5, d = 16;
  CentroidClassifier c(k, d, 0.0, 3, [](const Patch& p) -> std::optional<std::size_t> { return std::stoul(p.key); });
  std::vector<Patch> patches;
  for (std::size_t i = 0; i < k; ++i) patches.push_back(keyed_patch(std::to_string(i)));
  const auto e = c.embed_images(patches);
  EXPECT_TRUE(e.normalized);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(e.values(i, j), c.centroids()(i, j), 1e-15);
  const auto s = zero_shot_scores(e, c.text_embeddings(build_prompts({"a", "b", "c", "d", "e"})));
  for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(argmax(s.row_vector(i)), i);
}

TEST(CentroidClassifier, CentroidsOrthonormal) {
  CentroidClassifier c(4, 12, 0.0, 4, [](const Patch&) { return std::nullopt; });
  const auto& m = c.centroids();
  ASSERT_EQ(m.rows, 5u);
  for (std::size_t a = 0; a < m.rows; ++a)
    for (std::size_t b = 0; b < m.rows; ++b) {
      double dot = 0;
      for (std::size_t j = 0; j < m.cols; ++j) dot += m(a, j) * m(b, j);
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
    }
}

TEST(CentroidClassifier, DeterministicBySeedAndKey) {
  auto lab = [](const Patch&) -> std::optional<std::size_t> { return 1; };
  CentroidClassifier a(3, 8, 0.7, 42, lab), b(3, 8, 0.7, 42, lab), c(3, 8, 0.7, 43, lab);
  const auto ea = a.embed_images({keyed_patch("x:1")}), eb = b.embed_images({keyed_patch("x:1")});
  EXPECT_EQ(ea.values, eb.values);
  EXPECT_NE(ea.values, c.embed_images({keyed_patch("x:1")}).values);
  EXPECT_NE(ea.values, a.embed_images({keyed_patch("x:2")}).values);
}

TEST(CentroidClassifier, LargeSigmaApproachesChance) {
  const std::size_t k = 4, d = 64;
  const double sigma = 10 * std::sqrt(2.0);  // 10x the distance between orthonormal centroids
  CentroidClassifier c(k, d, sigma, 5, [](const Patch& p) -> std::optional<std::size_t> { return p.key.back() - '0'; });
  const auto text = c.text_embeddings(build_prompts({"a", "b", "c", "d"}));
  std::vector<Patch> patches;
  for (int t = 0; t < 10000; ++t) patches.push_back(keyed_patch(std::to_string(t) + ":" + std::to_string(t % 4)));
  const auto s = zero_shot_scores(c.embed_images(patches), text);
  std::vector<int> hits(k), total(k);
  for (int t = 0; t < 10000; ++t) {
    ++total[t % 4];
    hits[t % 4] += argmax(s.row_vector(t)) == static_cast<std::size_t>(t % 4);
  }
  for (std::size_t cls = 0; cls < k; ++cls)
    EXPECT_NEAR(static_cast<double>(hits[cls]) / total[cls], 1.0 / k, 0.05) << "class " << cls;
}

TEST(CentroidClassifier, CalibrationHitsTarget) {
  const double sigma = calibrate_sigma(4, 64, 0.7, 0xCA1, 2000);
  EXPECT_NEAR(centroid_accuracy(4, 64, sigma, 0x5EED, 8000), 0.7, 0.03);
}

TEST(CentroidClassifier, ZeroSigmaAgreesWithCorrectTeacher) {
  // Whenever the teacher's argmax equals the true class, the oracle's argmax
  // does too, so refinement leaves the row alone.
  const std::size_t k = 4;
  CentroidClassifier c(k, 32, 0.0, 6, [](const Patch& p) -> std::optional<std::size_t> { return p.key[0] - '0'; });
  const auto text = c.text_embeddings(build_prompts({"a", "b", "c", "d"}));
  CounterRng rng(12);
  std::vector<Patch> patches;
  Matrix yw(200, k);
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 200; ++i) {
    const std::size_t t = rng.below(k);
    truth.push_back(t);
    patches.push_back(keyed_patch(std::to_string(t) + ":" + std::to_string(i)));
    for (auto& v : yw.row(i)) v = rng.uniform();
  }
  const auto refined = cga_refine(yw, zero_shot_scores(c.embed_images(patches), text), 0.5);
  for (std::size_t i = 0; i < 200; ++i)
    if (argmax(yw.row_vector(i)) == truth[i]) {
      EXPECT_EQ(refined.row_vector(i), yw.row_vector(i));
    }
}

TEST(CentroidClassifier, BadConstruction) {
  auto lab = [](const Patch&) { return std::nullopt; };
  EXPECT_THROW(CentroidClassifier(4, 4, 0.0, 1, lab), ConfigError);
  EXPECT_THROW(CentroidClassifier(4, 8, -1.0, 1, lab), ConfigError);
  CentroidClassifier c(2, 4, 0.0, 1, lab);
  EXPECT_THROW(c.text_embeddings(build_prompts({"a", "b", "c"})), DataError);
}

namespace {

KeyedEmbeddings keyed(std::vector<std::string> keys, std::size_t d, std::uint64_t seed, bool normalized) {
  KeyedEmbeddings e;
  e.keys = std::move(keys);
  e.matrix = {Matrix(e.keys.size(), d), normalized};
  CounterRng rng(seed);
  for (auto& v : e.matrix.values.data) v = static_cast<float>(rng.normal());  // float-representable
  if (normalized) e.matrix = l2_normalized(e.matrix);
  for (auto& v : e.matrix.values.data) v = static_cast<float>(v);
  return e;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("sfod_backends_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST(FileEmbeddingClassifier, RoundTripServesStoredRows) {
  TempDir dir;
  const auto text = keyed({"ship", "harbor", "airport"}, 8, 1, true);
  const auto imgs = keyed({"img:0", "img:1"}, 8, 2, false);
  save_embeddings(dir.path / "text.emb", text);
  save_embeddings(dir.path / "img.emb", imgs);
  const auto clf = load_file_embeddings(dir.path / "text.emb", dir.path / "img.emb");
  EXPECT_EQ(clf.dim(), 8u);
  EXPECT_FALSE(clf.reads_pixels());
  const auto t = clf.text_embeddings(build_prompts({"airport", "ship", "harbor"}));
  EXPECT_EQ(t.values.row_vector(0), text.matrix.values.row_vector(2));
  EXPECT_EQ(t.values.row_vector(1), text.matrix.values.row_vector(0));
  const auto e = clf.embed_images({keyed_patch("img:1"), keyed_patch("img:0")});
  EXPECT_EQ(e.values.row_vector(0), imgs.matrix.values.row_vector(1));
  EXPECT_EQ(e.values.row_vector(1), imgs.matrix.values.row_vector(0));
}

TEST(FileEmbeddingClassifier, MissingKeysAreErrors) {
  const FileEmbeddingClassifier clf(keyed({"a", "b"}, 4, 3, true), keyed({"p:0"}, 4, 4, false));
  EXPECT_THROW(clf.embed_images({keyed_patch("p:9")}), DataError);
  EXPECT_THROW(clf.text_embeddings(build_prompts({"a", "z"})), DataError);
}

TEST(FileEmbeddingClassifier, ClassCountMismatchNamesBoth) {
  const FileEmbeddingClassifier clf(keyed({"a", "b"}, 4, 3, true), keyed({"p:0"}, 4, 4, false));
  try {
    clf.text_embeddings(build_prompts({"a", "b", "c"}));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("K=2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("K=3"), std::string::npos) << msg;
  }
}

TEST(FileEmbeddingClassifier, DimensionMismatch) {
  EXPECT_THROW(FileEmbeddingClassifier(keyed({"a"}, 4, 1, true), keyed({"p"}, 5, 2, false)), DataError);
}
