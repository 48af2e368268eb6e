#include <gtest/gtest.h>

#include "sfod/core/rng.hpp"
#include "sfod/tensor_io.hpp"

using namespace sfod;

namespace {

NamedTensors sample_tensors() {
  NamedTensors t;
  t["a.weight"] = Tensor({2, 3}, {1.5, -2.25, 0.0, 3.0e-8f, 1e20f, -0.125});
  t["b"] = Tensor({1}, {42});
  t["empty"] = Tensor({0});
  return t;
}

}  // namespace

TEST(TensorFile, RoundTripIsExactForFloatValues) {
  const auto t = sample_tensors();
  EXPECT_EQ(decode_tensors(encode_tensors(t)), t);
}

TEST(TensorFile, LayoutIsLittleEndian) {
  NamedTensors t;
  t["x"] = Tensor({1}, {1.0});
  const auto b = encode_tensors(t);
  const std::vector<std::uint8_t> expect{'S', 'F', 'O', 'D', 'T', 'N', 'S', '1', 1, 0, 0, 0,  1, 0, 0, 0, 'x',
                                         1,   0,   0,   0,   1,   0,   0,   0,   0, 0, 0x80, 0x3f};
  EXPECT_EQ(b, expect);
}

TEST(TensorFile, RejectsCorruptInput) {
  auto b = encode_tensors(sample_tensors());
  auto bad = b;
  bad[0] = 'X';
  EXPECT_THROW(decode_tensors(bad), IoError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, b.size() - 1}) {
    std::vector<std::uint8_t> t(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_tensors(t), IoError) << cut;
  }
  b.push_back(0);
  EXPECT_THROW(decode_tensors(b), IoError);
}

TEST(TensorFile, ShapeValueMismatch) { EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DataError); }

TEST(EmbeddingFile, RoundTripWithAndWithoutKeys) {
  KeyedEmbeddings e;
  e.matrix = {Matrix::from_rows({{0.5, -1.0, 2.0}, {0.25, 0.0, -0.75}}), true};
  e.keys = {"cat", "dog"};
  const auto back = decode_embeddings(encode_embeddings(e));
  EXPECT_EQ(back.matrix.values, e.matrix.values);
  EXPECT_TRUE(back.matrix.normalized);
  EXPECT_EQ(back.keys, e.keys);

  e.keys.clear();
  e.matrix.normalized = false;
  const auto plain = decode_embeddings(encode_embeddings(e));
  EXPECT_TRUE(plain.keys.empty());
  EXPECT_FALSE(plain.matrix.normalized);
  EXPECT_EQ(plain.matrix.values, e.matrix.values);
}

TEST(EmbeddingFile, TruncatedIsErrorNotPartialData) {
  KeyedEmbeddings e;
  e.matrix = {Matrix(4, 8, 0.5), false};
  const auto b = encode_embeddings(e);
  for (std::size_t cut = 0; cut < b.size(); cut += 7) {
    std::vector<std::uint8_t> t(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_embeddings(t), IoError) << cut;
  }
}

TEST(EmbeddingFile, RejectsUnknownFlagsAndKeyCountMismatch) {
  KeyedEmbeddings e;
  e.matrix = {Matrix(1, 2, 1.0), false};
  auto b = encode_embeddings(e);
  b[16] = 0x04;  // flags field
  EXPECT_THROW(decode_embeddings(b), IoError);
  e.keys = {"a", "b"};
  EXPECT_THROW(encode_embeddings(e), DataError);
}
