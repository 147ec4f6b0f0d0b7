#include "klp/labels.hpp"
#include "klp/soft_labels.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace klp;

namespace {

LabelSet make(std::vector<int> a, int c) {
  LabelSet L;
  L.assignments = std::move(a);
  L.class_count = c;
  return L;
}

}  // namespace

TEST(EncodeLabels, ComplementRule) {
  const auto M = encode_labels(make({1}, 3));
  EXPECT_EQ(M.y_pos.col(0), (Vector(3) << 0, 1, 0).finished());
  EXPECT_EQ(M.y_neg.col(0), (Vector(3) << 1, 0, 1).finished());
}

TEST(EncodeLabels, UnlabeledColumnsAreZero) {
  const auto M = encode_labels(make({LabelSet::kUnlabeled, 2}, 3));
  EXPECT_TRUE(M.y_pos.col(0).isZero(0.0));
  EXPECT_TRUE(M.y_neg.col(0).isZero(0.0));
  EXPECT_EQ(M.classes(), 3);
  EXPECT_EQ(M.samples(), 2);
}

TEST(EncodeLabels, FullyLabeledColumnSums) {
  for (int c : {1, 2, 5}) {
    const auto L = klp::testing::random_labels(40, c, 40, 3);
    const auto M = encode_labels(L);
    EXPECT_TRUE((M.y_pos.colwise().sum().array() == 1.0).all());
    EXPECT_TRUE((M.y_neg.colwise().sum().array() == c - 1.0).all());
    // Y+ and Y- never mark the same entry.
    EXPECT_EQ(M.y_pos.cwiseProduct(M.y_neg).sum(), 0.0);
  }
}

TEST(EncodeLabels, NegativeOnlyFacts) {
  auto L = make({LabelSet::kUnlabeled, 0}, 3);
  L.negatives = {{0, 2}, {1, 0}};
  const auto M = encode_labels(L);
  EXPECT_EQ(M.y_neg(2, 0), 1.0);
  EXPECT_EQ(M.y_neg.col(0).sum(), 1.0);
  // contradicts the positive label, ignored
  EXPECT_EQ(M.y_neg(0, 1), 0.0);
  const auto w = build_confidence(L);
  EXPECT_EQ(w.u_pos(0), 0.0);
  EXPECT_EQ(w.u_neg(0), 1.0);
}

TEST(EncodeLabels, OutOfRangeClassThrows) {
  EXPECT_THROW(encode_labels(make({3}, 3)), InputError);
  EXPECT_THROW(encode_labels(make({-2}, 3)), InputError);
  EXPECT_THROW(encode_labels(make({0}, 0)), InputError);
  auto L = make({0, 1}, 2);
  L.negatives = {{5, 0}};
  EXPECT_THROW(encode_labels(L), InputError);
}

TEST(EncodeLabels, PermutationEquivariant) {
  const auto L = klp::testing::random_labels(25, 4, 12, 9);
  const auto p = klp::testing::permutation(25, 1);
  LabelSet Lp = L;
  for (size_t t = 0; t < p.size(); ++t) Lp.assignments[t] = L.assignments[static_cast<size_t>(p[t])];
  const auto M = encode_labels(L), Mp = encode_labels(Lp);
  EXPECT_EQ(Mp.y_pos, klp::testing::permute_columns(M.y_pos, p));
  EXPECT_EQ(Mp.y_neg, klp::testing::permute_columns(M.y_neg, p));
}

TEST(BuildConfidence, Defaults) {
  const auto w = build_confidence(make({0, LabelSet::kUnlabeled, 1}, 2));
  EXPECT_EQ(w.u_pos(0), 1e10);
  EXPECT_EQ(w.u_neg(0), 1.0);
  EXPECT_EQ(w.u_pos(1), 0.0);
  EXPECT_EQ(w.u_neg(1), 0.0);
  EXPECT_EQ(w.u_pos(2), 1e10);
}

TEST(BuildConfidence, ZeroWeightsGiveZeroMatrices) {
  const auto w = build_confidence(make({0, 1, 1}, 2), 0.0, 0.0);
  EXPECT_TRUE(w.u_pos.isZero(0.0));
  EXPECT_TRUE(w.u_neg.isZero(0.0));
}

TEST(BuildConfidence, NegativeWeightsRejected) {
  EXPECT_THROW(build_confidence(make({0}, 2), -1.0, 0.0), InputError);
  EXPECT_THROW(build_confidence(make({0}, 2), 1.0, -1.0), InputError);
}

TEST(LabelSetTest, Histogram) {
  const auto L = make({0, 0, 2, LabelSet::kUnlabeled}, 3);
  EXPECT_EQ(L.labeled_count(), 3);
  EXPECT_EQ(L.class_histogram(), (std::vector<Index>{2, 0, 1}));
}

TEST(Decode, ArgmaxWithLowestIndexTies) {
  Matrix F(2, 3);
  F << 0.1, 0.5, 0.0,
       0.9, 0.5, -1.0;
  const auto s = decode(F);
  EXPECT_EQ(s.hard, (std::vector<int>{1, 0, 0}));
}

TEST(Decode, PositiveMatrixOfFullLabelsRecoversTruth) {
  const auto L = klp::testing::random_labels(30, 4, 30, 2);
  EXPECT_EQ(decode(encode_labels(L).y_pos).hard, L.assignments);
}

TEST(Accuracy, Basic) {
  EXPECT_EQ(accuracy({0, 1, 1, 0}, {0, 1, 0, 0}), 0.75);
  EXPECT_THROW(accuracy({0}, {0, 1}), InputError);
}
