#include "klp/graphs.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace klp;

TEST(Knn, CollinearPoints) {
  Matrix X(1, 3);
  X << 0, 1, 3;
  const auto nbr = knn(X, 1);
  EXPECT_EQ(nbr.neighbors[0], std::vector<Index>{1});
  EXPECT_EQ(nbr.neighbors[1], std::vector<Index>{0});
  EXPECT_EQ(nbr.neighbors[2], std::vector<Index>{1});
}

TEST(Knn, AllOthersWhenKIsNMinusOne) {
  const Matrix X = klp::testing::random_matrix(2, 7, 4);
  const auto nbr = knn(X, 6);
  for (Index i = 0; i < 7; ++i) {
    std::set<Index> s(nbr.neighbors[static_cast<size_t>(i)].begin(), nbr.neighbors[static_cast<size_t>(i)].end());
    EXPECT_EQ(s.size(), 6u);
    EXPECT_FALSE(s.count(i));
  }
}

TEST(Knn, DuplicatesAreFirstNeighbors) {
  Matrix X(2, 4);
  X << 0, 5, 0, 9,
       0, 5, 0, 9;
  const auto nbr = knn(X, 2);
  EXPECT_EQ(nbr.neighbors[0][0], 2);
  EXPECT_EQ(nbr.neighbors[2][0], 0);
}

TEST(Knn, TieBreakByIndex) {
  Matrix X(1, 3);
  X << 0, -1, 1;
  EXPECT_EQ(knn(X, 1).neighbors[0][0], 1);
}

TEST(Knn, InvalidK) {
  const Matrix X = Matrix::Zero(2, 3);
  EXPECT_THROW(knn(X, 3), InputError);
  EXPECT_THROW(knn(X, 0), InputError);
}

TEST(GaussianWeights, TwoPoints) {
  const double d = 1.7;
  Matrix X(1, 2);
  X << 0, d;
  const auto W = gaussian_weights(X, knn(X, 1)).entries;
  EXPECT_NEAR(W(0, 1), std::exp(-d), 1e-15);
  EXPECT_EQ(W(0, 1), W(1, 0));
  EXPECT_EQ(W(0, 0), 0.0);
}

TEST(GaussianWeights, CoincidentNeighborsAndNonNeighbors) {
  Matrix X(1, 4);
  X << 0, 0, 10, 11;
  const auto W = gaussian_weights(X, knn(X, 1)).entries;
  EXPECT_EQ(W(0, 1), 1.0);
  EXPECT_EQ(W(0, 2), 0.0);
  EXPECT_EQ(W(1, 3), 0.0);
  EXPECT_GT(W(2, 3), 0.0);
}

TEST(GaussianWeights, IdenticalPointsDegenerate) {
  const Matrix X = Matrix::Ones(2, 5);
  EXPECT_THROW(gaussian_weights(X, knn(X, 2)), DegenerateInputError);
}

TEST(GaussianWeights, OracleOnRandomData) {
  const Matrix X = klp::testing::random_matrix(3, 12, 17);
  const auto nbr = knn(X, 3);
  double total = 0.0;
  int edges = 0;
  for (Index i = 0; i < 12; ++i)
    for (Index j : nbr.neighbors[static_cast<size_t>(i)]) {
      double sq = 0.0;
      for (Index r = 0; r < 3; ++r) sq += (X(r, i) - X(r, j)) * (X(r, i) - X(r, j));
      total += std::sqrt(sq);
      ++edges;
    }
  const double sigma = total / edges;
  const auto W = gaussian_weights(X, nbr).entries;
  EXPECT_EQ(W, W.transpose());
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j) {
      const auto& ni = nbr.neighbors[static_cast<size_t>(i)];
      const auto& nj = nbr.neighbors[static_cast<size_t>(j)];
      const bool edge = std::count(ni.begin(), ni.end(), j) || std::count(nj.begin(), nj.end(), i);
      const double expect = edge ? std::exp(-(X.col(i) - X.col(j)).squaredNorm() / sigma) : 0.0;
      EXPECT_NEAR(W(i, j), expect, 1e-14);
    }
}

TEST(SymmetrizeNormalize, PermutationMatrixFixed) {
  Matrix W(2, 2);
  W << 0, 1, 1, 0;
  EXPECT_EQ(symmetrize_normalize({W, true}).entries, W);
}

TEST(SymmetrizeNormalize, ScalarLoopOracle) {
  const Matrix W = klp::testing::random_matrix(4, 4, 2).cwiseAbs();
  const Matrix S = symmetrize_normalize({W, false}).entries;
  Vector d = Vector::Zero(4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) d(i) += 0.5 * (W(i, j) + W(j, i));
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      EXPECT_NEAR(S(i, j), (W(i, j) + W(j, i)) / (2.0 * std::sqrt(d(i) * d(j))), 1e-15);
}

TEST(SymmetrizeNormalize, SymmetricInputOnlyNormalized) {
  const Matrix A = klp::testing::random_matrix(5, 5, 6).cwiseAbs();
  const Matrix W = A + A.transpose();
  const Vector d = W.rowwise().sum();
  const Matrix expect = d.cwiseSqrt().cwiseInverse().asDiagonal() * W * d.cwiseSqrt().cwiseInverse().asDiagonal();
  EXPECT_LE((symmetrize_normalize({W, true}).entries - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SymmetrizeNormalize, SpectralRadiusAtMostOne) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix X = klp::testing::random_matrix(2, 30, seed);
    const Matrix S = symmetrize_normalize(gaussian_weights(X, knn(X, 5))).entries;
    // power iteration
    Vector v = Vector::Ones(30);
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
      const Vector w = S * v;
      lambda = w.norm() / v.norm();
      v = w / w.norm();
    }
    EXPECT_LE(lambda, 1.0 + 1e-10);
    EXPECT_EQ(S, S.transpose());
  }
}

TEST(SymmetrizeNormalize, TranslationInvariantGraph) {
  const Matrix X = klp::testing::random_matrix(3, 20, 12);
  const Vector shift = Vector::Constant(3, 4.5);
  const Matrix S1 = symmetrize_normalize(gaussian_weights(X, knn(X, 4))).entries;
  const Matrix Xs = X.colwise() + shift;
  const Matrix S2 = symmetrize_normalize(gaussian_weights(Xs, knn(Xs, 4))).entries;
  EXPECT_LE((S1 - S2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SymmetrizeNormalize, IsolatedNodeStaysZero) {
  Matrix W = Matrix::Zero(3, 3);
  W(0, 1) = W(1, 0) = 2.0;
  const Matrix S = symmetrize_normalize({W, true}).entries;
  EXPECT_TRUE(S.row(2).isZero(0.0));
  EXPECT_TRUE(S.allFinite());
}

TEST(SymmetrizeNormalize, NegativeWeightsRejected) {
  EXPECT_THROW(symmetrize_normalize({-Matrix::Identity(2, 2), true}), InputError);
}

TEST(Export, CsvRoundTripAndPgmHeader) {
  Matrix M(2, 3);
  M << 0.1, 0.2, 1.0 / 3.0, 0.0, -1.0, 1e-300;
  std::ostringstream csv;
  write_matrix_csv(csv, M);
  std::istringstream in(csv.str());
  std::string line;
  Index i = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    Index j = 0;
    while (std::getline(row, cell, ',')) EXPECT_EQ(std::stod(cell), M(i, j++));
    EXPECT_EQ(j, 3);
    ++i;
  }
  EXPECT_EQ(i, 2);

  std::ostringstream pgm;
  write_matrix_pgm(pgm, M);
  const std::string s = pgm.str();
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(s.size(), header.size() + 6);
  EXPECT_EQ(s.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 2]), 255);  // max
  EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 4]), 0);    // min
}
