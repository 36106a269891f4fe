#include "msadm/linalg.h"

#include <random>

#include <gtest/gtest.h>

namespace msadm {
namespace {

Matrix RandomMatrix(std::mt19937_64* g, int rows, int cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix A(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) A(i, j) = dist(*g);
  return A;
}

Matrix RandomSymmetric(std::mt19937_64* g, int n) {
  Matrix A = RandomMatrix(g, n, n);
  return 0.5 * (A + A.transpose());
}

GTEST_TEST(VecRowTest, StacksRowsAndRoundTrips) {
  Matrix A(2, 2);
  A << 1, 2, 3, 4;
  Vector v = vec_row(A);
  EXPECT_EQ(v(0), 1);
  EXPECT_EQ(v(1), 2);
  EXPECT_EQ(v(2), 3);
  EXPECT_EQ(v(3), 4);
  std::mt19937_64 g(1);
  Matrix B = RandomMatrix(&g, 3, 5);
  EXPECT_TRUE(mat_from_vec(vec_row(B), 3, 5).isApprox(B));
  EXPECT_THROW(mat_from_vec(v, 3, 2), std::invalid_argument);
}

GTEST_TEST(VecRowTest, ProductIdentity) {
  // vec(ABC) = (A (x) C^T) vec(B) in the row-stacking convention.
  std::mt19937_64 g(2);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix A = RandomMatrix(&g, 2, 3), B = RandomMatrix(&g, 3, 4),
           C = RandomMatrix(&g, 4, 2);
    Vector lhs = vec_row(A * B * C);
    Vector rhs = kron(A, C.transpose()) * vec_row(B);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * std::max(1.0, lhs.norm()));
  }
}

GTEST_TEST(SvecTest, OrderAndRoundTrip) {
  Matrix X(2, 2);
  X << 1, 2, 2, 3;
  Vector v = svec(X);
  ASSERT_EQ(v.size(), 3);
  EXPECT_EQ(v(0), 1);
  EXPECT_EQ(v(1), 2);
  EXPECT_EQ(v(2), 3);
  EXPECT_TRUE(smat(v, 2).isApprox(X));
  Vector vi = svec(Matrix::Identity(3, 3));
  Vector expect(6);
  expect << 1, 0, 0, 1, 0, 1;
  EXPECT_TRUE(vi.isApprox(expect));
  std::mt19937_64 g(3);
  for (int n = 1; n <= 5; ++n) {
    Matrix S = RandomSymmetric(&g, n);
    EXPECT_TRUE(smat(svec(S), n).isApprox(S));
  }
  Matrix bad(2, 2);
  bad << 0, 1, -1, 0;
  EXPECT_THROW(svec(bad), std::invalid_argument);
}

GTEST_TEST(KronTest, MatchesDefinition) {
  EXPECT_TRUE(kron(Matrix::Identity(2, 2), Matrix::Identity(2, 2))
                  .isApprox(Matrix::Identity(4, 4)));
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 1;
  Matrix K = kron(D, D);
  Matrix expect = Matrix::Zero(4, 4);
  expect(0, 0) = 1;
  EXPECT_TRUE(K.isApprox(expect));
  std::mt19937_64 g(4);
  Matrix A = RandomMatrix(&g, 2, 2), B = RandomMatrix(&g, 2, 2);
  Matrix P = kron(A, B);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          EXPECT_DOUBLE_EQ(P(2 * i + k, 2 * j + l), A(i, j) * B(k, l));
}

GTEST_TEST(DuplicationTest, KnownSmallCase) {
  DuplicationMap d = build_dup(2);
  Matrix expect(4, 3);
  expect << 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1;
  EXPECT_TRUE(d.H.isApprox(expect));
  Matrix HtH = d.H.transpose() * d.H;
  Vector diag_expect(3);
  diag_expect << 1, 2, 1;
  EXPECT_TRUE(HtH.isApprox(Matrix(diag_expect.asDiagonal())));
}

GTEST_TEST(DuplicationTest, VecEqualsHTimesSvecExactly) {
  std::mt19937_64 g(5);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 1 + static_cast<int>(trial % 5);
    DuplicationMap d = build_dup(n);
    Matrix X = RandomSymmetric(&g, n);
    // 0/1 selection arithmetic: the identity holds bit-for-bit.
    Vector lhs = vec_row(X), rhs = d.H * svec(X);
    for (int i = 0; i < lhs.size(); ++i) EXPECT_EQ(lhs(i), rhs(i));
    ++checked;
  }
  EXPECT_EQ(checked, 1000);
}

GTEST_TEST(DuplicationTest, BlockDiagonalShape) {
  DuplicationMap d = build_dup(2, 2);
  ASSERT_EQ(d.H.rows(), 8);
  ASSERT_EQ(d.H.cols(), 6);
  EXPECT_TRUE(d.H.block(0, 3, 4, 3).isZero());
  EXPECT_TRUE(d.H.block(4, 0, 4, 3).isZero());
  Matrix HtH = d.H.transpose() * d.H;
  for (int i = 0; i < 6; ++i) {
    EXPECT_TRUE(HtH(i, i) == 1.0 || HtH(i, i) == 2.0);
    for (int j = 0; j < 6; ++j)
      if (i != j) EXPECT_EQ(HtH(i, j), 0.0);
  }
}

GTEST_TEST(PinvTest, DiagonalAndIdentity) {
  Matrix E = Matrix::Zero(2, 2);
  E(0, 0) = 1;
  EXPECT_TRUE(pinv(E).isApprox(E));
  EXPECT_TRUE(pinv(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
}

GTEST_TEST(PinvTest, PenroseIdentities) {
  std::mt19937_64 g(6);
  for (int trial = 0; trial < 40; ++trial) {
    int m = 2 + trial % 3, n = 2 + (trial / 3) % 3;
    int r = trial % (std::min(m, n) + 1);
    Matrix A = RandomMatrix(&g, m, r) * RandomMatrix(&g, r, n);
    if (r == 0) A = Matrix::Zero(m, n);
    Matrix Ap = pinv(A);
    double scale = std::max(1.0, A.norm());
    EXPECT_LE((A * Ap * A - A).norm(), 1e-10 * scale);
    EXPECT_LE((Ap * A * Ap - Ap).norm(), 1e-10 * std::max(1.0, Ap.norm()));
    EXPECT_LE(((A * Ap) - (A * Ap).transpose()).norm(), 1e-10);
    EXPECT_LE(((Ap * A) - (Ap * A).transpose()).norm(), 1e-10);
  }
}

GTEST_TEST(NullBasisTest, KnownKernels) {
  Matrix Et = Matrix::Zero(2, 2);
  Et(0, 0) = 1;  // transpose of diag(1,0)
  Matrix B = null_basis(Et.transpose());
  ASSERT_EQ(B.cols(), 1);
  EXPECT_NEAR(std::abs(B(1, 0)), 1.0, 1e-12);
  EXPECT_NEAR(B(0, 0), 0.0, 1e-12);

  EXPECT_EQ(null_basis(Matrix::Identity(3, 3)).cols(), 0);

  Matrix E2t(2, 2);  // transpose of [[0.2,0.3],[0,0]]
  E2t << 0.2, 0.0, 0.3, 0.0;
  Matrix B2 = null_basis(E2t);
  ASSERT_EQ(B2.cols(), 1);
  EXPECT_NEAR(std::abs(B2(1, 0)), 1.0, 1e-12);
}

GTEST_TEST(NullBasisTest, OrthonormalAndAnnihilating) {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 30; ++trial) {
    int m = 2 + trial % 3, n = 2 + (trial / 2) % 4;
    int r = trial % (std::min(m, n) + 1);
    Matrix A = r == 0 ? Matrix::Zero(m, n)
                      : Matrix(RandomMatrix(&g, m, r) * RandomMatrix(&g, r, n));
    Matrix B = null_basis(A);
    EXPECT_EQ(B.cols(), n - r);
    if (B.cols() > 0) {
      EXPECT_LE((A * B).norm(), 1e-10 * std::max(1.0, A.norm()));
      EXPECT_TRUE((B.transpose() * B).isApprox(Matrix::Identity(B.cols(), B.cols()), 1e-12));
    }
  }
}

GTEST_TEST(RankTest, BasicCases) {
  Matrix E = Matrix::Zero(2, 2);
  E(0, 0) = 1;
  EXPECT_EQ(rank(E), 1);
  EXPECT_EQ(rank(Matrix::Zero(3, 4)), 0);
  Matrix EC(2, 4);  // [E C] with both second rows zero
  EC << 1, 0, 0.4, 0.2, 0, 0, 0, 0;
  EXPECT_EQ(rank(EC), 1);
}

GTEST_TEST(EigSymTest, KnownAndTraceIdentity) {
  Matrix D = Vector::LinSpaced(3, 1, 3).asDiagonal();
  Matrix S(3, 3);
  S << 3, 0, 0, 0, 1, 0, 0, 0, 2;
  Vector ev = eig_sym(S);
  EXPECT_NEAR(ev(0), 1, 1e-12);
  EXPECT_NEAR(ev(1), 2, 1e-12);
  EXPECT_NEAR(ev(2), 3, 1e-12);
  Matrix flip(2, 2);
  flip << 0, 1, 1, 0;
  Vector ef = eig_sym(flip);
  EXPECT_NEAR(ef(0), -1, 1e-12);
  EXPECT_NEAR(ef(1), 1, 1e-12);
  std::mt19937_64 g(8);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix R = RandomSymmetric(&g, 4);
    EXPECT_NEAR(eig_sym(R).sum(), R.trace(), 1e-10 * std::max(1.0, R.norm()));
  }
}

GTEST_TEST(EigGeneralTest, RotationTriangularAndSpectrum) {
  Matrix J(2, 2);
  J << 0, -1, 1, 0;
  Spectrum sp = eig_general(J);
  EXPECT_NEAR(sp.abscissa, 0.0, 1e-12);
  EXPECT_NEAR(sp.radius, 1.0, 1e-12);

  Matrix T(3, 3);
  T << -2, 5, 1, 0, -1, 7, 0, 0, 3;
  Spectrum st = eig_general(T);
  EXPECT_NEAR(st.abscissa, 3.0, 1e-10);

  Matrix L(2, 2);
  L << -2.6624, 0.5, 0.6, -1.2;
  Spectrum sl = eig_general(L);
  EXPECT_NEAR(sl.abscissa, -1.0176063, 1e-6);
}

GTEST_TEST(PencilDegreeTest, FullRankDeficientAndImpulsive) {
  std::mt19937_64 g(9);
  Matrix A = RandomMatrix(&g, 2, 2);
  EXPECT_EQ(pencil_degree(Matrix::Identity(2, 2), A).value(), 2);

  // det(s*diag(1,0) - A1) = -0.5 s - 0.53 for the first fixture drift.
  Matrix E = Matrix::Zero(2, 2);
  E(0, 0) = 1;
  Matrix A1(2, 2);
  A1 << -0.5, 0.7, 0.4, 0.5;
  EXPECT_EQ(pencil_degree(E, A1).value(), 1);

  Matrix Enil(2, 2);
  Enil << 0, 1, 0, 0;
  EXPECT_EQ(pencil_degree(Enil, Matrix::Identity(2, 2)).value(), 0);

  // Zero row in both E and A: det identically zero, non-regular.
  Matrix Ez = Matrix::Zero(2, 2), Az = Matrix::Zero(2, 2);
  Ez(0, 0) = 1;
  Az(0, 0) = -3;
  EXPECT_FALSE(pencil_degree(Ez, Az).has_value());
}

GTEST_TEST(PencilDegreeTest, InvariantUnderEquivalence) {
  std::mt19937_64 g(10);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + trial % 2;
    int r = 1 + trial % n;
    Matrix E = Matrix::Zero(n, n);
    E.topLeftCorner(r, r) = Matrix::Identity(r, r);
    Matrix A = RandomMatrix(&g, n, n) + 2 * Matrix::Identity(n, n);
    Matrix P = RandomMatrix(&g, n, n) + 3 * Matrix::Identity(n, n);
    Matrix Q = RandomMatrix(&g, n, n) + 3 * Matrix::Identity(n, n);
    auto d0 = pencil_degree(E, A);
    auto d1 = pencil_degree(P * E * Q, P * A * Q);
    ASSERT_TRUE(d0.has_value());
    ASSERT_TRUE(d1.has_value());
    EXPECT_EQ(*d0, *d1);
  }
}

GTEST_TEST(ExpmTest, ScalarAndNilpotent) {
  Matrix a(1, 1);
  a << -0.7;
  EXPECT_NEAR(expm(a * 2.0)(0, 0), std::exp(-1.4), 1e-12);
  Matrix Nl = Matrix::Zero(2, 2);
  Nl(0, 1) = 3;
  Matrix X = expm(Nl);
  EXPECT_NEAR(X(0, 0), 1, 1e-14);
  EXPECT_NEAR(X(0, 1), 3, 1e-14);
  EXPECT_NEAR(X(1, 1), 1, 1e-14);
}

}  // namespace
}  // namespace msadm
