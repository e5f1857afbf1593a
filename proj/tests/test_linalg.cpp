#include <gtest/gtest.h>

#include <cmath>

#include "hardproj/linalg.hpp"
#include "oracles.hpp"

using namespace hardproj;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    Rng rng(1);
    const Mat m = oracle::random_mat(rng, 3, 4);
    EXPECT_EQ(matmul(Mat::identity(3), m), m);
}

TEST(Matmul, HandComputed) {
    const Mat r = matmul(Mat{{1, 2}, {3, 4}}, Mat{{0}, {1}});
    EXPECT_EQ(r, (Mat{{2}, {4}}));
}

TEST(Matmul, MatchesTripleLoop) {
    Rng rng(7);
    const Mat a = oracle::random_mat(rng, 5, 7), b = oracle::random_mat(rng, 7, 3);
    const Mat got = matmul(a, b), want = oracle::naive_matmul(a, b);
    ASSERT_EQ(got.rows(), 5u);
    ASSERT_EQ(got.cols(), 3u);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_LT(std::abs(got.data()[i] - want.data()[i]), 1e-13);
}

TEST(Matmul, ShapeMismatchThrows) { EXPECT_THROW(matmul(Mat(2, 3), Mat(2, 3)), ShapeError); }

TEST(Mat, RejectsNonFiniteUserData) {
    EXPECT_THROW(Mat::from_data(1, 2, {1.0, NAN}), NumericalError);
    EXPECT_THROW(Mat::from_data(1, 2, {1.0}), ShapeError);
}

TEST(SpdSolve, IdentityReturnsRhs) {
    Rng rng(3);
    const Mat r = oracle::random_mat(rng, 4, 2);
    EXPECT_EQ(spd_solve(Mat::identity(4), r), r);
}

TEST(SpdSolve, Diagonal) {
    const Mat x = spd_solve(Mat{{4, 0}, {0, 9}}, Mat::identity(2));
    EXPECT_DOUBLE_EQ(x(0, 0), 0.25);
    EXPECT_DOUBLE_EQ(x(1, 1), 1.0 / 9.0);
    EXPECT_EQ(x(0, 1), 0.0);
    EXPECT_EQ(x(1, 0), 0.0);
}

TEST(SpdSolve, InverseOfGramMatchesGaussianElimination) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat b = oracle::random_mat(rng, 4, 9);
        const Mat g = gram_rows(b);
        const Mat got = spd_solve(g, Mat::identity(4));
        const Mat want = oracle::gauss_solve(g, Mat::identity(4));
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_LT(std::abs(got.data()[i] - want.data()[i]), 1e-10);
    }
}

TEST(SpdSolve, RankDeficiencyNamesPivot) {
    // rows 0 and 1 identical: the second pivot vanishes
    const Mat b{{1, 2, 3}, {1, 2, 3}};
    try {
        spd_solve(gram_rows(b), Mat::identity(2));
        FAIL() << "expected RankDeficiencyError";
    } catch (const RankDeficiencyError& e) {
        EXPECT_EQ(e.pivot(), 1u);
        EXPECT_FALSE(e.has_instance());
    }
}

TEST(SpdSolve, RejectsNonSymmetric) { EXPECT_THROW(spd_solve(Mat{{2, 1}, {0, 2}}, Mat::identity(2)), NumericalError); }

TEST(SpdSolve, ShapeErrors) {
    EXPECT_THROW(spd_solve(Mat(2, 3), Mat(2, 1)), ShapeError);
    EXPECT_THROW(spd_solve(Mat::identity(2), Mat(3, 1)), ShapeError);
}

// Q diag(1, ..., 1e-6) Qᵀ with a random orthogonal Q (Gram-Schmidt).
static Mat spd_with_condition(Rng& rng, std::size_t n, double cond) {
    Mat q = oracle::random_mat(rng, n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double d = 0.0;
            for (std::size_t k = 0; k < n; ++k) d += q(i, k) * q(j, k);
            for (std::size_t k = 0; k < n; ++k) q(i, k) -= d * q(j, k);
        }
        double nrm = 0.0;
        for (std::size_t k = 0; k < n; ++k) nrm += q(i, k) * q(i, k);
        nrm = std::sqrt(nrm);
        for (std::size_t k = 0; k < n; ++k) q(i, k) /= nrm;
    }
    Mat m(n, n);
    for (std::size_t e = 0; e < n; ++e) {
        const double lambda = std::pow(cond, -static_cast<double>(e) / static_cast<double>(n - 1));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m(i, j) += lambda * q(e, i) * q(e, j);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) m(j, i) = m(i, j);
    return m;
}

TEST(SpdSolve, RelativeResidualUpToConditionMillion) {
    Rng rng(5);
    for (double cond : {1.0, 1e2, 1e4, 1e6}) {
        for (int trial = 0; trial < 20; ++trial) {
            const Mat m = spd_with_condition(rng, 5, cond);
            const Mat rhs = oracle::random_mat(rng, 5, 3);
            const Mat x = spd_solve(m, rhs);
            const Mat res = oracle::naive_matmul(m, x);
            double num = 0.0;
            for (std::size_t i = 0; i < res.size(); ++i) num = std::max(num, std::abs(res.data()[i] - rhs.data()[i]));
            EXPECT_LT(num / max_abs(rhs.data()), 1e-10) << "cond " << cond;
        }
    }
}

TEST(SpdSolve, ProjectorOntoRowSpaceIsSymmetricIdempotent) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat b = oracle::random_mat(rng, 3, 8);
        const Mat p = matmul(transpose(b), spd_solve(gram_rows(b), b));
        const Mat pp = matmul(p, p);
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                EXPECT_LT(std::abs(p(i, j) - p(j, i)), 1e-10);
                EXPECT_LT(std::abs(pp(i, j) - p(i, j)), 1e-9);
            }
    }
}

static BatchMat random_spd_batch(Rng& rng, std::size_t batch, std::size_t n) {
    BatchMat m(batch, n, n);
    for (std::size_t b = 0; b < batch; ++b) m.set(b, gram_rows(oracle::random_mat(rng, n, n + 3)));
    return m;
}

TEST(BatchSpdSolve, IdenticalInstancesGiveIdenticalSolutions) {
    Rng rng(2);
    const Mat g = gram_rows(oracle::random_mat(rng, 4, 6));
    const Mat r = oracle::random_mat(rng, 4, 2);
    BatchMat m(6, 4, 4), rhs(6, 4, 2);
    for (std::size_t b = 0; b < 6; ++b) {
        m.set(b, g);
        rhs.set(b, r);
    }
    const BatchMat x = batch_spd_solve(m, rhs);
    for (std::size_t b = 1; b < 6; ++b) EXPECT_EQ(x.get(b), x.get(0));
}

TEST(BatchSpdSolve, SingleInstanceBitwiseEqualsUnbatched) {
    Rng rng(4);
    const BatchMat m = random_spd_batch(rng, 1, 5);
    BatchMat rhs(1, 5, 3);
    rhs.set(0, oracle::random_mat(rng, 5, 3));
    EXPECT_EQ(batch_spd_solve(m, rhs).get(0), spd_solve(m.get(0), rhs.get(0)));
}

TEST(BatchSpdSolve, MatchesSequentialLoopExactly) {
    Rng rng(6);
    const BatchMat m = random_spd_batch(rng, 64, 5);
    BatchMat rhs(64, 5, 5);
    for (std::size_t b = 0; b < 64; ++b) rhs.set(b, oracle::random_mat(rng, 5, 5));
    const BatchMat x = batch_spd_solve(m, rhs);
    for (std::size_t b = 0; b < 64; ++b) EXPECT_EQ(x.get(b), spd_solve(m.get(b), rhs.get(b))) << "instance " << b;
}

TEST(BatchSpdSolve, ReportsSingularInstance) {
    Rng rng(8);
    BatchMat m = random_spd_batch(rng, 5, 3);
    m.set(3, gram_rows(Mat{{1, 1, 0, 0}, {2, 2, 0, 0}, {0, 0, 1, 0}}));
    try {
        batch_spd_solve(m, BatchMat(5, 3, 1, 1.0));
        FAIL() << "expected RankDeficiencyError";
    } catch (const RankDeficiencyError& e) {
        EXPECT_EQ(e.instance(), 3u);
        EXPECT_EQ(e.pivot(), 1u);
    }
}
