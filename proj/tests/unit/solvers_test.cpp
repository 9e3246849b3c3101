#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace srnet;
using namespace srnet::testing;

namespace {

SolverConfig tight()
{
    SolverConfig c;
    c.tolerance = 1e-12;
    c.max_sweeps = 100000;
    return c;
}

} // namespace

TEST(WeightedLasso, PenaltyFreeOrthonormalDesignIsLeastSquares)
{
    std::mt19937_64 rng(7);
    const Matrix Q = random_matrix(rng, 6, 3).householderQr().householderQ() * Matrix::Identity(6, 3);
    const Vector y = random_matrix(rng, 6, 1);
    PenaltyWeights w{Vector::Zero(3), 0.0};
    const Vector beta = weighted_lasso_cd(MaskedVector::dense(y), Q, w, Vector::Zero(3), tight());
    EXPECT_LT((beta - Q.transpose() * y).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(WeightedLasso, SingleColumnSoftThresholdMatchesGridOracle)
{
    // x'x = 1, x'y = 3, w = 2.
    Matrix X(1, 1);
    X << 1.0;
    Vector y(1);
    y << 3.0;
    PenaltyWeights w{Vector::Constant(1, 2.0), 0.0};
    const auto my = MaskedVector::dense(y);

    // 1-D grid search over [-5, 5] at step 1e-4.
    double best = 0.0;
    double fbest = lasso_objective(my, X, w, Vector::Zero(1));
    for (int k = -50000; k <= 50000; ++k) {
        Vector b(1);
        b << k * 1e-4;
        const double f = lasso_objective(my, X, w, b);
        if (f < fbest) {
            fbest = f;
            best = b(0);
        }
    }
    EXPECT_NEAR(best, 2.0, 1e-4);

    const Vector beta = weighted_lasso_cd(my, X, w, Vector::Zero(1), tight());
    EXPECT_NEAR(beta(0), 2.0, 1e-12);
}

TEST(WeightedLasso, ForcedZeroIsExactlyZero)
{
    std::mt19937_64 rng(3);
    const Matrix X = random_matrix(rng, 10, 4);
    const Vector y = random_matrix(rng, 10, 1) * 5.0;
    PenaltyWeights w{Vector::Zero(4), 0.0};
    w.l1(2) = kForcedZero;
    Vector start = Vector::Constant(4, 3.0);
    const Vector beta = weighted_lasso_cd(MaskedVector::dense(y), X, w, start, tight());
    EXPECT_EQ(beta(2), 0.0);
    EXPECT_NE(beta(0), 0.0);
}

TEST(WeightedLasso, MissingRowsAreIgnored)
{
    std::mt19937_64 rng(5);
    const Matrix X = random_matrix(rng, 12, 3);
    Vector y = random_matrix(rng, 12, 1);
    MaskedVector my = MaskedVector::dense(y);
    my.observed(4) = false;
    my.observed(9) = false;
    PenaltyWeights w{Vector::Constant(3, 0.5), 0.1};
    const Vector a = weighted_lasso_cd(my, X, w, Vector::Zero(3), tight());
    my.values(4) = 1e6;
    my.values(9) = std::numeric_limits<double>::quiet_NaN();
    const Vector b = weighted_lasso_cd(my, X, w, Vector::Zero(3), tight());
    EXPECT_EQ(a, b);
}

TEST(WeightedLasso, Errors)
{
    Matrix X = Matrix::Ones(3, 2);
    MaskedVector y = MaskedVector::dense(Vector::Ones(3));
    PenaltyWeights w{Vector::Zero(2), 0.0};
    y.observed.setConstant(false);
    try {
        weighted_lasso_cd(y, X, w, Vector::Zero(2), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyObservedSet);
    }
    y.observed.setConstant(true);
    X(1, 1) = std::numeric_limits<double>::infinity();
    try {
        weighted_lasso_cd(y, X, w, Vector::Zero(2), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonFiniteInput);
    }
}

TEST(WeightedLasso, KktHoldsOnRandomInstances)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 3 + static_cast<Index>(u(rng) * 20);
        const Index p = 1 + static_cast<Index>(u(rng) * 8);
        const Matrix X = random_matrix(rng, n, p);
        MaskedVector y = MaskedVector::dense(random_matrix(rng, n, 1) * 3.0);
        for (Index i = 1; i < n; ++i) {
            y.observed(i) = u(rng) > 0.2;
        }
        PenaltyWeights w;
        w.l1.resize(p);
        for (Index j = 0; j < p; ++j) {
            w.l1(j) = u(rng) < 0.1 ? kForcedZero : (u(rng) < 0.2 ? 0.0 : 4.0 * u(rng));
        }
        w.ridge = u(rng) < 0.5 ? 0.0 : u(rng);
        const Vector beta = weighted_lasso_cd(y, X, w, random_matrix(rng, p, 1), tight());
        EXPECT_TRUE(lasso_kkt(y, X, w, beta, 1e-6)) << "trial " << trial;
    }
}

TEST(WeightedLasso, ObjectiveNonIncreasingAcrossSweeps)
{
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix X = random_matrix(rng, 15, 6);
        const auto y = MaskedVector::dense(random_matrix(rng, 15, 1) * 2.0);
        PenaltyWeights w{Vector::Constant(6, 1.5), 0.2};
        const Vector start = random_matrix(rng, 6, 1);
        const Matrix gram = X.transpose() * X;
        const Vector xty = X.transpose() * y.values;
        double prev = lasso_objective(y, X, w, start);
        for (int sweeps = 1; sweeps <= 40; ++sweeps) {
            SolverConfig c;
            c.tolerance = 1e-300;
            c.max_sweeps = sweeps;
            const Vector b = lasso_cd_gram(gram, xty, w.l1, w.ridge, start, c).coef;
            const double f = lasso_objective(y, X, w, b);
            EXPECT_LE(f, prev + 1e-10 * std::abs(prev));
            prev = f;
        }
    }
}

TEST(WeightedLasso, RidgeMakesSolutionUniqueAcrossStarts)
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        // More columns than rows: only the ridge makes this strictly convex.
        const Matrix X = random_matrix(rng, 4, 7);
        const auto y = MaskedVector::dense(random_matrix(rng, 4, 1));
        PenaltyWeights w{Vector::Constant(7, 0.3), 0.5};
        const Vector a = weighted_lasso_cd(y, X, w, random_matrix(rng, 7, 1) * 5.0, tight());
        const Vector b = weighted_lasso_cd(y, X, w, random_matrix(rng, 7, 1) * 5.0, tight());
        EXPECT_LT((a - b).norm(), 1e-6);
    }
}

TEST(GroupBlock, PenaltyFreeIsLeastSquares)
{
    std::mt19937_64 rng(19);
    const Matrix A = random_matrix(rng, 9, 2);
    const Matrix R = random_matrix(rng, 9, 5);
    Mask obs = random_mask(rng, 9, 5, 0.2);
    obs.row(0).setConstant(true);
    const auto groups = GroupPartition::blocks({2, 3});
    const RowVector row = group_block_solve(R, obs, A, 1, groups, 0.0, {});
    for (Index t = 0; t < 5; ++t) {
        double num = 0.0, den = 0.0;
        for (Index i = 0; i < 9; ++i) {
            if (obs(i, t)) {
                num += A(i, 1) * R(i, t);
                den += A(i, 1) * A(i, 1);
            }
        }
        EXPECT_NEAR(row(t), num / den, 1e-12);
    }
}

TEST(GroupBlock, OrthonormalSingleGroupClosedForm)
{
    // Unit-norm single column: z = a'R per experiment.
    Matrix A(2, 1);
    A << 0.6, 0.8;
    const auto groups = GroupPartition::single(3);
    const Mask obs = Mask::Constant(2, 3, true);

    RowVector z(3);
    z << 0.1, -0.2, 0.2;
    z *= 0.3 / z.norm();
    Matrix R = A * z;
    EXPECT_TRUE(group_block_solve(R, obs, A, 0, groups, 1.0, {}).isZero(0.0));

    z *= 2.0 / z.norm();
    R = A * z;
    const RowVector got = group_block_solve(R, obs, A, 0, groups, 1.0, {});
    EXPECT_LT((got - 0.75 * z).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((got - block_soft_threshold(z, 1.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GroupBlock, ClosedFormCrossCheckedByRandomDirections)
{
    // The block objective |p|^2 - 2 z'p + gamma |p| (unit curvature) is
    // evaluated along random directions around the closed-form minimizer.
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const RowVector z = random_matrix(rng, 1, 4);
        const double gamma = 1.5;
        const RowVector star = block_soft_threshold(z, gamma);
        auto f = [&](const RowVector& p) { return p.squaredNorm() - 2.0 * z.dot(p) + gamma * p.norm(); };
        const double fstar = f(star);
        for (int d = 0; d < 200; ++d) {
            RowVector dir = random_matrix(rng, 1, 4);
            dir.normalize();
            for (double h : {1e-3, 1e-2, 1e-1}) {
                EXPECT_GE(f(star + h * dir), fstar - 1e-12);
            }
        }
    }
}

TEST(GroupBlock, StationarityWithMissingData)
{
    std::mt19937_64 rng(29);
    const auto groups = GroupPartition::blocks({3, 2, 4});
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix A = random_matrix(rng, 12, 3);
        const Matrix R = random_matrix(rng, 12, 9) * 2.0;
        Mask obs = random_mask(rng, 12, 9, 0.25);
        obs.row(0).setConstant(true);
        const double gamma = 4.0;
        const RowVector p = group_block_solve(R, obs, A, 1, groups, gamma, {});
        // Smooth gradient per experiment: 2 (d_t p_t - z_t).
        RowVector grad(9);
        for (Index t = 0; t < 9; ++t) {
            double d = 0.0, z = 0.0;
            for (Index i = 0; i < 12; ++i) {
                if (obs(i, t)) {
                    d += A(i, 1) * A(i, 1);
                    z += A(i, 1) * R(i, t);
                }
            }
            grad(t) = 2.0 * (d * p(t) - z);
        }
        for (int k = 0; k < groups.group_count(); ++k) {
            double bn = 0.0, gn = 0.0;
            for (Index t : groups.members(k)) {
                bn += p(t) * p(t);
                gn += grad(t) * grad(t);
            }
            bn = std::sqrt(bn);
            gn = std::sqrt(gn);
            if (bn == 0.0) {
                EXPECT_LE(gn, gamma + 1e-9);
            } else {
                for (Index t : groups.members(k)) {
                    EXPECT_NEAR(grad(t) + gamma * p(t) / bn, 0.0, 1e-9);
                }
            }
        }
    }
}

TEST(GroupBlock, SingletonGroupsMatchUnitWeightLasso)
{
    std::mt19937_64 rng(31);
    const Index n = 7, T = 5;
    const Matrix A = random_matrix(rng, n, 1);
    const Matrix R = random_matrix(rng, n, T) * 2.0;
    Mask obs = random_mask(rng, n, T, 0.2);
    obs.row(0).setConstant(true);
    const RowVector grouped = group_block_solve(R, obs, A, 0, GroupPartition::singletons(T), 1.0, tight());

    // The same row as one lasso: response vec(R), block-diagonal design.
    Matrix X = Matrix::Zero(n * T, T);
    MaskedVector y;
    y.values.resize(n * T);
    y.observed.resize(n * T);
    for (Index t = 0; t < T; ++t) {
        for (Index i = 0; i < n; ++i) {
            X(t * n + i, t) = A(i, 0);
            y.values(t * n + i) = R(i, t);
            y.observed(t * n + i) = obs(i, t);
        }
    }
    const Vector lasso = weighted_lasso_cd(y, X, {Vector::Ones(T), 0.0}, Vector::Zero(T), tight());
    EXPECT_LT((grouped.transpose() - lasso).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GroupBlock, EmptyObservedColumnIsAnError)
{
    const Matrix A = Matrix::Zero(3, 1);
    const Matrix R = Matrix::Ones(3, 2);
    const Mask obs = Mask::Constant(3, 2, true);
    try {
        group_block_solve(R, obs, A, 0, GroupPartition::single(2), 1.0, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyObservedSet);
    }
}

TEST(Refit, EmptySupportGivesZero)
{
    std::mt19937_64 rng(37);
    const ExpressionMatrix E = ExpressionMatrix::dense(random_matrix(rng, 4, 3));
    const Matrix P = random_matrix(rng, 2, 3);
    const RefitResult r = masked_least_squares_refit(E, Mask::Constant(4, 2, false), P);
    EXPECT_TRUE(r.strengths.isZero(0.0));
}

TEST(Refit, ScalarNormalEquation)
{
    Matrix e(1, 2);
    e << 2.0, 4.0;
    Matrix P(1, 2);
    P << 1.0, 2.0;
    const RefitResult r = masked_least_squares_refit(ExpressionMatrix::dense(e), Mask::Constant(1, 1, true), P);
    EXPECT_NEAR(r.strengths(0, 0), 2.0, 1e-14);
}

TEST(Refit, MatchesNormalEquationOracle)
{
    std::mt19937_64 rng(41);
    const ExpressionMatrix E = ExpressionMatrix::dense(random_matrix(rng, 10, 8));
    const Matrix P = random_matrix(rng, 4, 8);
    const RefitResult r = masked_least_squares_refit(E, Mask::Constant(10, 4, true), P);
    const Matrix G = P * P.transpose();
    for (Index i = 0; i < 10; ++i) {
        const Vector oracle = G.ldlt().solve(P * E.values.row(i).transpose());
        EXPECT_LT((r.strengths.row(i).transpose() - oracle).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Refit, RespectsSupportAndMissingness)
{
    std::mt19937_64 rng(43);
    ExpressionMatrix E = ExpressionMatrix::dense(random_matrix(rng, 6, 7));
    E.observed(2, 3) = false;
    E.observed.row(5).setConstant(false);
    const Matrix P = random_matrix(rng, 3, 7);
    Mask support = random_mask(rng, 6, 3, 0.5);
    const RefitResult r = masked_least_squares_refit(E, support, P);
    for (Index i = 0; i < 6; ++i) {
        for (Index j = 0; j < 3; ++j) {
            if (!support(i, j)) {
                EXPECT_EQ(r.strengths(i, j), 0.0);
            }
        }
    }
    ASSERT_EQ(r.empty_rows.size(), 1u);
    EXPECT_EQ(r.empty_rows[0], 5);
    EXPECT_TRUE(r.strengths.row(5).isZero(0.0));
}

TEST(Refit, RankDeficientUsesMinimumNorm)
{
    // Two identical activity rows: the minimum-norm split is even.
    Matrix P(2, 3);
    P << 1, 2, 3, 1, 2, 3;
    Matrix e(1, 3);
    e << 2, 4, 6;
    const RefitResult r = masked_least_squares_refit(ExpressionMatrix::dense(e), Mask::Constant(1, 2, true), P);
    EXPECT_NEAR(r.strengths(0, 0), 1.0, 1e-10);
    EXPECT_NEAR(r.strengths(0, 1), 1.0, 1e-10);
}
