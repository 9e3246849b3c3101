#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace srnet;
using namespace srnet::testing;

namespace {

Index count(const Mask& m) { return static_cast<Index>(m.count()); }

double support_f1(const Matrix& est, const Matrix& truth, const Matrix& pi)
{
    double tp = 0, fp = 0, fn = 0;
    for (Index c = 0; c < est.size(); ++c) {
        if (pi(c) == 0.0) {
            continue;
        }
        const bool e = est(c) != 0.0;
        const bool t = truth(c) != 0.0;
        tp += e && t;
        fp += e && !t;
        fn += !e && t;
    }
    return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

} // namespace

TEST(Folds, FullyObservedFourByFourSplitsInHalf)
{
    const ExpressionMatrix E = ExpressionMatrix::dense(Matrix::Ones(4, 4));
    CvPlan plan;
    plan.n_folds = 2;
    plan.seed = 3;
    const auto folds = make_folds(E, plan);
    ASSERT_EQ(folds.size(), 2u);
    EXPECT_EQ(count(folds[0].test), 8);
    EXPECT_EQ(count(folds[1].test), 8);
    EXPECT_EQ(count(folds[0].test || folds[1].test), 16);
    EXPECT_EQ(count(folds[0].test && folds[1].test), 0);
    for (const auto& f : folds) {
        EXPECT_TRUE((f.train == (E.observed && !f.test)).all());
    }
}

TEST(Folds, BalancedAndDeterministic)
{
    Matrix v = Matrix::Ones(6, 6);
    ExpressionMatrix E = ExpressionMatrix::dense(v);
    for (Index k = 0; k < 6; ++k) {
        E.observed(k, (k + 1) % 6) = false;
    }
    ASSERT_EQ(count(E.observed), 30);
    CvPlan plan;
    plan.n_folds = 3;
    plan.seed = 11;
    const auto a = make_folds(E, plan);
    for (const auto& f : a) {
        EXPECT_EQ(count(f.test), 10);
        EXPECT_EQ(count(f.test && !E.observed), 0);
        for (Index i = 0; i < 6; ++i) {
            EXPECT_TRUE(f.train.row(i).any());
            EXPECT_TRUE(f.train.col(i).any());
        }
    }
    const auto b = make_folds(E, plan);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_TRUE((a[k].test == b[k].test).all());
    }
    plan.seed = 12;
    const auto c = make_folds(E, plan);
    EXPECT_FALSE((a[0].test == c[0].test).all());
}

TEST(Folds, InfeasibleWhenARowHasOneEntry)
{
    ExpressionMatrix E = ExpressionMatrix::dense(Matrix::Ones(3, 4));
    E.observed.row(1).setConstant(false);
    E.observed(1, 2) = true;
    CvPlan plan;
    plan.n_folds = 2;
    try {
        make_folds(E, plan);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InfeasibleFolds);
    }
}

TEST(RelaxedCv, HeldOutEntriesDoNotInfluenceTheFit)
{
    const Planted pl = planted_instance(21, 10, 3, 8);
    CvPlan plan;
    plan.n_folds = 4;
    plan.seed = 2;
    const auto folds = make_folds(pl.E, plan);
    FitConfig cfg;
    cfg.lambda1 = 0.2;
    cfg.lambda2 = 0.1;

    ExpressionMatrix train = pl.E;
    train.observed = folds[0].train;
    const FitResult a = fit_alternating(train, pl.pi, GroupPartition::single(8), cfg);

    ExpressionMatrix perturbed = pl.E;
    Index hi = -1, ht = -1;
    for (Index t = 0; t < 8 && hi < 0; ++t) {
        for (Index i = 0; i < 10; ++i) {
            if (folds[0].test(i, t)) {
                hi = i;
                ht = t;
                break;
            }
        }
    }
    perturbed.values(hi, ht) += 100.0;
    train = perturbed;
    train.observed = folds[0].train;
    const FitResult b = fit_alternating(train, pl.pi, GroupPartition::single(8), cfg);
    EXPECT_EQ(a.A, b.A);
    EXPECT_EQ(a.P, b.P);

    // Only the perturbed entry's residual moves.
    const double ea = relaxed_fold_error(pl.E, folds[0], a);
    const double eb = relaxed_fold_error(perturbed, folds[0], b);
    const double m = static_cast<double>(count(folds[0].test));
    const RefitResult refit = masked_least_squares_refit(train, a.A.array() != 0.0, a.P);
    const double fitted = (refit.strengths * a.P)(hi, ht);
    const double r0 = pl.E.values(hi, ht) - fitted;
    const double r1 = perturbed.values(hi, ht) - fitted;
    EXPECT_NEAR(eb - ea, (r1 * r1 - r0 * r0) / m, 1e-9 * (1.0 + eb));
}

TEST(RelaxedCv, RefitKeepsZeroPattern)
{
    const Planted pl = planted_instance(22, 10, 3, 8);
    FitConfig cfg;
    cfg.lambda1 = 5.0;
    cfg.lambda2 = 0.1;
    Matrix pi = Matrix::Constant(10, 3, 0.5);
    const FitResult fit = fit_alternating(pl.E, pi, GroupPartition::single(8), cfg);
    const Mask support = fit.A.array() != 0.0;
    const RefitResult r = masked_least_squares_refit(pl.E, support, fit.P);
    for (Index c = 0; c < r.strengths.size(); ++c) {
        if (!support(c)) {
            EXPECT_EQ(r.strengths(c), 0.0);
        }
    }
}

TEST(RelaxedCv, SingletonGridReturnsThePoint)
{
    const Planted pl = planted_instance(23, 10, 3, 8);
    CvPlan plan;
    plan.n_folds = 3;
    FitConfig cfg;
    const CvOutcome out = relaxed_cv(pl.E, pl.pi, GroupPartition::single(8), {{0.7, 0.3}}, plan, cfg);
    ASSERT_EQ(out.table.size(), 1u);
    EXPECT_EQ(out.selected, (GridPoint{0.7, 0.3}));
    EXPECT_GE(out.table[0].mean_cv_error, 0.0);
    EXPECT_GE(out.table[0].std_error, 0.0);
}

TEST(RelaxedCv, TableIsDeterministicAcrossThreadCounts)
{
    const Planted pl = planted_instance(24, 10, 3, 8);
    CvPlan plan;
    plan.n_folds = 3;
    FitConfig cfg;
    const auto grid = make_grid({0.1, 1.0}, {0.1, 1.0});
    const CvOutcome a = relaxed_cv(pl.E, pl.pi, GroupPartition::single(8), grid, plan, cfg, 1);
    const CvOutcome b = relaxed_cv(pl.E, pl.pi, GroupPartition::single(8), grid, plan, cfg, 3);
    ASSERT_EQ(a.table.size(), 4u);
    for (std::size_t g = 0; g < 4; ++g) {
        EXPECT_EQ(a.table[g].mean_cv_error, b.table[g].mean_cv_error);
        EXPECT_EQ(a.table[g].lambda1, grid[g].lambda1);
        EXPECT_EQ(a.table[g].lambda2, grid[g].lambda2);
    }
    EXPECT_EQ(a.selected, b.selected);
}

TEST(RelaxedCv, SelectionBeatsExtremeCornersOnSupportRecovery)
{
    PlantSpec spec;
    spec.genes = 100;
    spec.factors = 4;
    spec.group_sizes = {20, 20};
    spec.density = 0.15;
    spec.documented_fraction = 0.1;
    spec.group_activity = 1.0;
    spec.seed = 4;
    const PlantedBase base = plant_base(spec);
    SimConfig sim;
    sim.s_A = 0.0;
    sim.s_P = 0.0;
    sim.s_N = 0.3;
    sim.rho = 0.6;
    sim.seed = 5;
    const SimulatedDataset data = simulate_dataset(base.A, base.P, base.pi, sim);
    const Matrix pi_tilde = shrink_prior(data.pi.probs, 1.0);

    FitConfig cfg;
    cfg.n_restarts = 2;
    CvPlan plan;
    plan.seed = 7;
    const std::vector<double> values{1e-3, 1.0, 1e3};
    const auto grid = make_grid(values, values);
    const CvOutcome out = relaxed_cv(data.E, pi_tilde, base.groups, grid, plan, cfg);

    auto f1_at = [&](const GridPoint& g) {
        FitConfig c = cfg;
        c.lambda1 = g.lambda1;
        c.lambda2 = g.lambda2;
        const FitResult fit = fit_best(data.E, pi_tilde, base.groups, c);
        return support_f1(fit.A, data.A_true, data.pi.probs);
    };
    const double selected = f1_at(out.selected);
    EXPECT_GT(selected, f1_at({1e-3, 1e-3}));
    EXPECT_GT(selected, f1_at({1e3, 1e3}));
}
