#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "core.hpp"
#include "data.hpp"
#include "model.hpp"
#include "solvers.hpp"

namespace srnet {

enum class CvScheme { Speckled };

struct CvPlan {
    int n_folds = 5;
    CvScheme scheme = CvScheme::Speckled;
    std::uint64_t seed = 0;
    int max_retries = 100;

    void validate() const
    {
        require(n_folds >= 2, ErrorKind::InvalidArgument, "n_folds must be >= 2");
        require(max_retries >= 1, ErrorKind::InvalidArgument, "max_retries must be >= 1");
    }
};

struct Fold {
    Mask train;
    Mask test;
};

struct GridPoint {
    double lambda1 = 0.0;
    double lambda2 = 0.0;

    friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct CvRow {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double mean_cv_error = 0.0;
    double std_error = 0.0;
};

using CvTable = std::vector<CvRow>;

struct CvOutcome {
    CvTable table;
    GridPoint selected;
};

/// Cartesian product of two lambda lists, lambda1 major.
inline std::vector<GridPoint> make_grid(const std::vector<double>& lambda1s, const std::vector<double>& lambda2s)
{
    std::vector<GridPoint> grid;
    for (double l1 : lambda1s) {
        for (double l2 : lambda2s) {
            grid.push_back({l1, l2});
        }
    }
    return grid;
}

/**
 * Speckled folds: the observed entries are shuffled and dealt round-robin,
 * so fold sizes differ by at most one. A draw is rejected (and redrawn up to
 * max_retries times) if some fold would leave a gene row or an experiment
 * column without training entries.
 */
inline std::vector<Fold> make_folds(const ExpressionMatrix& E, const CvPlan& plan)
{
    plan.validate();
    const Index n = E.genes();
    const Index T = E.experiments();
    std::vector<std::pair<Index, Index>> cells;
    for (Index t = 0; t < T; ++t) {
        for (Index i = 0; i < n; ++i) {
            if (E.observed(i, t)) {
                cells.emplace_back(i, t);
            }
        }
    }
    require(cells.size() >= static_cast<std::size_t>(plan.n_folds), ErrorKind::InfeasibleFolds,
            "fewer observed entries than folds");

    std::mt19937_64 rng(plan.seed);
    for (int attempt = 0; attempt < plan.max_retries; ++attempt) {
        std::vector<std::size_t> order(cells.size());
        for (std::size_t k = 0; k < order.size(); ++k) {
            order[k] = k;
        }
        std::shuffle(order.begin(), order.end(), rng);

        std::vector<Fold> folds(static_cast<std::size_t>(plan.n_folds));
        for (auto& f : folds) {
            f.test = Mask::Constant(n, T, false);
        }
        for (std::size_t k = 0; k < order.size(); ++k) {
            const auto& [i, t] = cells[order[k]];
            folds[k % folds.size()].test(i, t) = true;
        }
        bool feasible = true;
        for (auto& f : folds) {
            f.train = E.observed && !f.test;
            for (Index i = 0; i < n && feasible; ++i) {
                feasible = f.train.row(i).any();
            }
            for (Index t = 0; t < T && feasible; ++t) {
                feasible = f.train.col(t).any();
            }
        }
        if (feasible) {
            return folds;
        }
    }
    throw Error(ErrorKind::InfeasibleFolds, "could not keep training coverage for every row and column after " +
                                                std::to_string(plan.max_retries) + " draws");
}

/// Mean squared error on the test entries of one fold after a least-squares
/// refit of the fitted support with P fixed.
inline double relaxed_fold_error(const ExpressionMatrix& E, const Fold& fold, const FitResult& fit)
{
    ExpressionMatrix train = E;
    train.observed = fold.train;
    const Mask support = (fit.A.array() != 0.0);
    const RefitResult refit = masked_least_squares_refit(train, support, fit.P);
    const Matrix fitted = refit.strengths * fit.P;
    double sse = 0.0;
    Index count = 0;
    for (Index t = 0; t < E.experiments(); ++t) {
        for (Index i = 0; i < E.genes(); ++i) {
            if (fold.test(i, t)) {
                const double r = E.values(i, t) - fitted(i, t);
                sse += r * r;
                ++count;
            }
        }
    }
    return count ? sse / static_cast<double>(count) : 0.0;
}

/**
 * Relaxed cross-validation over a (lambda1, lambda2) grid. For every grid
 * point and fold the model is fitted on the training entries only, the
 * nonzero connections are re-estimated by least squares with P fixed, and
 * the held-out squared error is scored with the refit. The selected point
 * minimizes the mean error; ties go to the larger (lambda1, lambda2).
 */
inline CvOutcome relaxed_cv(const ExpressionMatrix& E, const Matrix& pi_tilde, const GroupPartition& groups,
                            const std::vector<GridPoint>& grid, const CvPlan& plan, const FitConfig& cfg,
                            unsigned threads = 1)
{
    require(!grid.empty(), ErrorKind::EmptyInput, "lambda grid is empty");
    cfg.validate();
    const std::vector<Fold> folds = make_folds(E, plan);
    const std::size_t F = folds.size();

    std::vector<double> errors(grid.size() * F, 0.0);
    parallel_for(grid.size() * F, threads, [&](std::size_t job) {
        const std::size_t g = job / F;
        const std::size_t f = job % F;
        ExpressionMatrix train = E;
        train.observed = folds[f].train;
        FitConfig c = cfg;
        c.lambda1 = grid[g].lambda1;
        c.lambda2 = grid[g].lambda2;
        const FitResult fit = fit_best(train, pi_tilde, groups, c);
        errors[job] = relaxed_fold_error(E, folds[f], fit);
    });

    CvOutcome out;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double mean = 0.0;
        for (std::size_t f = 0; f < F; ++f) {
            mean += errors[g * F + f];
        }
        mean /= static_cast<double>(F);
        double var = 0.0;
        for (std::size_t f = 0; f < F; ++f) {
            const double d = errors[g * F + f] - mean;
            var += d * d;
        }
        var /= static_cast<double>(F - 1);
        out.table.push_back({grid[g].lambda1, grid[g].lambda2, mean, std::sqrt(var / static_cast<double>(F))});
    }

    std::size_t best = 0;
    for (std::size_t g = 1; g < out.table.size(); ++g) {
        const CvRow& cand = out.table[g];
        const CvRow& cur = out.table[best];
        const double tie = 1e-12 * std::max(std::abs(cur.mean_cv_error), std::abs(cand.mean_cv_error));
        if (cand.mean_cv_error < cur.mean_cv_error - tie) {
            best = g;
        } else if (std::abs(cand.mean_cv_error - cur.mean_cv_error) <= tie) {
            if (cand.lambda1 > cur.lambda1 || (cand.lambda1 == cur.lambda1 && cand.lambda2 > cur.lambda2)) {
                best = g;
            }
        }
    }
    out.selected = {out.table[best].lambda1, out.table[best].lambda2};
    return out;
}

} // namespace srnet
