#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <srnet/srnet.hpp>

namespace srnet::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Index r, Index c, double scale = 1.0)
{
    std::normal_distribution<double> nd(0.0, scale);
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i) {
        for (Index j = 0; j < c; ++j) {
            m(i, j) = nd(rng);
        }
    }
    return m;
}

inline Mask random_mask(std::mt19937_64& rng, Index r, Index c, double missing)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mask m(r, c);
    for (Index i = 0; i < r; ++i) {
        for (Index j = 0; j < c; ++j) {
            m(i, j) = u(rng) >= missing;
        }
    }
    return m;
}

/// Lasso objective written out directly from its definition.
inline double lasso_objective(const MaskedVector& y, const Matrix& X, const PenaltyWeights& w, const Vector& beta)
{
    double f = 0.0;
    for (Index i = 0; i < y.values.size(); ++i) {
        if (y.observed(i)) {
            const double r = y.values(i) - X.row(i).dot(beta);
            f += r * r;
        }
    }
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta(j) != 0.0) {
            f += w.l1(j) * std::abs(beta(j));
        }
        f += w.ridge * beta(j) * beta(j);
    }
    return f;
}

/// Subgradient stationarity with residual r = y - X beta on observed rows:
/// nonzero coefficients need |-2 x_j'r + 2 ridge b_j + sign(b_j) w_j| <= tol (1 + w_j),
/// zero coefficients need |2 x_j'r| <= w_j + tol.
inline bool lasso_kkt(const MaskedVector& y, const Matrix& X, const PenaltyWeights& w, const Vector& beta, double tol)
{
    Vector r = Vector::Zero(y.values.size());
    for (Index i = 0; i < y.values.size(); ++i) {
        if (y.observed(i)) {
            r(i) = y.values(i) - X.row(i).dot(beta);
        }
    }
    for (Index j = 0; j < beta.size(); ++j) {
        if (is_forced_zero(w.l1(j))) {
            if (beta(j) != 0.0) {
                return false;
            }
            continue;
        }
        double xr = 0.0;
        for (Index i = 0; i < y.values.size(); ++i) {
            if (y.observed(i)) {
                xr += X(i, j) * r(i);
            }
        }
        if (beta(j) != 0.0) {
            const double s = beta(j) > 0 ? 1.0 : -1.0;
            if (std::abs(-2.0 * xr + 2.0 * w.ridge * beta(j) + s * w.l1(j)) > tol * (1.0 + w.l1(j))) {
                return false;
            }
        } else if (std::abs(2.0 * xr) > w.l1(j) + tol) {
            return false;
        }
    }
    return true;
}

/// Grid-search minimizer of the lasso objective. An exhaustive unit-step
/// lattice over [lo, hi]^p locates the basin, then coordinate scans at steps
/// 1e-2 and finally `step` in shrinking windows refine it until no coordinate
/// moves. The objective is convex with a separable nonsmooth part, so
/// coordinatewise-optimal grid points approach the global minimizer.
inline Vector grid_search_lasso(const MaskedVector& y, const Matrix& X, const PenaltyWeights& w, double lo, double hi,
                                double step)
{
    const Index p = X.cols();
    Vector best = Vector::Zero(p);
    double fbest = lasso_objective(y, X, w, best);
    const double coarse = 1.0;
    const int m = static_cast<int>(std::round((hi - lo) / coarse)) + 1;
    std::vector<int> idx(static_cast<std::size_t>(p), 0);
    Vector b(p);
    for (;;) {
        for (Index j = 0; j < p; ++j) {
            b(j) = is_forced_zero(w.l1(j)) ? 0.0 : lo + coarse * idx[static_cast<std::size_t>(j)];
        }
        const double f = lasso_objective(y, X, w, b);
        if (f < fbest) {
            fbest = f;
            best = b;
        }
        Index k = 0;
        while (k < p) {
            if (is_forced_zero(w.l1(k)) || ++idx[static_cast<std::size_t>(k)] >= m) {
                idx[static_cast<std::size_t>(k)] = 0;
                ++k;
            } else {
                break;
            }
        }
        if (k == p) {
            break;
        }
    }
    const double steps[2] = {1e-2, step};
    const double windows[2] = {coarse, 200 * step};
    for (int level = 0; level < 2; ++level) {
        const double h = steps[level];
        const int half = static_cast<int>(std::round(windows[level] / h));
        for (int round = 0; round < 10000; ++round) {
            bool moved = false;
            for (Index j = 0; j < p; ++j) {
                if (is_forced_zero(w.l1(j))) {
                    continue;
                }
                Vector cand = best;
                const double center = best(j);
                for (int s = -half; s <= half; ++s) {
                    // Lattice anchored at zero so that exact zeros are candidates.
                    const double v = (std::round(center / h) + s) * h;
                    if (v < lo || v > hi) {
                        continue;
                    }
                    cand(j) = v;
                    const double f = lasso_objective(y, X, w, cand);
                    if (f < fbest - 1e-14 * (1.0 + std::abs(fbest))) {
                        fbest = f;
                        best(j) = v;
                        moved = true;
                    }
                }
            }
            if (!moved) {
                break;
            }
        }
    }
    return best;
}

/// Closed-form block soft threshold for an orthonormal design: (1 - gamma / (2 |z|))_+ z.
inline RowVector block_soft_threshold(const RowVector& z, double gamma)
{
    const double nz = z.norm();
    if (nz <= gamma / 2.0) {
        return RowVector::Zero(z.size());
    }
    return (1.0 - gamma / (2.0 * nz)) * z;
}

/// Planted sparse network with exact support prior.
struct Planted {
    Matrix A;
    Matrix P;
    Matrix pi;
    ExpressionMatrix E;
};

inline Planted planted_instance(std::uint64_t seed, Index n = 8, Index L = 3, Index T = 6)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Planted p;
    p.A = Matrix::Zero(n, L);
    for (Index i = 0; i < n; ++i) {
        const Index j = i % L;
        p.A(i, j) = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.8 + u(rng));
        if (i >= L && u(rng) < 0.3) {
            const Index k = (j + 1) % L;
            p.A(i, k) = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.8 + u(rng));
        }
    }
    p.P = random_matrix(rng, L, T);
    p.pi = (p.A.array() != 0.0).cast<double>().matrix();
    p.E = ExpressionMatrix::dense(p.A * p.P);
    return p;
}

} // namespace srnet::testing
