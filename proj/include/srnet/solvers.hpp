#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "core.hpp"
#include "data.hpp"

namespace srnet {

/// L1 weight that pins a coefficient to exactly zero.
inline constexpr double kForcedZero = std::numeric_limits<double>::infinity();

inline bool is_forced_zero(double w) { return w == kForcedZero; }

struct MaskedVector {
    Vector values;
    BoolVector observed;

    static MaskedVector dense(Vector v)
    {
        MaskedVector m;
        m.observed = BoolVector::Constant(v.size(), true);
        m.values = std::move(v);
        return m;
    }
};

/// Per-coefficient L1 weights (kForcedZero allowed) plus a scalar ridge weight.
struct PenaltyWeights {
    Vector l1;
    double ridge = 0.0;

    void validate() const
    {
        for (Index j = 0; j < l1.size(); ++j) {
            require(l1(j) >= 0.0 && !std::isnan(l1(j)), ErrorKind::InvalidArgument, "L1 weights must be >= 0");
        }
        require(ridge >= 0.0 && std::isfinite(ridge), ErrorKind::InvalidArgument, "ridge weight must be >= 0");
    }
};

struct SolverConfig {
    double tolerance = 1e-6;
    int max_sweeps = 10000;

    void validate() const
    {
        require(tolerance > 0.0, ErrorKind::InvalidArgument, "solver tolerance must be > 0");
        require(max_sweeps >= 1, ErrorKind::InvalidArgument, "max_sweeps must be >= 1");
    }
};

struct CdResult {
    Vector coef;
    int sweeps = 0;
    bool converged = false;
};

/**
 * Cyclic coordinate descent on the Gram form of
 *
 *     b' G b - 2 c' b + sum_j w_j |b_j| + ridge * |b|^2
 *
 * where G = X'X and c = X'y over the observed rows. Forced-zero coordinates
 * are set to zero and never visited. A coordinate whose curvature
 * G_jj + ridge vanishes does not affect the objective and is set to zero.
 *
 * Stops once the largest coordinate change in a sweep is below
 * tolerance * (1 + max |b|).
 */
inline CdResult lasso_cd_gram(const Matrix& gram, const Vector& xty, const Vector& l1, double ridge, Vector beta,
                              const SolverConfig& cfg)
{
    const Index p = gram.rows();
    std::vector<Index> active;
    active.reserve(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) {
        if (is_forced_zero(l1(j))) {
            beta(j) = 0.0;
        } else {
            active.push_back(j);
        }
    }
    Vector g = gram * beta;

    CdResult out;
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        double max_delta = 0.0;
        double max_abs = 0.0;
        for (Index j : active) {
            const double curvature = gram(j, j) + ridge;
            const double old = beta(j);
            double fresh = 0.0;
            if (curvature > 0.0) {
                const double z = xty(j) - (g(j) - gram(j, j) * old);
                fresh = soft_threshold(z, 0.5 * l1(j)) / curvature;
            }
            const double delta = fresh - old;
            if (delta != 0.0) {
                beta(j) = fresh;
                g.noalias() += gram.col(j) * delta;
            }
            max_delta = std::max(max_delta, std::abs(delta));
            max_abs = std::max(max_abs, std::abs(fresh));
        }
        out.sweeps = sweep;
        if (max_delta <= cfg.tolerance * (1.0 + max_abs)) {
            out.converged = true;
            break;
        }
    }
    out.coef = std::move(beta);
    return out;
}

/// Minimizes sum_observed (y_i - x_i'b)^2 + sum_j w_j |b_j| + ridge * sum_j b_j^2
/// by shooting (cyclic coordinate descent), warm-started at beta0.
inline Vector weighted_lasso_cd(const MaskedVector& y, const Matrix& X, const PenaltyWeights& w, const Vector& beta0,
                                const SolverConfig& cfg)
{
    cfg.validate();
    w.validate();
    require(X.rows() == y.values.size() && y.observed.size() == y.values.size(), ErrorKind::ShapeMismatch,
            "design rows must match response length");
    require(w.l1.size() == X.cols() && beta0.size() == X.cols(), ErrorKind::ShapeMismatch,
            "weights and beta0 must match design columns");

    std::vector<Index> rows;
    for (Index i = 0; i < y.values.size(); ++i) {
        if (y.observed(i)) {
            rows.push_back(i);
        }
    }
    require(!rows.empty(), ErrorKind::EmptyObservedSet, "response has no observed entries");

    std::vector<Index> cols;
    for (Index j = 0; j < X.cols(); ++j) {
        if (!is_forced_zero(w.l1(j))) {
            cols.push_back(j);
        }
    }

    Matrix Xo(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    Vector yo(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        yo(static_cast<Index>(r)) = y.values(rows[r]);
        for (std::size_t c = 0; c < cols.size(); ++c) {
            Xo(static_cast<Index>(r), static_cast<Index>(c)) = X(rows[r], cols[c]);
        }
    }
    require(yo.allFinite() && Xo.allFinite(), ErrorKind::NonFiniteInput, "non-finite design or response");

    Vector beta = Vector::Zero(X.cols());
    if (cols.empty()) {
        return beta;
    }
    Vector l1(static_cast<Index>(cols.size()));
    Vector start(static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        l1(static_cast<Index>(c)) = w.l1(cols[c]);
        start(static_cast<Index>(c)) = beta0(cols[c]);
    }
    const Matrix gram = Xo.transpose() * Xo;
    const Vector xty = Xo.transpose() * yo;
    const CdResult res = lasso_cd_gram(gram, xty, l1, w.ridge, std::move(start), cfg);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        beta(cols[c]) = res.coef(static_cast<Index>(c));
    }
    return beta;
}

/**
 * Exact block minimization of one row of P under the group penalty
 *
 *     sum_observed (R_it - a_ij p_jt)^2 + gamma * sum_k || p_j,G_k ||_2
 *
 * where R is the partial residual with row j's own contribution removed.
 * Per experiment the smooth part is d_t p_t^2 - 2 z_t p_t with
 * d_t = sum_obs a_ij^2 and z_t = sum_obs a_ij R_it. A group is zero iff
 * ||z_G|| <= gamma / 2; otherwise p_t = z_t s / (d_t s + gamma / 2) where
 * s = ||p_G|| solves sum_t z_t^2 / (d_t s + gamma/2)^2 = 1 (Newton from s = 0,
 * which is monotone because the left side is convex and decreasing).
 */
inline RowVector group_block_solve(const Matrix& resid, const Mask& observed, const Matrix& A, Index row_index,
                                   const GroupPartition& groups, double gamma, const SolverConfig& cfg)
{
    cfg.validate();
    require(gamma >= 0.0 && std::isfinite(gamma), ErrorKind::InvalidArgument, "group weight must be >= 0");
    require(resid.rows() == A.rows() && observed.rows() == resid.rows() && observed.cols() == resid.cols(),
            ErrorKind::ShapeMismatch, "residual, mask and design disagree");
    require(row_index >= 0 && row_index < A.cols(), ErrorKind::InvalidArgument, "row index out of range");
    require(groups.size() == resid.cols(), ErrorKind::ShapeMismatch, "grouping must cover every experiment");

    const Index T = resid.cols();
    std::vector<Index> genes;
    for (Index i = 0; i < A.rows(); ++i) {
        if (A(i, row_index) != 0.0) {
            genes.push_back(i);
        }
    }
    Vector d = Vector::Zero(T);
    Vector z = Vector::Zero(T);
    for (Index t = 0; t < T; ++t) {
        for (Index i : genes) {
            if (observed(i, t)) {
                const double a = A(i, row_index);
                const double r = resid(i, t);
                require(std::isfinite(r) && std::isfinite(a), ErrorKind::NonFiniteInput, "non-finite residual or design");
                d(t) += a * a;
                z(t) += a * r;
            }
        }
    }
    require((d.array() > 0.0).any(), ErrorKind::EmptyObservedSet,
            "design column has no entries on observed data");

    RowVector row = RowVector::Zero(T);
    const double half = 0.5 * gamma;
    for (int k = 0; k < groups.group_count(); ++k) {
        const auto& members = groups.members(k);
        double znorm2 = 0.0;
        for (Index t : members) {
            znorm2 += z(t) * z(t);
        }
        if (gamma == 0.0) {
            for (Index t : members) {
                row(t) = d(t) > 0.0 ? z(t) / d(t) : 0.0;
            }
            continue;
        }
        if (std::sqrt(znorm2) <= half) {
            continue;
        }
        double s = 0.0;
        for (int it = 0; it < 200; ++it) {
            double f = -1.0;
            double df = 0.0;
            for (Index t : members) {
                const double den = d(t) * s + half;
                f += z(t) * z(t) / (den * den);
                df -= 2.0 * z(t) * z(t) * d(t) / (den * den * den);
            }
            if (df == 0.0) {
                break;
            }
            const double step = f / df;
            s -= step;
            if (std::abs(step) <= 1e-15 * std::max(s, 1e-300)) {
                break;
            }
        }
        for (Index t : members) {
            row(t) = z(t) * s / (d(t) * s + half);
        }
    }
    return row;
}

struct RefitResult {
    Matrix strengths;
    /// Genes with no observed entries; their coefficients are left at zero.
    std::vector<Index> empty_rows;
};

/// Unpenalized least squares for each gene row over its support columns with
/// P fixed; minimum-norm solution when the restricted system is rank deficient.
inline RefitResult masked_least_squares_refit(const ExpressionMatrix& E, const Mask& support, const Matrix& P)
{
    const Index n = E.genes();
    const Index T = E.experiments();
    const Index L = P.rows();
    require(P.cols() == T, ErrorKind::ShapeMismatch, "P columns must match experiments");
    require(support.rows() == n && support.cols() == L, ErrorKind::ShapeMismatch, "support must be n x L");

    RefitResult out;
    out.strengths = Matrix::Zero(n, L);
    for (Index i = 0; i < n; ++i) {
        std::vector<Index> cols;
        for (Index j = 0; j < L; ++j) {
            if (support(i, j)) {
                cols.push_back(j);
            }
        }
        std::vector<Index> obs;
        for (Index t = 0; t < T; ++t) {
            if (E.observed(i, t)) {
                obs.push_back(t);
            }
        }
        if (obs.empty()) {
            out.empty_rows.push_back(i);
            continue;
        }
        if (cols.empty()) {
            continue;
        }
        Matrix X(static_cast<Index>(obs.size()), static_cast<Index>(cols.size()));
        Vector y(static_cast<Index>(obs.size()));
        for (std::size_t r = 0; r < obs.size(); ++r) {
            y(static_cast<Index>(r)) = E.values(i, obs[r]);
            for (std::size_t c = 0; c < cols.size(); ++c) {
                X(static_cast<Index>(r), static_cast<Index>(c)) = P(cols[c], obs[r]);
            }
        }
        require(X.allFinite() && y.allFinite(), ErrorKind::NonFiniteInput, "non-finite refit input");
        const Vector coef = X.completeOrthogonalDecomposition().solve(y);
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out.strengths(i, cols[c]) = coef(static_cast<Index>(c));
        }
    }
    return out;
}

} // namespace srnet
