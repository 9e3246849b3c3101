#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "core.hpp"
#include "data.hpp"
#include "solvers.hpp"

namespace srnet {

enum class PenaltyMode { Ungrouped, Grouped };

inline const char* to_string(PenaltyMode mode) { return mode == PenaltyMode::Grouped ? "grouped" : "ungrouped"; }

struct FitConfig {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    PenaltyMode mode = PenaltyMode::Ungrouped;
    /// Prior shrinkage toward 0.5; applied by callers via shrink_prior.
    double alpha = 1.0;
    SolverConfig solver;
    double outer_tol = 1e-4;
    int max_outer_iters = 200;
    int n_restarts = 1;
    std::uint64_t seed = 0;

    void validate() const
    {
        require(lambda1 >= 0.0 && std::isfinite(lambda1), ErrorKind::InvalidArgument, "lambda1 must be >= 0");
        require(lambda2 >= 0.0 && std::isfinite(lambda2), ErrorKind::InvalidArgument, "lambda2 must be >= 0");
        require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::InvalidArgument, "alpha must lie in [0,1]");
        require(outer_tol > 0.0, ErrorKind::InvalidArgument, "outer_tol must be > 0");
        require(max_outer_iters >= 1, ErrorKind::InvalidArgument, "max_outer_iters must be >= 1");
        require(n_restarts >= 1, ErrorKind::InvalidArgument, "n_restarts must be >= 1");
        solver.validate();
    }
};

/// Sign- and scale-free summaries of a fit: regulon expression and average
/// control strength.
struct Tilde {
    Matrix a; ///< n x L
    Matrix p; ///< L x T
};

struct FitResult {
    Matrix A;
    Matrix P;
    std::vector<double> objective_trace;
    bool converged = false;
    int iterations = 0;
    Matrix tilde_a;
    Matrix tilde_p;
    int restart_rank = 0;
    std::uint64_t seed = 0;

    double final_objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

struct FitStart {
    Matrix A;
    Matrix P;
};

// ---------------------------------------------------------------------------
// Prior handling

/// Shrinks interior prior probabilities toward 0.5; 0 and 1 are kept.
inline Matrix shrink_prior(const Matrix& pi, double alpha)
{
    require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::OutOfRange, "alpha must lie in [0,1]");
    Matrix out(pi.rows(), pi.cols());
    for (Index i = 0; i < pi.rows(); ++i) {
        for (Index j = 0; j < pi.cols(); ++j) {
            const double v = pi(i, j);
            require(v >= 0.0 && v <= 1.0, ErrorKind::OutOfRange, "prior entry outside [0,1]");
            if (v == 0.0 || v == 1.0) {
                out(i, j) = v;
            } else {
                out(i, j) = (1.0 - alpha) * v + alpha * 0.5;
            }
        }
    }
    return out;
}

inline PriorMatrix shrink_prior(const PriorMatrix& pi, double alpha)
{
    PriorMatrix out = pi;
    out.probs = shrink_prior(pi.probs, alpha);
    return out;
}

/// L1 weight for one connection: -lambda1 * log(pi), exactly 0 for pi == 1
/// and kForcedZero for pi == 0.
inline double connection_weight(double pi_tilde, double lambda1)
{
    if (pi_tilde <= 0.0) {
        return kForcedZero;
    }
    if (pi_tilde >= 1.0) {
        return 0.0;
    }
    return -lambda1 * std::log(pi_tilde);
}

inline Vector connection_weights(const Eigen::Ref<const RowVector>& pi_row, double lambda1)
{
    Vector w(pi_row.size());
    for (Index j = 0; j < pi_row.size(); ++j) {
        w(j) = connection_weight(pi_row(j), lambda1);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Objective

inline double residual_sum_squares(const ExpressionMatrix& E, const Matrix& A, const Matrix& P)
{
    const Matrix fitted = A * P;
    double rss = 0.0;
    for (Index t = 0; t < E.experiments(); ++t) {
        for (Index i = 0; i < E.genes(); ++i) {
            if (E.observed(i, t)) {
                const double r = E.values(i, t) - fitted(i, t);
                rss += r * r;
            }
        }
    }
    return rss;
}

/// Penalty on P at unit weight: ||P||_1, or the sum of per-group L2 norms of
/// each row in grouped mode.
inline double activity_penalty(const Matrix& P, PenaltyMode mode, const GroupPartition& groups)
{
    double q = 0.0;
    if (mode == PenaltyMode::Ungrouped) {
        for (Index j = 0; j < P.rows(); ++j) {
            for (Index t = 0; t < P.cols(); ++t) {
                q += std::abs(P(j, t));
            }
        }
        return q;
    }
    require(groups.size() == P.cols(), ErrorKind::ShapeMismatch, "grouping must cover every experiment");
    for (Index j = 0; j < P.rows(); ++j) {
        for (int k = 0; k < groups.group_count(); ++k) {
            double ss = 0.0;
            for (Index t : groups.members(k)) {
                ss += P(j, t) * P(j, t);
            }
            q += std::sqrt(ss);
        }
    }
    return q;
}

/**
 * Penalized loss
 *
 *     sum_observed (E - AP)^2 - lambda1 sum_ij log(pi_ij) |a_ij| + lambda2 sum_ij a_ij^2 + Q(P)
 *
 * The ridge term is squared. One display of the A-step writes lambda2 ||A||_2
 * without the square; the squared form is the one optimized here.
 */
inline double objective_value(const ExpressionMatrix& E, const Matrix& A, const Matrix& P, const Matrix& pi_tilde,
                              double lambda1, double lambda2, PenaltyMode mode, const GroupPartition& groups)
{
    require_shape(A, E.genes(), pi_tilde.cols(), "A");
    require_shape(pi_tilde, E.genes(), pi_tilde.cols(), "pi_tilde");
    require_shape(P, pi_tilde.cols(), E.experiments(), "P");

    double l1 = 0.0;
    double ridge = 0.0;
    for (Index i = 0; i < A.rows(); ++i) {
        for (Index j = 0; j < A.cols(); ++j) {
            const double a = A(i, j);
            if (a == 0.0) {
                continue;
            }
            const double w = connection_weight(pi_tilde(i, j), lambda1);
            require(!is_forced_zero(w), ErrorKind::PriorViolation,
                    "nonzero connection (" + std::to_string(i) + "," + std::to_string(j) + ") where prior is 0");
            l1 += w * std::abs(a);
            ridge += a * a;
        }
    }
    return residual_sum_squares(E, A, P) + l1 + lambda2 * ridge + activity_penalty(P, mode, groups);
}

// ---------------------------------------------------------------------------
// Initialization

/// A0 = pi_tilde * N(0,1) on the prior support (exactly 0 elsewhere), P0 ~ N(0,1).
inline FitStart initialize_fit(const Matrix& pi_tilde, Index T, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    FitStart s;
    s.A = Matrix::Zero(pi_tilde.rows(), pi_tilde.cols());
    for (Index i = 0; i < pi_tilde.rows(); ++i) {
        for (Index j = 0; j < pi_tilde.cols(); ++j) {
            const double z = normal(rng);
            if (pi_tilde(i, j) > 0.0) {
                s.A(i, j) = pi_tilde(i, j) * z;
            }
        }
    }
    s.P.resize(pi_tilde.cols(), T);
    for (Index j = 0; j < s.P.rows(); ++j) {
        for (Index t = 0; t < T; ++t) {
            s.P(j, t) = normal(rng);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Half-steps

namespace detail {

inline double relative_change(const Matrix& before, const Matrix& after)
{
    if (after.size() == 0) {
        return 0.0;
    }
    const double delta = (after - before).cwiseAbs().maxCoeff();
    return delta / (1.0 + after.cwiseAbs().maxCoeff());
}

inline Matrix masked_residual(const ExpressionMatrix& E, const Matrix& A, const Matrix& P)
{
    Matrix R = E.values - A * P;
    for (Index t = 0; t < R.cols(); ++t) {
        for (Index i = 0; i < R.rows(); ++i) {
            if (!E.observed(i, t)) {
                R(i, t) = 0.0;
            }
        }
    }
    return R;
}

inline Matrix solve_p_ungrouped(const ExpressionMatrix& E, const Matrix& A, const Matrix& P_warm,
                                const SolverConfig& cfg)
{
    const Index n = E.genes();
    const Index L = A.cols();
    const Index T = E.experiments();
    const Matrix full_gram = A.transpose() * A;
    const Vector unit = Vector::Ones(L);
    Matrix P(L, T);
    for (Index t = 0; t < T; ++t) {
        Vector xty = Vector::Zero(L);
        Index missing = 0;
        for (Index i = 0; i < n; ++i) {
            if (E.observed(i, t)) {
                xty.noalias() += A.row(i).transpose() * E.values(i, t);
            } else {
                ++missing;
            }
        }
        if (missing == 0) {
            P.col(t) = lasso_cd_gram(full_gram, xty, unit, 0.0, P_warm.col(t), cfg).coef;
            continue;
        }
        Matrix gram = Matrix::Zero(L, L);
        for (Index i = 0; i < n; ++i) {
            if (E.observed(i, t)) {
                gram.selfadjointView<Eigen::Lower>().rankUpdate(A.row(i).transpose());
            }
        }
        gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
        P.col(t) = lasso_cd_gram(gram, xty, unit, 0.0, P_warm.col(t), cfg).coef;
    }
    return P;
}

inline Matrix solve_p_grouped(const ExpressionMatrix& E, const Matrix& A, const Matrix& P_warm,
                              const GroupPartition& groups, const SolverConfig& cfg)
{
    const Index L = A.cols();
    const Index T = E.experiments();
    Matrix P = P_warm;
    std::vector<std::vector<Index>> support(static_cast<std::size_t>(L));
    for (Index j = 0; j < L; ++j) {
        for (Index i = 0; i < A.rows(); ++i) {
            if (A(i, j) != 0.0) {
                support[static_cast<std::size_t>(j)].push_back(i);
            }
        }
        if (support[static_cast<std::size_t>(j)].empty()) {
            P.row(j).setZero();
        }
    }
    Matrix R = masked_residual(E, A, P);
    auto apply = [&](Index j, const RowVector& row, double sign) {
        for (Index i : support[static_cast<std::size_t>(j)]) {
            const double a = A(i, j);
            for (Index t = 0; t < T; ++t) {
                if (E.observed(i, t)) {
                    R(i, t) += sign * a * row(t);
                }
            }
        }
    };
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (Index j = 0; j < L; ++j) {
            if (support[static_cast<std::size_t>(j)].empty()) {
                continue;
            }
            const RowVector old = P.row(j);
            apply(j, old, 1.0);
            RowVector fresh;
            bool observed_any = false;
            for (Index i : support[static_cast<std::size_t>(j)]) {
                observed_any = observed_any || E.observed.row(i).any();
            }
            if (observed_any) {
                fresh = group_block_solve(R, E.observed, A, j, groups, 1.0, cfg);
            } else {
                fresh = RowVector::Zero(T);
            }
            apply(j, fresh, -1.0);
            P.row(j) = fresh;
            max_delta = std::max(max_delta, (fresh - old).cwiseAbs().maxCoeff());
        }
        const double scale = P.size() ? P.cwiseAbs().maxCoeff() : 0.0;
        if (max_delta <= cfg.tolerance * (1.0 + scale)) {
            break;
        }
    }
    return P;
}

} // namespace detail

/// Minimizes ||E - A P||^2 + Q(P) over P with A fixed. Ungrouped mode solves
/// each experiment column as a lasso on its observed rows; grouped mode runs
/// block coordinate descent over rows of P.
inline Matrix solve_P_step(const ExpressionMatrix& E, const Matrix& A, const Matrix& P_warm,
                           const GroupPartition& groups, PenaltyMode mode, const SolverConfig& cfg)
{
    cfg.validate();
    require(A.rows() == E.genes(), ErrorKind::ShapeMismatch, "A rows must match genes");
    require_shape(P_warm, A.cols(), E.experiments(), "P warm start");
    require(A.allFinite(), ErrorKind::NonFiniteInput, "non-finite A");
    if (mode == PenaltyMode::Ungrouped) {
        return detail::solve_p_ungrouped(E, A, P_warm, cfg);
    }
    require(groups.size() == E.experiments(), ErrorKind::ShapeMismatch, "grouping must cover every experiment");
    return detail::solve_p_grouped(E, A, P_warm, groups, cfg);
}

/// Minimizes ||E - A P||^2 - lambda1 sum log(pi)|a| + lambda2 ||A||^2 over A
/// with P fixed; one weighted lasso per gene row.
inline Matrix solve_A_step(const ExpressionMatrix& E, const Matrix& P, const Matrix& A_warm, const Matrix& pi_tilde,
                           double lambda1, double lambda2, const SolverConfig& cfg)
{
    const Index n = E.genes();
    require_shape(pi_tilde, n, P.rows(), "pi_tilde");
    require_shape(A_warm, n, P.rows(), "A warm start");
    require(P.cols() == E.experiments(), ErrorKind::ShapeMismatch, "P columns must match experiments");

    const Matrix X = P.transpose();
    Matrix A(n, P.rows());
    PenaltyWeights w;
    w.ridge = lambda2;
    MaskedVector y;
    for (Index i = 0; i < n; ++i) {
        w.l1 = connection_weights(pi_tilde.row(i), lambda1);
        y.values = E.values.row(i).transpose();
        y.observed = E.observed.row(i).transpose();
        A.row(i) = weighted_lasso_cd(y, X, w, A_warm.row(i).transpose(), cfg).transpose();
    }
    return A;
}

// ---------------------------------------------------------------------------
// Normalization

/// p~_jt = (sum_i a_ij) p_jt / #{i : a_ij != 0}, 0 for a TF with no connections;
/// a~_ij = a_ij * (sum_t p_jt) / T.
inline Tilde normalize_tilde(const Matrix& A, const Matrix& P)
{
    require(A.cols() == P.rows(), ErrorKind::ShapeMismatch, "A columns must match P rows");
    const Index L = A.cols();
    const Index T = P.cols();
    Tilde out;
    out.p = Matrix::Zero(L, T);
    out.a = Matrix::Zero(A.rows(), L);
    for (Index j = 0; j < L; ++j) {
        double col_sum = 0.0;
        Index nonzero = 0;
        for (Index i = 0; i < A.rows(); ++i) {
            col_sum += A(i, j);
            nonzero += A(i, j) != 0.0 ? 1 : 0;
        }
        if (nonzero > 0) {
            for (Index t = 0; t < T; ++t) {
                out.p(j, t) = col_sum * P(j, t) / static_cast<double>(nonzero);
            }
        }
        double row_sum = 0.0;
        for (Index t = 0; t < T; ++t) {
            row_sum += P(j, t);
        }
        for (Index i = 0; i < A.rows(); ++i) {
            out.a(i, j) = A(i, j) * row_sum / static_cast<double>(T);
        }
    }
    return out;
}

/// Flips column j of A and row j of P wherever row j of P is negatively
/// correlated with the same row of `reference`.
inline void align_signs(Matrix& A, Matrix& P, const Matrix& reference)
{
    require(P.rows() == reference.rows() && P.cols() == reference.cols(), ErrorKind::ShapeMismatch,
            "reference activity shape differs");
    for (Index j = 0; j < P.rows(); ++j) {
        const double mp = P.row(j).mean();
        const double mr = reference.row(j).mean();
        const double cov = ((P.row(j).array() - mp) * (reference.row(j).array() - mr)).sum();
        if (cov < 0.0) {
            P.row(j) = -P.row(j);
            A.col(j) = -A.col(j);
        }
    }
}

// ---------------------------------------------------------------------------
// Alternating fit

/**
 * Alternates P- and A-steps from `start` (or a seeded random start) until
 * the relative entrywise change of both A and P is below outer_tol.
 * The objective is recorded at the start and after every half-step; an
 * increase beyond 1e-8 relative slack raises Diverged.
 */
inline FitResult fit_alternating(const ExpressionMatrix& E, const Matrix& pi_tilde, const GroupPartition& groups,
                                 const FitConfig& cfg, const std::optional<FitStart>& start = std::nullopt)
{
    cfg.validate();
    E.validate();
    require(pi_tilde.rows() == E.genes() && pi_tilde.cols() >= 1, ErrorKind::ShapeMismatch,
            "prior must have one row per gene");
    if (cfg.mode == PenaltyMode::Grouped) {
        require(groups.size() == E.experiments(), ErrorKind::ShapeMismatch, "grouping must cover every experiment");
    }
    const Index T = E.experiments();

    FitStart s = start ? *start : initialize_fit(pi_tilde, T, cfg.seed);
    require_shape(s.A, E.genes(), pi_tilde.cols(), "initial A");
    require_shape(s.P, pi_tilde.cols(), T, "initial P");
    for (Index i = 0; i < s.A.rows(); ++i) {
        for (Index j = 0; j < s.A.cols(); ++j) {
            if (pi_tilde(i, j) == 0.0) {
                s.A(i, j) = 0.0;
            }
        }
    }

    FitResult out;
    out.seed = cfg.seed;
    auto objective = [&](const Matrix& A, const Matrix& P) {
        return objective_value(E, A, P, pi_tilde, cfg.lambda1, cfg.lambda2, cfg.mode, groups);
    };
    auto record = [&](double value) {
        const double prev = out.objective_trace.back();
        if (value > prev + 1e-8 * std::abs(prev)) {
            throw Error(ErrorKind::Diverged, "objective increased from " + std::to_string(prev) + " to " +
                                                 std::to_string(value));
        }
        out.objective_trace.push_back(value);
    };

    Matrix A = std::move(s.A);
    Matrix P = std::move(s.P);
    out.objective_trace.push_back(objective(A, P));
    for (int k = 1; k <= cfg.max_outer_iters; ++k) {
        Matrix P_next = solve_P_step(E, A, P, groups, cfg.mode, cfg.solver);
        record(objective(A, P_next));
        Matrix A_next = solve_A_step(E, P_next, A, pi_tilde, cfg.lambda1, cfg.lambda2, cfg.solver);
        record(objective(A_next, P_next));
        const double change = std::max(detail::relative_change(A, A_next), detail::relative_change(P, P_next));
        A = std::move(A_next);
        P = std::move(P_next);
        out.iterations = k;
        if (change < cfg.outer_tol) {
            out.converged = true;
            break;
        }
    }
    Tilde tl = normalize_tilde(A, P);
    out.A = std::move(A);
    out.P = std::move(P);
    out.tilde_a = std::move(tl.a);
    out.tilde_p = std::move(tl.p);
    return out;
}

inline double rmse(const Matrix& x, const Matrix& y)
{
    require(x.rows() == y.rows() && x.cols() == y.cols(), ErrorKind::ShapeMismatch, "rmse shape mismatch");
    if (x.size() == 0) {
        return 0.0;
    }
    return std::sqrt((x - y).squaredNorm() / static_cast<double>(x.size()));
}

struct RestartSummary {
    FitResult best;
    /// Every run in seed order; run r used seed + r.
    std::vector<FitResult> runs;
    /// Pairwise RMSE of sign-aligned p~ between runs (seed order).
    Matrix dispersion;
    /// Run indices sorted by final objective, best first.
    std::vector<std::size_t> order;
};

/// Runs fit_alternating from seeds seed, seed+1, ..., keeps the run with the
/// lowest final objective and reports the spread of p~ across runs.
inline RestartSummary multi_restart(const ExpressionMatrix& E, const Matrix& pi_tilde, const GroupPartition& groups,
                                    const FitConfig& cfg, unsigned threads = 1)
{
    cfg.validate();
    const auto R = static_cast<std::size_t>(cfg.n_restarts);
    RestartSummary out;
    out.runs.resize(R);
    parallel_for(R, threads, [&](std::size_t r) {
        FitConfig c = cfg;
        c.seed = cfg.seed + r;
        out.runs[r] = fit_alternating(E, pi_tilde, groups, c);
    });
    out.order.resize(R);
    std::iota(out.order.begin(), out.order.end(), std::size_t{0});
    std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
        return out.runs[a].final_objective() < out.runs[b].final_objective();
    });
    for (std::size_t rank = 0; rank < R; ++rank) {
        out.runs[out.order[rank]].restart_rank = static_cast<int>(rank);
    }
    const Matrix reference = out.runs[out.order.front()].P;
    for (auto& run : out.runs) {
        align_signs(run.A, run.P, reference);
        Tilde tl = normalize_tilde(run.A, run.P);
        run.tilde_a = std::move(tl.a);
        run.tilde_p = std::move(tl.p);
    }
    out.dispersion = Matrix::Zero(static_cast<Index>(R), static_cast<Index>(R));
    for (std::size_t a = 0; a < R; ++a) {
        for (std::size_t b = a + 1; b < R; ++b) {
            const double d = rmse(out.runs[a].tilde_p, out.runs[b].tilde_p);
            out.dispersion(static_cast<Index>(a), static_cast<Index>(b)) = d;
            out.dispersion(static_cast<Index>(b), static_cast<Index>(a)) = d;
        }
    }
    out.best = out.runs[out.order.front()];
    return out;
}

/// Fits once, or with restarts when cfg.n_restarts > 1, returning the best run.
inline FitResult fit_best(const ExpressionMatrix& E, const Matrix& pi_tilde, const GroupPartition& groups,
                          const FitConfig& cfg, unsigned threads = 1)
{
    if (cfg.n_restarts <= 1) {
        return fit_alternating(E, pi_tilde, groups, cfg);
    }
    return multi_restart(E, pi_tilde, groups, cfg, threads).best;
}

// ---------------------------------------------------------------------------
// Identifiability

struct NcaReport {
    bool cond1 = false; ///< support pattern has full column rank
    bool cond2 = false; ///< removing any TF and its genes keeps full column rank
    bool cond3 = false; ///< P has full row rank
    std::vector<Index> failing_columns;

    bool all() const { return cond1 && cond2 && cond3; }
};

inline Index numeric_rank(const Matrix& m)
{
    if (m.size() == 0) {
        return 0;
    }
    const Vector sv = m.jacobiSvd().singularValues();
    const double top = sv.size() ? sv(0) : 0.0;
    if (top <= 0.0) {
        return 0;
    }
    Index r = 0;
    for (Index k = 0; k < sv.size(); ++k) {
        r += sv(k) > 1e-10 * top ? 1 : 0;
    }
    return r;
}

inline NcaReport check_nca_identifiability(const Mask& support, const Matrix& P)
{
    const Index n = support.rows();
    const Index L = support.cols();
    require(P.rows() == L, ErrorKind::ShapeMismatch, "P rows must match support columns");
    const Matrix pattern = support.cast<double>().matrix();

    NcaReport rep;
    rep.cond1 = numeric_rank(pattern) == L;
    for (Index j = 0; j < L; ++j) {
        std::vector<Index> rows;
        for (Index i = 0; i < n; ++i) {
            if (!support(i, j)) {
                rows.push_back(i);
            }
        }
        Matrix reduced(static_cast<Index>(rows.size()), L - 1);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            Index c = 0;
            for (Index k = 0; k < L; ++k) {
                if (k != j) {
                    reduced(static_cast<Index>(r), c++) = pattern(rows[r], k);
                }
            }
        }
        if (L > 1 && numeric_rank(reduced) != L - 1) {
            rep.failing_columns.push_back(j);
        }
    }
    rep.cond2 = rep.failing_columns.empty();
    rep.cond3 = numeric_rank(P) == L;
    return rep;
}

} // namespace srnet
