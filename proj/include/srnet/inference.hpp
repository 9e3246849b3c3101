#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "core.hpp"
#include "data.hpp"
#include "model.hpp"

namespace srnet {

/// p-value marker for connections that are never tested (prior 0).
inline constexpr double kNotTested = std::numeric_limits<double>::quiet_NaN();

struct BootstrapResult {
    int B = 0;
    std::vector<Matrix> tilde_a_samples; ///< B matrices, n x L
    std::vector<Matrix> tilde_p_samples; ///< B matrices, L x T
    Matrix pvalues;                      ///< n x L, NaN where not tested
    Mask tested;                         ///< n x L

    Index genes() const { return pvalues.rows(); }
    Index factors() const { return pvalues.cols(); }
};

/// Two-sided sign-count p-value with +1 continuity correction:
/// min(1, 2 (min(#{x <= 0}, #{x >= 0}) + 1) / (B + 1)).
inline double sign_count_pvalue(std::span<const double> samples)
{
    require(!samples.empty(), ErrorKind::EmptyInput, "no bootstrap samples");
    std::size_t nonpos = 0;
    std::size_t nonneg = 0;
    for (double x : samples) {
        nonpos += x <= 0.0 ? 1 : 0;
        nonneg += x >= 0.0 ? 1 : 0;
    }
    const double B = static_cast<double>(samples.size());
    const double tail = static_cast<double>(std::min(nonpos, nonneg));
    return std::min(1.0, 2.0 * (tail + 1.0) / (B + 1.0));
}

/// Fills pvalues from the stored a~ samples.
inline void compute_pvalues(BootstrapResult& res)
{
    const Index n = res.tested.rows();
    const Index L = res.tested.cols();
    res.pvalues = Matrix::Constant(n, L, kNotTested);
    std::vector<double> column(static_cast<std::size_t>(res.B));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < L; ++j) {
            if (!res.tested(i, j)) {
                continue;
            }
            for (int b = 0; b < res.B; ++b) {
                column[static_cast<std::size_t>(b)] = res.tilde_a_samples[static_cast<std::size_t>(b)](i, j);
            }
            res.pvalues(i, j) = sign_count_pvalue(column);
        }
    }
}

/**
 * Parametric bootstrap around a converged fit. Residuals on the observed
 * entries are pooled and resampled with replacement onto the observed
 * positions, each replicate is refitted warm-started at (A_hat, P_hat) with
 * lambdas held fixed, and the sign-aligned a~ and p~ are stored. A replicate
 * whose fit fails is redrawn with a fresh derived seed (at most 3 attempts).
 */
inline BootstrapResult bootstrap_fit(const ExpressionMatrix& E, const Matrix& A_hat, const Matrix& P_hat,
                                     const Matrix& pi_tilde, const GroupPartition& groups, const FitConfig& cfg,
                                     int B, std::uint64_t seed, unsigned threads = 1)
{
    require(B >= 2, ErrorKind::InvalidArgument, "bootstrap needs B >= 2");
    cfg.validate();
    E.validate();
    require_shape(A_hat, E.genes(), pi_tilde.cols(), "A_hat");
    require_shape(P_hat, pi_tilde.cols(), E.experiments(), "P_hat");

    const Matrix fitted = A_hat * P_hat;
    std::vector<double> residuals;
    for (Index t = 0; t < E.experiments(); ++t) {
        for (Index i = 0; i < E.genes(); ++i) {
            if (E.observed(i, t)) {
                residuals.push_back(E.values(i, t) - fitted(i, t));
            }
        }
    }

    BootstrapResult res;
    res.B = B;
    res.tested = pi_tilde.array() > 0.0;
    res.tilde_a_samples.resize(static_cast<std::size_t>(B));
    res.tilde_p_samples.resize(static_cast<std::size_t>(B));

    constexpr int kAttempts = 3;
    parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
        for (int attempt = 0;; ++attempt) {
            std::mt19937_64 rng(derive_seed(seed, b, static_cast<std::uint64_t>(attempt)));
            std::uniform_int_distribution<std::size_t> pick(0, residuals.size() - 1);
            ExpressionMatrix Eb = E;
            for (Index t = 0; t < E.experiments(); ++t) {
                for (Index i = 0; i < E.genes(); ++i) {
                    if (E.observed(i, t)) {
                        Eb.values(i, t) = fitted(i, t) + residuals[pick(rng)];
                    }
                }
            }
            try {
                FitConfig c = cfg;
                c.seed = derive_seed(seed, b, 1000 + static_cast<std::uint64_t>(attempt));
                FitResult fit = fit_alternating(Eb, pi_tilde, groups, c, FitStart{A_hat, P_hat});
                align_signs(fit.A, fit.P, P_hat);
                Tilde tl = normalize_tilde(fit.A, fit.P);
                res.tilde_a_samples[b] = std::move(tl.a);
                res.tilde_p_samples[b] = std::move(tl.p);
                return;
            } catch (const Error&) {
                if (attempt + 1 >= kAttempts) {
                    throw;
                }
            }
        }
    });
    compute_pvalues(res);
    return res;
}

struct BhSelection {
    double cutoff = 0.0;
    std::vector<bool> reject;
};

/// Benjamini-Hochberg step-up: k* = max{k : p_(k) <= k q / m}; rejects every
/// p <= p_(k*). Cutoff 0 and no rejections when no k qualifies.
inline BhSelection bh_select(std::span<const double> pvalues, double q)
{
    require(!pvalues.empty(), ErrorKind::EmptyInput, "no p-values");
    require(q > 0.0 && q < 1.0, ErrorKind::InvalidArgument, "q must lie in (0,1)");
    for (double p : pvalues) {
        require(p > 0.0 && p <= 1.0, ErrorKind::OutOfRange, "p-values must lie in (0,1]");
    }
    std::vector<double> sorted(pvalues.begin(), pvalues.end());
    std::sort(sorted.begin(), sorted.end());
    const double m = static_cast<double>(sorted.size());

    BhSelection out;
    for (std::size_t k = sorted.size(); k >= 1; --k) {
        if (sorted[k - 1] <= static_cast<double>(k) * q / m) {
            out.cutoff = sorted[k - 1];
            break;
        }
    }
    out.reject.resize(pvalues.size());
    for (std::size_t i = 0; i < pvalues.size(); ++i) {
        out.reject[i] = out.cutoff > 0.0 && pvalues[i] <= out.cutoff;
    }
    return out;
}

/// BH over the tested connections of a p-value matrix.
inline BhSelection bh_select(const Matrix& pvalues, const Mask& tested, double q)
{
    std::vector<double> flat;
    for (Index j = 0; j < pvalues.cols(); ++j) {
        for (Index i = 0; i < pvalues.rows(); ++i) {
            if (tested(i, j)) {
                flat.push_back(pvalues(i, j));
            }
        }
    }
    return bh_select(flat, q);
}

/// Keeps a connection iff it was tested and its p-value is <= cutoff.
inline Matrix prune_network(const Matrix& A_hat, const Matrix& pvalues, const Mask& tested, double cutoff)
{
    require(A_hat.rows() == pvalues.rows() && A_hat.cols() == pvalues.cols() && tested.rows() == A_hat.rows() &&
                tested.cols() == A_hat.cols(),
            ErrorKind::ShapeMismatch, "A_hat, p-values and tested mask disagree");
    Matrix out = Matrix::Zero(A_hat.rows(), A_hat.cols());
    for (Index i = 0; i < A_hat.rows(); ++i) {
        for (Index j = 0; j < A_hat.cols(); ++j) {
            if (tested(i, j) && pvalues(i, j) <= cutoff) {
                out(i, j) = A_hat(i, j);
            }
        }
    }
    return out;
}

/// Linear-interpolation percentile of sorted data: position (N-1) prob,
/// i.e. the "type 7" definition.
inline double percentile_sorted(std::span<const double> sorted, double prob)
{
    require(!sorted.empty(), ErrorKind::EmptyInput, "no samples");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct Intervals {
    Matrix a_lower, a_upper; ///< n x L
    Matrix p_lower, p_upper; ///< L x T
};

/// Elementwise percentile intervals at the given central coverage level.
inline Intervals bootstrap_intervals(const BootstrapResult& res, double level)
{
    require(level > 0.0 && level <= 1.0, ErrorKind::InvalidArgument, "level must lie in (0,1]");
    require(res.B >= 10 && static_cast<int>(res.tilde_a_samples.size()) == res.B &&
                static_cast<int>(res.tilde_p_samples.size()) == res.B,
            ErrorKind::InvalidArgument, "intervals need B >= 10 stored replicates");
    const double lo = (1.0 - level) / 2.0;
    const double hi = 1.0 - lo;

    auto bounds = [&](const std::vector<Matrix>& samples, Matrix& lower, Matrix& upper) {
        const Index r = samples.front().rows();
        const Index c = samples.front().cols();
        lower.resize(r, c);
        upper.resize(r, c);
        std::vector<double> buf(samples.size());
        for (Index i = 0; i < r; ++i) {
            for (Index j = 0; j < c; ++j) {
                for (std::size_t b = 0; b < samples.size(); ++b) {
                    buf[b] = samples[b](i, j);
                }
                std::sort(buf.begin(), buf.end());
                lower(i, j) = percentile_sorted(buf, lo);
                upper(i, j) = percentile_sorted(buf, hi);
            }
        }
    };
    Intervals out;
    bounds(res.tilde_a_samples, out.a_lower, out.a_upper);
    bounds(res.tilde_p_samples, out.p_lower, out.p_upper);
    return out;
}

} // namespace srnet
