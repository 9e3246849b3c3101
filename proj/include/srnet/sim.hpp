#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "core.hpp"
#include "data.hpp"
#include "model.hpp"
#include "tuning.hpp"

namespace srnet {

struct SimConfig {
    double s_A = 0.2;
    double s_P = 0.1;
    double s_N = 0.2;
    double rho = 0.6;
    std::uint64_t seed = 0;

    void validate() const
    {
        require(s_A >= 0.0 && s_P >= 0.0 && s_N >= 0.0, ErrorKind::InvalidArgument, "noise scales must be >= 0");
        require(rho >= 0.0 && rho <= 1.0, ErrorKind::InvalidArgument, "rho must lie in [0,1]");
    }
};

struct SimulatedDataset {
    Matrix A_true;
    Matrix P_true;
    ExpressionMatrix E;
    PriorMatrix pi;
};

/// Population variance over all entries.
inline double entry_variance(const Eigen::Ref<const Matrix>& m)
{
    if (m.size() == 0) {
        return 0.0;
    }
    const double mean = m.mean();
    return (m.array() - mean).square().sum() / static_cast<double>(m.size());
}

/**
 * Ground-truth generator around a base fit:
 *   A~ = base_A + s_A N(0, var(base_A)),  P~ = base_P + s_P N(0, var(row of base_P)),
 *   A~ zeroed where pi = 0, then floor(rho m) of the m entries with pi = 0.5 zeroed,
 *   E = A~ P~ + s_N N(0, 1), fully observed.
 */
inline SimulatedDataset simulate_dataset(const Matrix& base_A, const Matrix& base_P, const PriorMatrix& pi,
                                         const SimConfig& cfg)
{
    cfg.validate();
    require(base_A.rows() == pi.genes() && base_A.cols() == pi.factors(), ErrorKind::ShapeMismatch,
            "base_A must match the prior shape");
    require(base_P.rows() == base_A.cols(), ErrorKind::ShapeMismatch, "base_P rows must match base_A columns");
    pi.validate();
    require(base_A.allFinite() && base_P.allFinite(), ErrorKind::NonFiniteInput, "base_A and base_P must be finite");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = base_A.rows();
    const Index L = base_A.cols();
    const Index T = base_P.cols();

    SimulatedDataset out;
    const double sd_a = std::sqrt(entry_variance(base_A));
    out.A_true = base_A;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < L; ++j) {
            out.A_true(i, j) += cfg.s_A * sd_a * normal(rng);
        }
    }
    out.P_true = base_P;
    for (Index j = 0; j < L; ++j) {
        const double sd_p = std::sqrt(entry_variance(base_P.row(j)));
        for (Index t = 0; t < T; ++t) {
            out.P_true(j, t) += cfg.s_P * sd_p * normal(rng);
        }
    }

    std::vector<std::pair<Index, Index>> candidates;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < L; ++j) {
            if (pi.probs(i, j) == 0.0) {
                out.A_true(i, j) = 0.0;
            } else if (pi.probs(i, j) == 0.5) {
                candidates.emplace_back(i, j);
            }
        }
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    const auto drop = static_cast<std::size_t>(std::floor(cfg.rho * static_cast<double>(candidates.size())));
    for (std::size_t k = 0; k < drop; ++k) {
        out.A_true(candidates[k].first, candidates[k].second) = 0.0;
    }

    Matrix noise(n, T);
    for (Index i = 0; i < n; ++i) {
        for (Index t = 0; t < T; ++t) {
            noise(i, t) = normal(rng);
        }
    }
    Matrix values = out.A_true * out.P_true;
    values += cfg.s_N * noise;
    require(values.allFinite(), ErrorKind::NonFiniteInput, "simulated expression is not finite");
    out.E = ExpressionMatrix::dense(std::move(values));
    if (static_cast<Index>(pi.gene_ids.size()) == n) {
        out.E.gene_ids = pi.gene_ids;
    }
    out.pi = pi;
    return out;
}

struct PlantSpec {
    Index genes = 200;
    Index factors = 10;
    std::vector<Index> group_sizes{12, 7, 5, 11};
    double density = 0.08;
    double documented_fraction = 0.14;
    double group_activity = 0.7;
    Index min_per_factor = 3;
    std::uint64_t seed = 0;
};

struct PlantedBase {
    Matrix A;
    Matrix P;
    PriorMatrix pi;
    GroupPartition groups;
};

/**
 * Synthetic stand-in for a fitted network: a sparse prior support with a
 * documented (pi = 1) subset and the rest at 0.5, connection strengths of
 * magnitude U(0.5, 1.5) with random sign on the support, and activities that
 * are N(0, 1) inside groups that are switched on and 0 elsewhere.
 */
inline PlantedBase plant_base(const PlantSpec& spec)
{
    require(spec.genes >= 1 && spec.factors >= 1, ErrorKind::InvalidArgument, "empty planted network");
    require(spec.density > 0.0 && spec.density <= 1.0, ErrorKind::InvalidArgument, "density must lie in (0,1]");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = spec.genes;
    const Index L = spec.factors;

    Matrix pi = Matrix::Zero(n, L);
    for (Index j = 0; j < L; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (unit(rng) < spec.density) {
                pi(i, j) = 0.5;
            }
        }
        while ((pi.col(j).array() > 0.0).count() < std::min(spec.min_per_factor, n)) {
            pi(static_cast<Index>(unit(rng) * static_cast<double>(n)) % n, j) = 0.5;
        }
    }
    for (Index j = 0; j < L; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (pi(i, j) > 0.0 && unit(rng) < spec.documented_fraction) {
                pi(i, j) = 1.0;
            }
        }
    }

    PlantedBase out;
    out.A = Matrix::Zero(n, L);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < L; ++j) {
            if (pi(i, j) > 0.0) {
                const double mag = 0.5 + unit(rng);
                out.A(i, j) = unit(rng) < 0.5 ? -mag : mag;
            }
        }
    }
    out.groups = GroupPartition::blocks(spec.group_sizes);
    const Index T = out.groups.size();
    out.P = Matrix::Zero(L, T);
    for (Index j = 0; j < L; ++j) {
        bool any = false;
        for (int k = 0; k < out.groups.group_count(); ++k) {
            const bool on = unit(rng) < spec.group_activity;
            any = any || on;
            for (Index t : out.groups.members(k)) {
                const double z = normal(rng);
                if (on) {
                    out.P(j, t) = z;
                }
            }
        }
        if (!any) {
            for (Index t : out.groups.members(0)) {
                out.P(j, t) = normal(rng);
            }
        }
    }
    out.pi = PriorMatrix::from(std::move(pi));
    return out;
}

struct Alignment {
    /// est_for_true[j] = column of the estimate matched to true column j.
    std::vector<Index> est_for_true;
    std::vector<int> sign;
};

inline double pearson(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y)
{
    const double mx = x.mean();
    const double my = y.mean();
    const Vector dx = x.array() - mx;
    const Vector dy = y.array() - my;
    const double sx = dx.squaredNorm();
    const double sy = dy.squaredNorm();
    if (sx <= 0.0 || sy <= 0.0) {
        return 0.0;
    }
    return dx.dot(dy) / std::sqrt(sx * sy);
}

/// Greedy matching: repeatedly pairs the remaining (true, estimate) columns
/// with the largest |Pearson correlation|, ties to the lowest (true, est) index.
inline Alignment sequential_align(const Matrix& A_est, const Matrix& A_true)
{
    require(A_est.rows() == A_true.rows() && A_est.cols() == A_true.cols(), ErrorKind::ShapeMismatch,
            "estimate and truth shapes differ");
    const Index L = A_true.cols();
    Matrix corr(L, L);
    for (Index j = 0; j < L; ++j) {
        for (Index k = 0; k < L; ++k) {
            corr(j, k) = pearson(A_true.col(j), A_est.col(k));
        }
    }
    Alignment out;
    out.est_for_true.assign(static_cast<std::size_t>(L), -1);
    out.sign.assign(static_cast<std::size_t>(L), 1);
    std::vector<bool> true_used(static_cast<std::size_t>(L), false);
    std::vector<bool> est_used(static_cast<std::size_t>(L), false);
    for (Index round = 0; round < L; ++round) {
        Index bj = -1;
        Index bk = -1;
        double best = -1.0;
        for (Index j = 0; j < L; ++j) {
            if (true_used[static_cast<std::size_t>(j)]) {
                continue;
            }
            for (Index k = 0; k < L; ++k) {
                if (est_used[static_cast<std::size_t>(k)]) {
                    continue;
                }
                const double v = std::abs(corr(j, k));
                if (v > best) {
                    best = v;
                    bj = j;
                    bk = k;
                }
            }
        }
        true_used[static_cast<std::size_t>(bj)] = true;
        est_used[static_cast<std::size_t>(bk)] = true;
        out.est_for_true[static_cast<std::size_t>(bj)] = bk;
        out.sign[static_cast<std::size_t>(bj)] = corr(bj, bk) < 0.0 ? -1 : 1;
    }
    return out;
}

/// Reorders (and sign-flips) estimate columns into the truth's column order.
inline Matrix apply_alignment(const Matrix& A_est, const Alignment& al)
{
    Matrix out(A_est.rows(), A_est.cols());
    for (Index j = 0; j < A_est.cols(); ++j) {
        out.col(j) = static_cast<double>(al.sign[static_cast<std::size_t>(j)]) *
                     A_est.col(al.est_for_true[static_cast<std::size_t>(j)]);
    }
    return out;
}

struct Rates {
    std::optional<double> fpr;
    std::optional<double> tpr;
};

/// FPR and TPR restricted to prior-0.5 cells; undefined when a denominator is 0.
inline Rates confusion_rates(const Matrix& A_est, const Matrix& A_true, const Matrix& pi)
{
    require(A_est.rows() == A_true.rows() && A_est.cols() == A_true.cols() && pi.rows() == A_true.rows() &&
                pi.cols() == A_true.cols(),
            ErrorKind::ShapeMismatch, "estimate, truth and prior shapes differ");
    Index fp = 0, neg = 0, tp = 0, pos = 0;
    for (Index i = 0; i < A_true.rows(); ++i) {
        for (Index j = 0; j < A_true.cols(); ++j) {
            if (pi(i, j) != 0.5) {
                continue;
            }
            const bool est = A_est(i, j) != 0.0;
            if (A_true(i, j) == 0.0) {
                ++neg;
                fp += est ? 1 : 0;
            } else {
                ++pos;
                tp += est ? 1 : 0;
            }
        }
    }
    Rates r;
    if (neg > 0) {
        r.fpr = static_cast<double>(fp) / static_cast<double>(neg);
    }
    if (pos > 0) {
        r.tpr = static_cast<double>(tp) / static_cast<double>(pos);
    }
    return r;
}

struct RocPoint {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::optional<double> fpr;
    std::optional<double> tpr;
};

/// Fits every grid point with the prior fully shrunk (alpha = 1), aligns the
/// estimate to the truth and scores it. Sorted by FPR, undefined rates last.
inline std::vector<RocPoint> roc_sweep(const SimulatedDataset& data, const std::vector<GridPoint>& grid,
                                       const GroupPartition& groups, const FitConfig& cfg, unsigned threads = 1)
{
    require(!grid.empty(), ErrorKind::EmptyInput, "lambda grid is empty");
    const Matrix pi_tilde = shrink_prior(data.pi.probs, 1.0);
    std::vector<RocPoint> out(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t g) {
        FitConfig c = cfg;
        c.lambda1 = grid[g].lambda1;
        c.lambda2 = grid[g].lambda2;
        const FitResult fit = fit_best(data.E, pi_tilde, groups, c);
        const Matrix aligned = apply_alignment(fit.A, sequential_align(fit.A, data.A_true));
        const Rates r = confusion_rates(aligned, data.A_true, data.pi.probs);
        out[g] = {grid[g].lambda1, grid[g].lambda2, r.fpr, r.tpr};
    });
    std::stable_sort(out.begin(), out.end(), [](const RocPoint& a, const RocPoint& b) {
        if (a.fpr.has_value() != b.fpr.has_value()) {
            return a.fpr.has_value();
        }
        return a.fpr.has_value() && *a.fpr < *b.fpr;
    });
    return out;
}

/// Promotes n_promote randomly chosen prior-0 entries to 0.5 and demotes every
/// prior-1 entry to 0.5.
inline PriorMatrix perturb_prior(const PriorMatrix& pi, Index n_promote, std::uint64_t seed)
{
    require(n_promote >= 0, ErrorKind::InvalidArgument, "n_promote must be >= 0");
    std::vector<std::pair<Index, Index>> zeros;
    for (Index i = 0; i < pi.genes(); ++i) {
        for (Index j = 0; j < pi.factors(); ++j) {
            if (pi.probs(i, j) == 0.0) {
                zeros.emplace_back(i, j);
            }
        }
    }
    require(static_cast<Index>(zeros.size()) >= n_promote, ErrorKind::TooFewZeros,
            "only " + std::to_string(zeros.size()) + " zero entries available to promote");
    std::mt19937_64 rng(seed);
    std::shuffle(zeros.begin(), zeros.end(), rng);
    PriorMatrix out = pi;
    for (Index k = 0; k < n_promote; ++k) {
        out.probs(zeros[static_cast<std::size_t>(k)].first, zeros[static_cast<std::size_t>(k)].second) = 0.5;
    }
    for (Index i = 0; i < pi.genes(); ++i) {
        for (Index j = 0; j < pi.factors(); ++j) {
            if (pi.probs(i, j) == 1.0) {
                out.probs(i, j) = 0.5;
            }
        }
    }
    return out;
}

enum class EdgeCategory : unsigned char { Excluded, Documented, Suggested, None };

using CategoryMatrix = Eigen::Matrix<EdgeCategory, Eigen::Dynamic, Eigen::Dynamic>;

/// Categories implied by an original prior and its perturbation: pi = 1 is
/// documented, 0 < pi < 1 suggested, and promoted zeros carry no evidence.
inline CategoryMatrix categorize_edges(const Matrix& original, const Matrix& perturbed)
{
    require(original.rows() == perturbed.rows() && original.cols() == perturbed.cols(), ErrorKind::ShapeMismatch,
            "prior shapes differ");
    CategoryMatrix c = CategoryMatrix::Constant(original.rows(), original.cols(), EdgeCategory::Excluded);
    for (Index i = 0; i < original.rows(); ++i) {
        for (Index j = 0; j < original.cols(); ++j) {
            if (original(i, j) == 1.0) {
                c(i, j) = EdgeCategory::Documented;
            } else if (original(i, j) > 0.0) {
                c(i, j) = EdgeCategory::Suggested;
            } else if (perturbed(i, j) > 0.0) {
                c(i, j) = EdgeCategory::None;
            }
        }
    }
    return c;
}

struct CategoryFractions {
    std::optional<double> documented;
    std::optional<double> suggested;
    std::optional<double> none;
};

/// Fraction of nonzero connections per evidence category; undefined for an
/// empty category. Excluded cells are ignored.
inline CategoryFractions category_report(const Matrix& A_final, const CategoryMatrix& categories)
{
    require(A_final.rows() == categories.rows() && A_final.cols() == categories.cols(), ErrorKind::ShapeMismatch,
            "category labels must match A");
    std::array<Index, 4> total{};
    std::array<Index, 4> nonzero{};
    for (Index i = 0; i < A_final.rows(); ++i) {
        for (Index j = 0; j < A_final.cols(); ++j) {
            const auto c = static_cast<std::size_t>(categories(i, j));
            ++total[c];
            nonzero[c] += A_final(i, j) != 0.0 ? 1 : 0;
        }
    }
    auto frac = [&](EdgeCategory c) -> std::optional<double> {
        const auto k = static_cast<std::size_t>(c);
        if (total[k] == 0) {
            return std::nullopt;
        }
        return static_cast<double>(nonzero[k]) / static_cast<double>(total[k]);
    };
    return {frac(EdgeCategory::Documented), frac(EdgeCategory::Suggested), frac(EdgeCategory::None)};
}

} // namespace srnet
