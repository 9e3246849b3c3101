#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace srnet {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BoolVector = Eigen::Array<bool, Eigen::Dynamic, 1>;

enum class ErrorKind {
    InvalidArgument,
    ShapeMismatch,
    EmptyInput,
    EmptyObservedSet,
    NonFiniteInput,
    OutOfRange,
    PriorViolation,
    Diverged,
    InfeasibleFolds,
    TooFewZeros,
    ParseError,
    DuplicateId,
    EmptyRowOrColumn,
    ZeroVariance,
    UnknownId,
    UncoveredExperiment,
    IoError,
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyObservedSet: return "EmptyObservedSet";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::PriorViolation: return "PriorViolation";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::InfeasibleFolds: return "InfeasibleFolds";
    case ErrorKind::TooFewZeros: return "TooFewZeros";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::EmptyRowOrColumn: return "EmptyRowOrColumn";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::UncoveredExperiment: return "UncoveredExperiment";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Numerical failures (as opposed to bad input) map to a distinct CLI exit code.
inline bool is_numerical(ErrorKind kind)
{
    return kind == ErrorKind::EmptyObservedSet || kind == ErrorKind::NonFiniteInput ||
           kind == ErrorKind::Diverged;
}

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what)
{
    if (!cond) {
        throw Error(kind, what);
    }
}

/// Partition of experiment (column) indices into K non-empty groups.
/// Labels are stored zero-based.
class GroupPartition
{
public:
    GroupPartition() = default;

    explicit GroupPartition(std::vector<int> labels) : labels_(std::move(labels))
    {
        int k = 0;
        for (int l : labels_) {
            require(l >= 0, ErrorKind::InvalidArgument, "group labels must be non-negative");
            k = std::max(k, l + 1);
        }
        members_.assign(static_cast<std::size_t>(k), {});
        for (std::size_t t = 0; t < labels_.size(); ++t) {
            members_[static_cast<std::size_t>(labels_[t])].push_back(static_cast<Index>(t));
        }
        for (const auto& m : members_) {
            require(!m.empty(), ErrorKind::InvalidArgument, "group labels must cover 0..K-1");
        }
    }

    /// Every experiment in one group.
    static GroupPartition single(Index T) { return GroupPartition(std::vector<int>(static_cast<std::size_t>(T), 0)); }

    /// One group per experiment.
    static GroupPartition singletons(Index T)
    {
        std::vector<int> labels(static_cast<std::size_t>(T));
        for (std::size_t t = 0; t < labels.size(); ++t) {
            labels[t] = static_cast<int>(t);
        }
        return GroupPartition(std::move(labels));
    }

    /// Consecutive blocks of the given sizes.
    static GroupPartition blocks(const std::vector<Index>& sizes)
    {
        std::vector<int> labels;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            labels.insert(labels.end(), static_cast<std::size_t>(sizes[k]), static_cast<int>(k));
        }
        return GroupPartition(std::move(labels));
    }

    Index size() const { return static_cast<Index>(labels_.size()); }
    int group_count() const { return static_cast<int>(members_.size()); }
    int label(Index t) const { return labels_[static_cast<std::size_t>(t)]; }
    const std::vector<int>& labels() const { return labels_; }
    const std::vector<Index>& members(int k) const { return members_[static_cast<std::size_t>(k)]; }

private:
    std::vector<int> labels_;
    std::vector<std::vector<Index>> members_;
};

inline double soft_threshold(double z, double threshold)
{
    if (z > threshold) {
        return z - threshold;
    }
    if (z < -threshold) {
        return z + threshold;
    }
    return 0.0;
}

inline bool all_finite(const Matrix& m)
{
    return m.allFinite();
}

inline void require_shape(const Matrix& m, Index rows, Index cols, const char* what)
{
    require(m.rows() == rows && m.cols() == cols, ErrorKind::ShapeMismatch,
            std::string(what) + " expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

/// splitmix64 finalizer; derives independent stream seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t sub = 0)
{
    return mix_seed(mix_seed(base ^ mix_seed(stream)) + sub);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// processed exactly once; the first exception thrown is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= n || failure) {
                    return;
                }
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    const auto count = std::min<std::size_t>(threads, n);
    pool.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        pool.emplace_back(worker);
    }
    for (auto& th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace srnet
