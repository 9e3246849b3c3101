#pragma once

#include <string>
#include <vector>

#include "core.hpp"

namespace srnet {

/// n x T log-ratio expression values with an explicit observation mask.
/// Values at unobserved positions are ignored everywhere.
struct ExpressionMatrix {
    Matrix values;
    Mask observed;
    std::vector<std::string> gene_ids;
    std::vector<std::string> experiment_ids;

    Index genes() const { return values.rows(); }
    Index experiments() const { return values.cols(); }

    /// Fully observed matrix with generated ids.
    static ExpressionMatrix dense(Matrix values)
    {
        ExpressionMatrix e;
        e.observed = Mask::Constant(values.rows(), values.cols(), true);
        for (Index i = 0; i < values.rows(); ++i) {
            e.gene_ids.push_back("g" + std::to_string(i + 1));
        }
        for (Index t = 0; t < values.cols(); ++t) {
            e.experiment_ids.push_back("e" + std::to_string(t + 1));
        }
        e.values = std::move(values);
        return e;
    }

    void validate() const
    {
        require(values.rows() >= 1 && values.cols() >= 1, ErrorKind::EmptyInput, "expression matrix is empty");
        require(observed.rows() == values.rows() && observed.cols() == values.cols(), ErrorKind::ShapeMismatch,
                "observation mask shape differs from values");
        for (Index i = 0; i < values.rows(); ++i) {
            for (Index t = 0; t < values.cols(); ++t) {
                if (observed(i, t)) {
                    require(std::isfinite(values(i, t)), ErrorKind::NonFiniteInput,
                            "non-finite observed expression value");
                }
            }
        }
        for (Index i = 0; i < values.rows(); ++i) {
            require(observed.row(i).any(), ErrorKind::EmptyRowOrColumn, "gene row " + std::to_string(i) + " has no observed entries");
        }
        for (Index t = 0; t < values.cols(); ++t) {
            require(observed.col(t).any(), ErrorKind::EmptyRowOrColumn,
                    "experiment column " + std::to_string(t) + " has no observed entries");
        }
    }
};

/// n x L edge probabilities in [0, 1].
struct PriorMatrix {
    Matrix probs;
    std::vector<std::string> gene_ids;
    std::vector<std::string> tf_ids;

    Index genes() const { return probs.rows(); }
    Index factors() const { return probs.cols(); }

    static PriorMatrix from(Matrix probs)
    {
        PriorMatrix p;
        for (Index i = 0; i < probs.rows(); ++i) {
            p.gene_ids.push_back("g" + std::to_string(i + 1));
        }
        for (Index j = 0; j < probs.cols(); ++j) {
            p.tf_ids.push_back("tf" + std::to_string(j + 1));
        }
        p.probs = std::move(probs);
        return p;
    }

    void validate() const
    {
        for (Index i = 0; i < probs.rows(); ++i) {
            for (Index j = 0; j < probs.cols(); ++j) {
                const double v = probs(i, j);
                require(v >= 0.0 && v <= 1.0, ErrorKind::OutOfRange,
                        "prior entry (" + std::to_string(i) + "," + std::to_string(j) + ") = " + std::to_string(v) +
                            " outside [0,1]");
            }
        }
        for (Index j = 0; j < probs.cols(); ++j) {
            require((probs.col(j).array() > 0.0).any(), ErrorKind::OutOfRange,
                    "prior column " + std::to_string(j) + " has no positive entry");
        }
    }
};

} // namespace srnet
