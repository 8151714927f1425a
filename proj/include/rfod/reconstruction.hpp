#pragma once

#include "rfod/matrix.hpp"

#include <vector>

namespace rfod {

/// Output of the reconstruction pass over an m x d test table.
struct ReconstructionResult {
    Matrix x_hat;               // predicted value, or predicted class id for categorical features
    Matrix uncertainty;         // U, nonnegative
    std::vector<Matrix> proba;  // per feature: m x K class probabilities (categorical), empty otherwise

    std::size_t rows() const { return x_hat.rows(); }
    std::size_t cols() const { return x_hat.cols(); }
};

}  // namespace rfod
