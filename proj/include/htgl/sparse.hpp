#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace htgl {

/// Sparse matrix in coordinate form. Entries are unique (row, col) pairs;
/// weights are constants (never part of the gradient).
struct SparseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    struct Entry {
        std::uint32_t row;
        std::uint32_t col;
        double weight;
    };
    std::vector<Entry> entries;

    /// Validates bounds and (row, col) uniqueness; throws on violation.
    void validate() const;

    /// Dense row-major expansion, mainly for oracles and tests.
    std::vector<double> densify() const;
};

}  // namespace htgl
