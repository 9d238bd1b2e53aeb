#include "htgl/sparse.hpp"

#include <set>
#include <stdexcept>
#include <string>

namespace htgl {

void SparseMatrix::validate() const {
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& e : entries) {
        if (e.row >= rows || e.col >= cols) {
            throw std::invalid_argument("sparse entry (" + std::to_string(e.row) + ", " +
                                        std::to_string(e.col) + ") out of bounds for " +
                                        std::to_string(rows) + " x " + std::to_string(cols));
        }
        if (!seen.insert({e.row, e.col}).second) {
            throw std::invalid_argument("duplicate sparse entry (" + std::to_string(e.row) +
                                        ", " + std::to_string(e.col) + ")");
        }
    }
}

std::vector<double> SparseMatrix::densify() const {
    std::vector<double> out(rows * cols, 0.0);
    for (const auto& e : entries) {
        out[static_cast<std::size_t>(e.row) * cols + e.col] = e.weight;
    }
    return out;
}

}  // namespace htgl
