#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace epiforge {

// Hungarian algorithm (shortest augmenting paths, O(n^3)) on a square matrix.
// Returns assignment[row] = column maximizing the summed score.
std::vector<std::size_t> max_weight_assignment(const Eigen::MatrixXd& score);

}  // namespace epiforge
