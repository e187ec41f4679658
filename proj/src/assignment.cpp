#include "epiforge/assignment.hpp"

#include <limits>

#include "epiforge/error.hpp"

namespace epiforge {

std::vector<std::size_t> max_weight_assignment(const Eigen::MatrixXd& score) {
  if (score.rows() != score.cols()) {
    throw Error(ErrorKind::InvalidArgument, "assignment needs a square matrix");
  }
  const auto n = static_cast<std::size_t>(score.rows());
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();

  // Minimize cost = -score. Potentials u (rows), v (columns); 1-based with a
  // virtual column 0 as in the classical formulation.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t r = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cost = -score(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - 1));
        const double cur = cost - u[r] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<std::size_t> assignment(n);
  for (std::size_t c = 1; c <= n; ++c) assignment[match[c] - 1] = c - 1;
  return assignment;
}

}  // namespace epiforge
