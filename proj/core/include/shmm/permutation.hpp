#pragma once

#include <Eigen/Dense>

#include <vector>

namespace shmm {

// All permutations of 0..K-1 in lexicographic order.
std::vector<std::vector<int>> all_permutations(int K);

// Permutation `perm` minimizing Σ_i cost(i, perm[i]), by enumeration. Ties go
// to the lexicographically smallest permutation. Intended for K <= 8.
std::vector<int> best_assignment(const Eigen::MatrixXd& cost);

}  // namespace shmm
