#include "shmm/permutation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace shmm {

std::vector<std::vector<int>> all_permutations(int K) {
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

std::vector<int> best_assignment(const Eigen::MatrixXd& cost) {
  const auto K = static_cast<int>(cost.rows());
  if (cost.cols() != K) {
    throw std::invalid_argument("best_assignment: cost must be square");
  }
  if (K > 8) throw std::invalid_argument("best_assignment: K > 8");
  std::vector<int> perm(K), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < K; ++i) c += cost(i, perm[i]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace shmm
