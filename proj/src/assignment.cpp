#include "pitsep/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace pitsep::assignment {

Eigen::MatrixXd pairwise_cost(const masking::StreamMagnitudes& est,
                              const masking::StreamMagnitudes& refs) {
  est.check_consistent();
  refs.check_consistent();
  if (est.num_streams() != refs.num_streams() || est.frames() != refs.frames() ||
      est.bins() != refs.bins())
    throw InvalidArgument("pairwise_cost: dimension mismatch");
  const int S = est.num_streams();
  Eigen::MatrixXd c(S, S);
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j)
      c(i, j) = (est.streams[i] - refs.streams[j]).square().sum();
  return c;
}

std::pair<Permutation, double> best_perm_bruteforce(const Eigen::MatrixXd& cost) {
  const int S = static_cast<int>(cost.rows());
  if (cost.cols() != S) throw InvalidArgument("best_perm_bruteforce: non-square cost matrix");
  if (S > 8)
    throw InvalidArgument("best_perm_bruteforce: S > 8, use best_perm_hungarian");

  Permutation perm(S);
  std::iota(perm.begin(), perm.end(), 0);
  Permutation best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < S; ++i) total += cost(i, perm[i]);
    // strict < keeps the lexicographically smallest permutation on ties
    if (total < best_cost) {
      best_cost = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best, best_cost};
}

std::pair<Permutation, double> best_perm_hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw InvalidArgument("best_perm_hungarian: non-square cost matrix");

  // Shortest augmenting path with row/column potentials, 1-based scratch.
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0);  // match[col] = row assigned to col
  std::vector<int> way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = match[j0], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  Permutation perm(n);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    perm[match[j] - 1] = j - 1;
    total += cost(match[j] - 1, j - 1);
  }
  return {perm, total};
}

std::pair<Permutation, double> best_perm(const Eigen::MatrixXd& cost) {
  return cost.rows() <= 4 ? best_perm_bruteforce(cost) : best_perm_hungarian(cost);
}

std::pair<double, Permutation> pit_loss(const masking::StreamMagnitudes& est,
                                        const masking::StreamMagnitudes& refs) {
  const Eigen::MatrixXd c = pairwise_cost(est, refs);
  auto [perm, total] = best_perm(c);
  const double norm = static_cast<double>(est.num_streams()) * est.frames() * est.bins();
  return {total / norm, perm};
}

std::vector<Eigen::ArrayXXd> pit_grad(const masking::StreamMagnitudes& est,
                                      const masking::StreamMagnitudes& refs,
                                      const Permutation& perm) {
  const int S = est.num_streams();
  if (static_cast<int>(perm.size()) != S) throw InvalidArgument("pit_grad: bad permutation size");
  const double norm = static_cast<double>(S) * est.frames() * est.bins();
  std::vector<Eigen::ArrayXXd> out;
  out.reserve(S);
  for (int s = 0; s < S; ++s)
    out.push_back(2.0 * (est.streams[s] - refs.streams[perm[s]]) / norm);
  return out;
}

}  // namespace pitsep::assignment
