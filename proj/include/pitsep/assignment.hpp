#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "pitsep/masking.hpp"

namespace pitsep::assignment {

// Bijection output index -> reference index.
using Permutation = std::vector<int>;

// c(i, j) = sum over (t, f) of (est_i - ref_j)^2, unnormalized.
Eigen::MatrixXd pairwise_cost(const masking::StreamMagnitudes& est,
                              const masking::StreamMagnitudes& refs);

// Exhaustive search over all S! assignments; ties broken by the
// lexicographically smallest permutation. Guarded at S <= 8.
std::pair<Permutation, double> best_perm_bruteforce(const Eigen::MatrixXd& cost);

// O(S^3) assignment via the shortest-augmenting-path Hungarian method.
// Total cost always equals brute force; under exact ties the returned
// permutation may differ.
std::pair<Permutation, double> best_perm_hungarian(const Eigen::MatrixXd& cost);

// Brute force for small S, Hungarian above it.
std::pair<Permutation, double> best_perm(const Eigen::MatrixXd& cost);

// min over assignments of the J_x-normalized total cost, with the winning
// permutation (est stream s pairs with refs[perm[s]]).
std::pair<double, Permutation> pit_loss(const masking::StreamMagnitudes& est,
                                        const masking::StreamMagnitudes& refs);

// Gradient of pit_loss w.r.t. est, through the chosen assignment branch:
// 2 (est_s - ref_perm(s)) / (M*F*S).
std::vector<Eigen::ArrayXXd> pit_grad(const masking::StreamMagnitudes& est,
                                      const masking::StreamMagnitudes& refs,
                                      const Permutation& perm);

}  // namespace pitsep::assignment
