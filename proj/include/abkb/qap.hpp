#pragma once

// Quadratic assignment: place n items on m >= n positions minimising
//   sum_{i,j} flow(i,j) * cost(pos(i), pos(j)),
// diagonal terms included.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "abkb/rng.hpp"

namespace abkb {

using Matrix = Eigen::MatrixXd;

struct QapInstance {
    Matrix flow;  ///< n x n, nonnegative
    Matrix cost;  ///< m x m, nonnegative

    /// Throws InvalidArgument unless shapes agree, n <= m and every entry is
    /// finite and nonnegative.
    void validate() const;
    Eigen::Index items() const noexcept { return flow.rows(); }
    Eigen::Index positions() const noexcept { return cost.rows(); }
};

struct Assignment {
    std::vector<int> mapping;  ///< item -> position
    double objective = 0.0;
};

struct LapSolution {
    std::vector<int> assignment;  ///< row -> column
    double objective = 0.0;
};

/// Exact linear assignment (shortest augmenting path with potentials).
/// Among optimal permutations the lexicographically smallest is returned.
LapSolution solve_lap(const Matrix& cost);

/// sum_{i,j} flow(i,j) * cost(map(i), map(j)). Throws on non-injective maps.
double objective(const QapInstance& instance, const std::vector<int>& mapping);

/// Exhaustive search over injections; m <= 9 or SizeGuard is thrown.
Assignment brute_force(const QapInstance& instance);

struct FaqOptions {
    int restarts = 10;
    int max_iters = 30;
    double tol = 1e-6;           ///< relative objective change
    int sinkhorn_sweeps = 20;
    std::uint64_t seed = 0;

    /// Called after every Frank-Wolfe iterate with (restart, iteration,
    /// doubly stochastic iterate, relaxed objective). Iteration 0 is the start.
    std::function<void(int, int, const Matrix&, double)> observer;
};

struct FaqResult {
    Assignment best;
    int best_restart = 0;
    std::vector<double> restart_objectives;
};

/// Fast approximate QAP: Frank-Wolfe over the Birkhoff polytope, one
/// barycenter start plus random doubly stochastic starts, projected back to a
/// permutation with a linear assignment. The flow is zero-padded to m x m.
FaqResult solve_faq_detailed(const QapInstance& instance, const FaqOptions& options);
Assignment solve_faq(const QapInstance& instance, const FaqOptions& options = {});

/// Alternating row/column normalisation.
Matrix sinkhorn(Matrix m, int sweeps);

/// Sinkhorn-normalised log-normal matrix: at least `min_sweeps` sweeps, then
/// more until row and column sums are 1 to 1e-12.
Matrix random_doubly_stochastic(Eigen::Index m, Rng& rng, int min_sweeps);

nlohmann::json instance_to_json(const QapInstance& instance);
QapInstance instance_from_json(const nlohmann::json& doc);

}  // namespace abkb
