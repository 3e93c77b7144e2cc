#include "abkb/qap.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "abkb/errors.hpp"
#include "abkb/rng.hpp"

namespace abkb {

namespace {

constexpr int kBruteForceLimit = 9;
constexpr double kStartSpread = 3.0;
constexpr double kStochasticTol = 1e-12;
constexpr int kMaxExtraSweeps = 100000;

bool all_finite_nonnegative(const Matrix& m) {
    return m.allFinite() && (m.size() == 0 || m.minCoeff() >= 0.0);
}

// Among perfect matchings on the tight edges of an optimal dual, pick the
// lexicographically smallest row->column map. Every optimal assignment uses
// tight edges only, so this is the lexicographically smallest optimum.
std::vector<int> lexicographic_tight_matching(const std::vector<std::vector<char>>& tight,
                                              std::vector<int> row_to_col) {
    const int n = static_cast<int>(row_to_col.size());
    std::vector<int> col_to_row(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) col_to_row[static_cast<std::size_t>(row_to_col[static_cast<std::size_t>(r)])] = r;
    std::vector<char> col_fixed(static_cast<std::size_t>(n), 0);

    std::vector<int> parent_col(static_cast<std::size_t>(n));
    std::vector<char> seen(static_cast<std::size_t>(n));
    std::vector<int> frontier;

    for (int i = 0; i < n; ++i) {
        const int current = row_to_col[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) {
            if (col_fixed[static_cast<std::size_t>(j)] || !tight[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
                continue;
            if (j == current) break;
            // Row r gives up column j and must reach the column row i frees up,
            // through rows after i along tight edges (BFS over columns).
            const int r = col_to_row[static_cast<std::size_t>(j)];
            std::fill(seen.begin(), seen.end(), 0);
            seen[static_cast<std::size_t>(j)] = 1;
            frontier.assign(1, r);
            int reached = -1;
            // parent_col[y] = column whose row stepped into y (-1 from r)
            for (std::size_t head = 0; head < frontier.size() && reached < 0; ++head) {
                const int x = frontier[head];
                for (int y = 0; y < n; ++y) {
                    if (seen[static_cast<std::size_t>(y)] || col_fixed[static_cast<std::size_t>(y)] ||
                        !tight[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)])
                        continue;
                    seen[static_cast<std::size_t>(y)] = 1;
                    parent_col[static_cast<std::size_t>(y)] =
                        x == r ? -1 : row_to_col[static_cast<std::size_t>(x)];
                    if (y == current) {
                        reached = y;
                        break;
                    }
                    const int next_row = col_to_row[static_cast<std::size_t>(y)];
                    if (next_row > i) frontier.push_back(next_row);
                }
            }
            if (reached < 0) continue;
            // Flip the alternating path: each row on it takes the column it stepped to.
            int y = reached;
            while (y != -1) {
                const int prev = parent_col[static_cast<std::size_t>(y)];
                const int x = prev == -1 ? r : col_to_row[static_cast<std::size_t>(prev)];
                row_to_col[static_cast<std::size_t>(x)] = y;
                col_to_row[static_cast<std::size_t>(y)] = x;
                y = prev;
            }
            row_to_col[static_cast<std::size_t>(i)] = j;
            col_to_row[static_cast<std::size_t>(j)] = i;
            break;
        }
        col_fixed[static_cast<std::size_t>(row_to_col[static_cast<std::size_t>(i)])] = 1;
    }
    return row_to_col;
}

Matrix permutation_matrix(const std::vector<int>& row_to_col) {
    const auto n = static_cast<Eigen::Index>(row_to_col.size());
    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) p(i, row_to_col[static_cast<std::size_t>(i)]) = 1.0;
    return p;
}

double relaxed_objective(const Matrix& flow, const Matrix& cost, const Matrix& p) {
    return (flow.array() * (p * cost * p.transpose()).array()).sum();
}

}  // namespace

void QapInstance::validate() const {
    if (flow.rows() != flow.cols()) throw InvalidArgument("flow matrix must be square");
    if (cost.rows() != cost.cols()) throw InvalidArgument("cost matrix must be square");
    if (flow.rows() > cost.rows())
        throw InvalidArgument("more items (" + std::to_string(flow.rows()) + ") than positions (" +
                              std::to_string(cost.rows()) + ")");
    if (!all_finite_nonnegative(flow)) throw InvalidArgument("flow entries must be finite and >= 0");
    if (!all_finite_nonnegative(cost)) throw InvalidArgument("cost entries must be finite and >= 0");
}

LapSolution solve_lap(const Matrix& cost) {
    if (cost.rows() != cost.cols()) throw InvalidArgument("linear assignment needs a square matrix");
    if (!cost.allFinite()) throw InvalidArgument("linear assignment costs must be finite");
    const int n = static_cast<int>(cost.rows());
    LapSolution out;
    if (n == 0) return out;

    // Shortest augmenting paths with row potentials u and column potentials v
    // (1-based, column 0 is the virtual source).
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
    std::vector<double> minv(static_cast<std::size_t>(n) + 1);
    std::vector<char> used(static_cast<std::size_t>(n) + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;

    const double scale = 1.0 + cost.cwiseAbs().maxCoeff();
    const double eps = 1e-9 * scale;
    std::vector<std::vector<char>> tight(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            tight[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                cost(i, j) - u[static_cast<std::size_t>(i) + 1] - v[static_cast<std::size_t>(j) + 1] <= eps;

    out.assignment = lexicographic_tight_matching(tight, std::move(row_to_col));
    for (int i = 0; i < n; ++i) out.objective += cost(i, out.assignment[static_cast<std::size_t>(i)]);
    return out;
}

double objective(const QapInstance& instance, const std::vector<int>& mapping) {
    const auto n = instance.items();
    const auto m = instance.positions();
    if (static_cast<Eigen::Index>(mapping.size()) != n)
        throw InvalidArgument("mapping size differs from the item count");
    std::vector<char> taken(static_cast<std::size_t>(m), 0);
    for (int pos : mapping) {
        if (pos < 0 || pos >= m) throw InvalidArgument("mapping targets a position outside the instance");
        if (taken[static_cast<std::size_t>(pos)]) throw InvalidArgument("mapping is not injective");
        taken[static_cast<std::size_t>(pos)] = 1;
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            total += instance.flow(i, j) *
                     instance.cost(mapping[static_cast<std::size_t>(i)], mapping[static_cast<std::size_t>(j)]);
    return total;
}

Assignment brute_force(const QapInstance& instance) {
    instance.validate();
    const int n = static_cast<int>(instance.items());
    const int m = static_cast<int>(instance.positions());
    if (m > kBruteForceLimit)
        throw SizeGuard("brute force is limited to m <= " + std::to_string(kBruteForceLimit) +
                        " positions (got " + std::to_string(m) + ")");

    Assignment best;
    best.objective = std::numeric_limits<double>::infinity();
    std::vector<int> mapping(static_cast<std::size_t>(n));
    std::vector<char> taken(static_cast<std::size_t>(m), 0);

    // Depth-first in lexicographic order; only strict improvements replace
    // the incumbent, so the first optimum found (the lexicographically
    // smallest) is kept.
    auto recurse = [&](auto&& self, int item) -> void {
        if (item == n) {
            const double value = objective(instance, mapping);
            const double margin = 1e-12 * std::max(1.0, std::abs(best.objective));
            if (best.mapping.empty() || value < best.objective - margin) {
                best.mapping = mapping;
                best.objective = value;
            }
            return;
        }
        for (int pos = 0; pos < m; ++pos) {
            if (taken[static_cast<std::size_t>(pos)]) continue;
            taken[static_cast<std::size_t>(pos)] = 1;
            mapping[static_cast<std::size_t>(item)] = pos;
            self(self, item + 1);
            taken[static_cast<std::size_t>(pos)] = 0;
        }
    };
    recurse(recurse, 0);
    if (n == 0) best.objective = 0.0;
    return best;
}

Matrix sinkhorn(Matrix m, int sweeps) {
    for (int s = 0; s < sweeps; ++s) {
        m.array().colwise() /= m.rowwise().sum().array();
        m.array().rowwise() /= m.colwise().sum().array();
    }
    return m;
}

Matrix random_doubly_stochastic(Eigen::Index m, Rng& rng, int min_sweeps) {
    // Log-normal entries spread the starts well away from the barycenter.
    Matrix k(m, m);
    for (Eigen::Index c = 0; c < m; ++c)
        for (Eigen::Index r = 0; r < m; ++r) k(r, c) = std::exp(kStartSpread * standard_normal(rng));
    k = sinkhorn(std::move(k), min_sweeps);
    // Column sums are exact after a sweep; keep going until the rows agree.
    for (int s = 0; s < kMaxExtraSweeps; ++s) {
        if ((k.rowwise().sum().array() - 1.0).abs().maxCoeff() <= kStochasticTol) break;
        k = sinkhorn(std::move(k), 1);
    }
    return k;
}

FaqResult solve_faq_detailed(const QapInstance& instance, const FaqOptions& options) {
    instance.validate();
    if (options.restarts < 1) throw InvalidArgument("FAQ needs at least one restart");
    if (options.max_iters < 0) throw InvalidArgument("max_iters must be nonnegative");

    const Eigen::Index n = instance.items();
    const Eigen::Index m = instance.positions();
    Matrix flow = Matrix::Zero(m, m);
    flow.topLeftCorner(n, n) = instance.flow;
    const Matrix& cost = instance.cost;
    const Matrix barycenter = Matrix::Constant(m, m, m > 0 ? 1.0 / static_cast<double>(m) : 0.0);

    FaqResult result;
    result.best.objective = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < options.restarts; ++restart) {
        Matrix p = barycenter;
        if (restart > 0) {
            Rng rng = make_rng(options.seed, static_cast<std::uint64_t>(restart));
            p = random_doubly_stochastic(m, rng, options.sinkhorn_sweeps);
        }

        double f = relaxed_objective(flow, cost, p);
        if (options.observer) options.observer(restart, 0, p, f);
        for (int iter = 1; iter <= options.max_iters; ++iter) {
            const Matrix grad = flow * p * cost.transpose() + flow.transpose() * p * cost;
            const Matrix direction = permutation_matrix(solve_lap(grad).assignment) - p;
            // f(p + t d) = f(p) + t * lin + t^2 * quad
            const double lin = (grad.array() * direction.array()).sum();
            const double quad =
                (flow.array() * (direction * cost * direction.transpose()).array()).sum();
            double step;
            if (quad > 0.0)
                step = std::clamp(-lin / (2.0 * quad), 0.0, 1.0);
            else
                step = (quad + lin < 0.0) ? 1.0 : 0.0;
            if (step > 0.0) p += step * direction;
            const double f_next = step > 0.0 ? relaxed_objective(flow, cost, p) : f;
            assert(f_next <= f + 1e-9 * std::max(1.0, std::abs(f)));
            if (options.observer) options.observer(restart, iter, p, f_next);
            const double change = std::abs(f - f_next) / std::max(std::abs(f), 1e-300);
            f = f_next;
            if (step == 0.0 || change < options.tol) break;
        }

        const auto projection = solve_lap(-p).assignment;
        Assignment candidate;
        candidate.mapping.assign(projection.begin(), projection.begin() + n);
        candidate.objective = objective(instance, candidate.mapping);
        result.restart_objectives.push_back(candidate.objective);
        if (candidate.objective < result.best.objective) {
            result.best = std::move(candidate);
            result.best_restart = restart;
        }
    }
    return result;
}

Assignment solve_faq(const QapInstance& instance, const FaqOptions& options) {
    return solve_faq_detailed(instance, options).best;
}

nlohmann::json instance_to_json(const QapInstance& instance) {
    auto rows = [](const Matrix& mat) {
        nlohmann::json out = nlohmann::json::array();
        for (Eigen::Index i = 0; i < mat.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < mat.cols(); ++j) row.push_back(mat(i, j));
            out.push_back(std::move(row));
        }
        return out;
    };
    return {{"n", instance.items()},
            {"m", instance.positions()},
            {"flow", rows(instance.flow)},
            {"cost", rows(instance.cost)}};
}

QapInstance instance_from_json(const nlohmann::json& doc) {
    auto matrix = [](const nlohmann::json& rows, Eigen::Index size, const char* name) {
        if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != size)
            throw InvalidArgument(std::string(name) + " must have " + std::to_string(size) + " rows");
        Matrix out(size, size);
        for (Eigen::Index i = 0; i < size; ++i) {
            const auto& row = rows[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != size)
                throw InvalidArgument(std::string(name) + " must be square");
            for (Eigen::Index j = 0; j < size; ++j) out(i, j) = row[static_cast<std::size_t>(j)].get<double>();
        }
        return out;
    };
    try {
        QapInstance instance;
        instance.flow = matrix(doc.at("flow"), doc.at("n").get<Eigen::Index>(), "flow");
        instance.cost = matrix(doc.at("cost"), doc.at("m").get<Eigen::Index>(), "cost");
        instance.validate();
        return instance;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed QAP instance: ") + e.what());
    }
}

}  // namespace abkb
