#ifndef RPML_GRAPH_CLUSTER_HPP_
#define RPML_GRAPH_CLUSTER_HPP_

#include <algorithm>
#include <iostream>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <vector>

#include "rpml/common.hpp"
#include "rpml/parallel.hpp"

namespace rpml {

struct GraphEdge {
    int target;
    double affinity;   // Gaussian kernel weight, >= 0
    double transition; // affinity / weighted out-degree
};

// Weighted directed k-NN graph with random-walk data. `omega` stays empty
// until stationary_distribution fills it.
struct GraphModel {
    int n = 0;
    std::vector<std::vector<GraphEdge>> neighbors; // out-edges, nearest first
    Vector out_degree;                             // d_i = sum of outgoing affinities
    Vector omega;                                  // stationary distribution
    double kernel_sigma = 0.0;
};

struct ClusterConfig {
    int k = 50;
    double gamma = 100.0;   // relevancy scale
    double epsilon = 0.65;  // relevancy threshold
    double damping = 0.01;  // random-walk teleport factor
    double tol = 1e-12;
    int max_power_iters = 10000;
    int threads = 1;
};

struct ClusterAssignment {
    Labels labels;                    // contiguous 0..C-1, order of first appearance
    std::vector<int> mode_of;         // authority mode reached from each node
    std::vector<int> ascent_path_len; // steps from node to its mode
    int cluster_count = 0;
};

/**
 * Builds the directed k-NN graph: exact brute-force neighbors, Gaussian
 * affinities exp(-||xi - xj||^2 / sigma^2) with sigma the median k-th
 * neighbor distance, and row-stochastic transition probabilities.
 */
inline GraphModel build_knn_graph(const Matrix& X, int k, int threads = 1) {
    const int n = static_cast<int>(X.rows());
    if (k < 1)
        throw UsageError("k must be >= 1, got " + std::to_string(k));
    if (k >= n)
        throw UsageError("k must be < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) +
                         ")");
    if (!X.allFinite())
        throw DataError("feature matrix contains non-finite values");

    GraphModel g;
    g.n = n;
    g.neighbors.assign(static_cast<std::size_t>(n), {});
    g.out_degree = Vector::Zero(n);

    const Vector sq_norms = X.rowwise().squaredNorm();
    std::vector<double> kth_dist(static_cast<std::size_t>(n));
    std::vector<std::vector<std::pair<double, int>>> nearest(static_cast<std::size_t>(n));

    parallel_for(n, threads, [&](int i) {
        // ||xi - xj||^2 = |xi|^2 + |xj|^2 - 2 xi.xj
        Vector d2 = sq_norms.array() + sq_norms(i) - 2.0 * (X * X.row(i).transpose()).array();
        std::vector<std::pair<double, int>> order;
        order.reserve(static_cast<std::size_t>(n - 1));
        for (int j = 0; j < n; ++j) {
            if (j == i)
                continue;
            order.emplace_back(std::max(d2(j), 0.0), j);
        }
        std::partial_sort(order.begin(), order.begin() + k, order.end());
        order.resize(static_cast<std::size_t>(k));
        kth_dist[static_cast<std::size_t>(i)] = std::sqrt(order.back().first);
        nearest[static_cast<std::size_t>(i)] = std::move(order);
    });

    std::vector<double> kth_sorted = kth_dist;
    std::nth_element(kth_sorted.begin(), kth_sorted.begin() + (n - 1) / 2, kth_sorted.end());
    double sigma = kth_sorted[static_cast<std::size_t>((n - 1) / 2)];
    if (sigma == 0.0) {
        std::cerr << "warning: all points identical (sigma = 0); using affinity 1 on all edges\n";
    }
    g.kernel_sigma = sigma;

    for (int i = 0; i < n; ++i) {
        auto& edges = g.neighbors[static_cast<std::size_t>(i)];
        edges.reserve(static_cast<std::size_t>(k));
        double degree = 0.0;
        for (const auto& [d2, j] : nearest[static_cast<std::size_t>(i)]) {
            const double affinity = sigma > 0.0 ? std::exp(-d2 / (sigma * sigma)) : 1.0;
            edges.push_back({j, affinity, 0.0});
            degree += affinity;
        }
        g.out_degree(i) = degree;
        for (auto& e : edges)
            e.transition = e.affinity / degree;
    }
    return g;
}

/**
 * Stationary distribution of the damped walk P_hat = (1-damping) P +
 * damping/n * 1 1^T by power iteration; returns omega with
 * ||omega P_hat - omega||_1 <= tol.
 */
inline Vector stationary_distribution(const GraphModel& g, double damping, double tol,
                                      int max_iters) {
    const int n = g.n;
    Vector omega = Vector::Constant(n, 1.0 / n);
    Vector next(n);
    double residual = 0.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        next.setZero();
        for (int i = 0; i < n; ++i) {
            const double wi = omega(i);
            for (const auto& e : g.neighbors[static_cast<std::size_t>(i)])
                next(e.target) += wi * e.transition;
        }
        next = (1.0 - damping) * next.array() + damping / n;
        residual = (next - omega).lpNorm<1>();
        if (residual <= tol)
            return omega;
        omega = next / next.sum();
    }
    throw NumericalError("stationary distribution did not converge in " +
                         std::to_string(max_iters) + " iterations (residual " +
                         std::to_string(residual) + ")");
}

// psi(i,j) = d_i P_ij exp(-gamma (omega_j - omega_i)^2); 0 when no edge.
inline double node_relevancy(const GraphModel& g, int i, int j, double gamma) {
    for (const auto& e : g.neighbors[static_cast<std::size_t>(i)]) {
        if (e.target == j) {
            const double dw = g.omega(j) - g.omega(i);
            return g.out_degree(i) * e.transition * std::exp(-gamma * dw * dw);
        }
    }
    return 0.0;
}

// { j : psi(i,j) > epsilon } plus i itself.
inline std::vector<int> relevant_neighbors(const GraphModel& g, int i, double epsilon,
                                           double gamma) {
    std::vector<int> out{i};
    for (const auto& e : g.neighbors[static_cast<std::size_t>(i)]) {
        const double dw = g.omega(e.target) - g.omega(i);
        const double psi = g.out_degree(i) * e.transition * std::exp(-gamma * dw * dw);
        if (psi > epsilon)
            out.push_back(e.target);
    }
    return out;
}

/**
 * One authority-ascent move: the relevant neighbor maximizing
 * P_ij (omega_j - omega_i). Returns nothing when the best gain is <= 0 or
 * no neighbor is relevant; such a node is an authority mode. Ties go to the
 * lowest node index.
 */
inline std::optional<int> authority_ascent_step(const GraphModel& g, int i, double epsilon,
                                                double gamma) {
    int best = -1;
    double best_gain = 0.0;
    for (const auto& e : g.neighbors[static_cast<std::size_t>(i)]) {
        const double dw = g.omega(e.target) - g.omega(i);
        const double psi = g.out_degree(i) * e.transition * std::exp(-gamma * dw * dw);
        if (psi <= epsilon)
            continue;
        const double gain = e.transition * dw;
        if (gain > best_gain || (gain == best_gain && best >= 0 && e.target < best)) {
            best = e.target;
            best_gain = gain;
        }
    }
    if (best < 0 || best_gain <= 0.0)
        return std::nullopt;
    return best;
}

/**
 * Authority Ascent Shift: every node follows ascent steps until it reaches a
 * mode; nodes sharing a mode form one cluster. Terminates because omega
 * strictly increases along each step.
 */
inline ClusterAssignment cluster(const Matrix& X, const ClusterConfig& cfg) {
    const int n = static_cast<int>(X.rows());
    if (n < 2)
        throw DataError("need at least 2 examples");
    if (cfg.gamma <= 0.0)
        throw UsageError("gamma must be > 0");
    if (cfg.epsilon <= 0.0)
        throw UsageError("epsilon must be > 0");
    if (cfg.damping < 0.0 || cfg.damping >= 1.0)
        throw UsageError("damping must be in [0, 1)");
    GraphModel g = build_knn_graph(X, cfg.k, cfg.threads);
    g.omega = stationary_distribution(g, cfg.damping, cfg.tol, cfg.max_power_iters);

    ClusterAssignment out;
    out.mode_of.assign(static_cast<std::size_t>(n), -1);
    out.ascent_path_len.assign(static_cast<std::size_t>(n), 0);
    parallel_for(n, cfg.threads, [&](int i) {
        int cur = i;
        int len = 0;
        while (auto next = authority_ascent_step(g, cur, cfg.epsilon, cfg.gamma)) {
            cur = *next;
            ++len;
        }
        out.mode_of[static_cast<std::size_t>(i)] = cur;
        out.ascent_path_len[static_cast<std::size_t>(i)] = len;
    });

    out.labels.assign(static_cast<std::size_t>(n), -1);
    std::unordered_map<int, int> label_of_mode;
    for (int i = 0; i < n; ++i) {
        const int mode = out.mode_of[static_cast<std::size_t>(i)];
        auto [it, inserted] = label_of_mode.try_emplace(mode, static_cast<int>(label_of_mode.size()));
        out.labels[static_cast<std::size_t>(i)] = it->second;
    }
    out.cluster_count = static_cast<int>(label_of_mode.size());
    return out;
}

} // namespace rpml

#endif // RPML_GRAPH_CLUSTER_HPP_
