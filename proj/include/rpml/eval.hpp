#ifndef RPML_EVAL_HPP_
#define RPML_EVAL_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "rpml/common.hpp"
#include "rpml/parallel.hpp"
#include "rpml/rng.hpp"

namespace rpml {

struct EvalResult {
    double nmi = 0.0;
    double f_measure = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::vector<std::pair<int, double>> recall_at_k; // K -> percentage
};

namespace detail {

inline std::vector<std::int64_t> label_counts(const Labels& labels,
                                              std::map<int, int>& index_of) {
    std::vector<std::int64_t> counts;
    for (int v : labels) {
        auto [it, inserted] = index_of.try_emplace(v, static_cast<int>(index_of.size()));
        if (inserted)
            counts.push_back(0);
        ++counts[static_cast<std::size_t>(it->second)];
    }
    return counts;
}

inline double entropy(const std::vector<std::int64_t>& counts, double n) {
    double h = 0.0;
    for (std::int64_t c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
        }
    return h;
}

} // namespace detail

/**
 * Normalized mutual information with arithmetic-mean normalization,
 * I(truth; pred) / ((H(truth) + H(pred)) / 2). Two single-cluster
 * labelings are trivially identical and score 1.
 */
inline double nmi(const Labels& truth, const Labels& pred) {
    if (truth.size() != pred.size())
        throw UsageError("nmi: label vectors differ in length");
    const double n = static_cast<double>(truth.size());
    std::map<int, int> ti, pi;
    const auto tc = detail::label_counts(truth, ti);
    const auto pc = detail::label_counts(pred, pi);

    std::map<std::pair<int, int>, std::int64_t> joint;
    for (std::size_t i = 0; i < truth.size(); ++i)
        ++joint[{ti.at(truth[i]), pi.at(pred[i])}];
    std::vector<std::int64_t> jc;
    jc.reserve(joint.size());
    for (const auto& [cell, c] : joint)
        jc.push_back(c);

    const double ht = detail::entropy(tc, n);
    const double hp = detail::entropy(pc, n);
    if (ht == 0.0 && hp == 0.0)
        return 1.0; // both single-cluster
    const double mi = std::max(0.0, ht + hp - detail::entropy(jc, n));
    return mi / (0.5 * (ht + hp));
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

// Pairwise-counting precision/recall/F over all unordered example pairs;
// zero denominators score 0.
inline Prf pairwise_prf(const Labels& truth, const Labels& pred) {
    if (truth.size() != pred.size())
        throw UsageError("pairwise_prf: label vectors differ in length");
    auto pairs2 = [](std::int64_t c) { return c * (c - 1) / 2; };

    std::map<int, int> ti, pi;
    const auto tc = detail::label_counts(truth, ti);
    const auto pc = detail::label_counts(pred, pi);
    std::map<std::pair<int, int>, std::int64_t> joint;
    for (std::size_t i = 0; i < truth.size(); ++i)
        ++joint[{ti.at(truth[i]), pi.at(pred[i])}];

    std::int64_t tp = 0;
    for (const auto& [cell, c] : joint)
        tp += pairs2(c);
    std::int64_t same_pred = 0, same_truth = 0;
    for (std::int64_t c : pc)
        same_pred += pairs2(c);
    for (std::int64_t c : tc)
        same_truth += pairs2(c);
    const std::int64_t fp = same_pred - tp;
    const std::int64_t fn = same_truth - tp;

    Prf out;
    out.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    out.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    out.f = (out.precision + out.recall) > 0.0
                ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                : 0.0;
    return out;
}

/**
 * Recall@K: percentage of examples with at least one same-label neighbor
 * among their K nearest (Euclidean, self excluded, ties to the lower
 * index). Returns one entry per requested K, in the given order.
 */
inline std::vector<std::pair<int, double>> recall_at_k(const Matrix& E, const Labels& labels,
                                                       const std::vector<int>& ks,
                                                       int threads = 1) {
    const int n = static_cast<int>(E.rows());
    if (static_cast<int>(labels.size()) != n)
        throw UsageError("recall_at_k: label count does not match example count");
    if (ks.empty())
        return {};
    int max_k = 0;
    for (int k : ks) {
        if (k < 1 || k >= n)
            throw UsageError("recall_at_k: K must satisfy 1 <= K < n, got " + std::to_string(k));
        max_k = std::max(max_k, k);
    }

    const Vector sq_norms = E.rowwise().squaredNorm();
    // first_hit[i] = rank (1-based) of the nearest same-label neighbor, or n
    std::vector<int> first_hit(static_cast<std::size_t>(n), 0);
    parallel_for(n, threads, [&](int i) {
        Vector d2 = sq_norms.array() + sq_norms(i) - 2.0 * (E * E.row(i).transpose()).array();
        std::vector<std::pair<double, int>> order;
        order.reserve(static_cast<std::size_t>(n - 1));
        for (int j = 0; j < n; ++j)
            if (j != i)
                order.emplace_back(d2(j), j);
        std::partial_sort(order.begin(), order.begin() + max_k, order.end());
        int hit = n;
        for (int r = 0; r < max_k; ++r) {
            if (labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)].second)] ==
                labels[static_cast<std::size_t>(i)]) {
                hit = r + 1;
                break;
            }
        }
        first_hit[static_cast<std::size_t>(i)] = hit;
    });

    std::vector<std::pair<int, double>> out;
    out.reserve(ks.size());
    for (int k : ks) {
        std::int64_t hits = 0;
        for (int h : first_hit)
            if (h <= k)
                ++hits;
        out.emplace_back(k, 100.0 * static_cast<double>(hits) / static_cast<double>(n));
    }
    return out;
}

/**
 * Lloyd k-means with k-means++ seeding, best of `restarts` by within-cluster
 * sum of squares. Deterministic given the seed.
 */
inline Labels kmeans(const Matrix& E, int k, std::uint64_t seed, int restarts = 10,
                     int max_iters = 300) {
    const int n = static_cast<int>(E.rows());
    const Eigen::Index l = E.cols();
    if (k < 1 || k > n)
        throw UsageError("kmeans: k must satisfy 1 <= k <= n");

    Labels best_labels;
    double best_wcss = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < restarts; ++restart) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(restart));

        // k-means++ seeding
        Matrix centers(k, l);
        Vector min_d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
        std::vector<bool> chosen(static_cast<std::size_t>(n), false);
        int first = rng.next_index(n);
        centers.row(0) = E.row(first);
        chosen[static_cast<std::size_t>(first)] = true;
        for (int c = 1; c < k; ++c) {
            for (int i = 0; i < n; ++i) {
                const double d2 = (E.row(i) - centers.row(c - 1)).squaredNorm();
                min_d2(i) = std::min(min_d2(i), d2);
            }
            const double total = min_d2.sum();
            int pick = -1;
            if (total > 0.0) {
                const double target = rng.next_double() * total;
                double acc = 0.0;
                for (int i = 0; i < n; ++i) {
                    acc += min_d2(i);
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                }
                if (pick < 0)
                    pick = n - 1;
            } else {
                // all remaining points coincide with a center
                for (int i = 0; i < n; ++i)
                    if (!chosen[static_cast<std::size_t>(i)]) {
                        pick = i;
                        break;
                    }
                if (pick < 0)
                    pick = rng.next_index(n);
            }
            centers.row(c) = E.row(pick);
            chosen[static_cast<std::size_t>(pick)] = true;
        }

        // Lloyd iterations
        Labels labels(static_cast<std::size_t>(n), 0);
        for (int iter = 0; iter < max_iters; ++iter) {
            bool changed = false;
            for (int i = 0; i < n; ++i) {
                int arg = 0;
                double best_d2 = (E.row(i) - centers.row(0)).squaredNorm();
                for (int c = 1; c < k; ++c) {
                    const double d2 = (E.row(i) - centers.row(c)).squaredNorm();
                    if (d2 < best_d2) {
                        best_d2 = d2;
                        arg = c;
                    }
                }
                if (labels[static_cast<std::size_t>(i)] != arg) {
                    labels[static_cast<std::size_t>(i)] = arg;
                    changed = true;
                }
            }
            if (!changed && iter > 0)
                break;

            Matrix sums = Matrix::Zero(k, l);
            std::vector<int> counts(static_cast<std::size_t>(k), 0);
            for (int i = 0; i < n; ++i) {
                sums.row(labels[static_cast<std::size_t>(i)]) += E.row(i);
                ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
            }
            for (int c = 0; c < k; ++c) {
                if (counts[static_cast<std::size_t>(c)] > 0) {
                    centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
                } else {
                    // empty cluster: seize the point farthest from its center
                    int far = 0;
                    double far_d2 = -1.0;
                    for (int i = 0; i < n; ++i) {
                        const double d2 =
                            (E.row(i) - centers.row(labels[static_cast<std::size_t>(i)]))
                                .squaredNorm();
                        if (d2 > far_d2) {
                            far_d2 = d2;
                            far = i;
                        }
                    }
                    centers.row(c) = E.row(far);
                    labels[static_cast<std::size_t>(far)] = c;
                }
            }
        }

        double wcss = 0.0;
        for (int i = 0; i < n; ++i)
            wcss += (E.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
        if (wcss < best_wcss) {
            best_wcss = wcss;
            best_labels = labels;
        }
    }
    return best_labels;
}

// k-means with k = number of ground-truth classes, then all metrics.
inline EvalResult evaluate(const Matrix& E, const Labels& truth, const std::vector<int>& ks,
                           std::uint64_t seed, int restarts = 10, int threads = 1) {
    std::map<int, int> index_of;
    detail::label_counts(truth, index_of);
    const int k = static_cast<int>(index_of.size());
    const Labels pred = kmeans(E, k, seed, restarts);
    EvalResult out;
    out.nmi = nmi(truth, pred);
    const Prf prf = pairwise_prf(truth, pred);
    out.precision = prf.precision;
    out.recall = prf.recall;
    out.f_measure = prf.f;
    out.recall_at_k = recall_at_k(E, truth, ks, threads);
    return out;
}

} // namespace rpml

#endif // RPML_EVAL_HPP_
