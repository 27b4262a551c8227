#ifndef RPML_TRIPLETS_HPP_
#define RPML_TRIPLETS_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rpml/common.hpp"
#include "rpml/rng.hpp"

namespace rpml {

// anchor / positive / negative indices into the feature matrix
struct Triplet {
    int a;
    int p;
    int n;
};

struct TripletSet {
    std::vector<Triplet> items;
    int skipped_anchors = 0; // anchors in singleton clusters, silently skipped
};

// Column-major batch form of a triplet set: midpoints, concatenations and
// the two difference matrices the loss works on, plus the raw columns.
struct TripletBatch {
    std::vector<Triplet> triplets;
    Matrix A;    // d x T, (x_a + x_p) / 2
    Matrix C;    // 2d x T, [A; x_n]
    Matrix D_ap; // d x T, x_a - x_p
    Matrix D_nm; // d x T, x_n - A column
    Matrix Xa, Xp, Xn;

    Eigen::Index size() const { return A.cols(); }
    Eigen::Index dim() const { return A.rows(); }
};

/**
 * Samples per_anchor triplets for every example in a non-singleton cluster:
 * positive uniform over same-cluster peers, negative uniform over all other
 * clusters. Each anchor draws from its own substream, so the output is
 * deterministic and independent of generation order.
 */
inline TripletSet generate_triplets(const Labels& labels, int per_anchor, std::uint64_t seed) {
    const int n = static_cast<int>(labels.size());
    if (per_anchor < 1)
        throw UsageError("per_anchor must be >= 1");

    std::map<int, std::vector<int>> clusters;
    for (int i = 0; i < n; ++i)
        clusters[labels[static_cast<std::size_t>(i)]].push_back(i);

    if (clusters.size() < 2)
        throw DataError("no negatives available: all examples share one cluster");
    const bool any_pair = std::any_of(clusters.begin(), clusters.end(),
                                      [](const auto& c) { return c.second.size() >= 2; });
    if (!any_pair)
        throw DataError("no positives available: all clusters are singletons");

    TripletSet out;
    for (const auto& [label, members] : clusters) {
        const int size = static_cast<int>(members.size());
        if (size < 2) {
            out.skipped_anchors += size;
            continue;
        }
        for (int pos_in_cluster = 0; pos_in_cluster < size; ++pos_in_cluster) {
            const int anchor = members[static_cast<std::size_t>(pos_in_cluster)];
            Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(anchor));
            for (int t = 0; t < per_anchor; ++t) {
                int j = rng.next_index(size - 1);
                if (j >= pos_in_cluster)
                    ++j; // skip the anchor slot
                const int positive = members[static_cast<std::size_t>(j)];
                // rank within the complement of this cluster -> example index
                int negative = rng.next_index(n - size);
                for (int member : members) {
                    if (member <= negative)
                        ++negative;
                    else
                        break;
                }
                out.items.push_back({anchor, positive, negative});
            }
        }
    }
    return out;
}

inline TripletBatch build_batch(const Matrix& X, const std::vector<Triplet>& triplets) {
    const int n = static_cast<int>(X.rows());
    const Eigen::Index d = X.cols();
    const Eigen::Index T = static_cast<Eigen::Index>(triplets.size());

    TripletBatch b;
    b.triplets = triplets;
    b.A.resize(d, T);
    b.C.resize(2 * d, T);
    b.D_ap.resize(d, T);
    b.D_nm.resize(d, T);
    b.Xa.resize(d, T);
    b.Xp.resize(d, T);
    b.Xn.resize(d, T);

    for (Eigen::Index i = 0; i < T; ++i) {
        const Triplet& t = triplets[static_cast<std::size_t>(i)];
        const bool bad = t.a < 0 || t.a >= n || t.p < 0 || t.p >= n || t.n < 0 || t.n >= n;
        if (bad)
            throw DataError("triplet " + std::to_string(i) + ": index out of range");
        const Vector xa = X.row(t.a).transpose();
        const Vector xp = X.row(t.p).transpose();
        const Vector xn = X.row(t.n).transpose();
        b.Xa.col(i) = xa;
        b.Xp.col(i) = xp;
        b.Xn.col(i) = xn;
        b.A.col(i) = 0.5 * (xa + xp);
        b.C.col(i).head(d) = b.A.col(i);
        b.C.col(i).tail(d) = xn;
        b.D_ap.col(i) = xa - xp;
        b.D_nm.col(i) = xn - b.A.col(i);
    }
    return b;
}

inline TripletBatch build_batch(const Matrix& X, const TripletSet& set) {
    return build_batch(X, set.items);
}

// Column subset of a batch, used by the mini-batch trainer.
inline TripletBatch batch_subset(const TripletBatch& b, const std::vector<int>& indices) {
    TripletBatch out;
    const Eigen::Index d = b.dim();
    const Eigen::Index T = static_cast<Eigen::Index>(indices.size());
    out.triplets.reserve(indices.size());
    out.A.resize(d, T);
    out.C.resize(2 * d, T);
    out.D_ap.resize(d, T);
    out.D_nm.resize(d, T);
    out.Xa.resize(d, T);
    out.Xp.resize(d, T);
    out.Xn.resize(d, T);
    for (Eigen::Index i = 0; i < T; ++i) {
        const int src = indices[static_cast<std::size_t>(i)];
        out.triplets.push_back(b.triplets[static_cast<std::size_t>(src)]);
        out.A.col(i) = b.A.col(src);
        out.C.col(i) = b.C.col(src);
        out.D_ap.col(i) = b.D_ap.col(src);
        out.D_nm.col(i) = b.D_nm.col(src);
        out.Xa.col(i) = b.Xa.col(src);
        out.Xp.col(i) = b.Xp.col(src);
        out.Xn.col(i) = b.Xn.col(src);
    }
    return out;
}

} // namespace rpml

#endif // RPML_TRIPLETS_HPP_
