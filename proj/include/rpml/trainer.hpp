#ifndef RPML_TRAINER_HPP_
#define RPML_TRAINER_HPP_

#include <chrono>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rpml/common.hpp"
#include "rpml/dataset.hpp"
#include "rpml/loss.hpp"
#include "rpml/manifold.hpp"
#include "rpml/rng.hpp"
#include "rpml/triplets.hpp"

namespace rpml {

enum class TrainMode { FullBatchCg, Stochastic };

inline TrainMode train_mode_from_string(const std::string& s) {
    if (s == "full_batch_cg")
        return TrainMode::FullBatchCg;
    if (s == "stochastic")
        return TrainMode::Stochastic;
    throw UsageError("unknown mode '" + s + "' (expected full_batch_cg or stochastic)");
}

struct TrainConfig {
    int l = 8;
    double alpha_deg = 45.0;
    Variant variant = Variant::Rpml;
    int maxiter = 500;
    double grad_tol = 1e-6;
    TrainMode mode = TrainMode::FullBatchCg;
    int batch_size = 120;
    double eta = 0.01;
    int epochs = 30;
    std::uint64_t seed = 0;
    bool freeze_weights = false;
    int per_anchor = 5;
    int v1_dim = 0; // rpml_v1 projection width; 0 means use l
};

struct TrainReport {
    std::vector<double> cost_trace; // per CG iterate / per epoch
    std::vector<double> grad_norm_trace;
    std::vector<double> mean_weight_trace;
    double final_grad_norm = 0.0;
    double wall_seconds = 0.0;
    int iterations = 0;
    int triplet_count = 0;
    int skipped_anchors = 0;
};

struct FitResult {
    ProductPoint params;
    TrainReport report;
};

namespace detail {
// substream tags fanned out from the user seed
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTripletStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
} // namespace detail

/**
 * Seeded starting point: L is the Q factor (positive-diagonal convention)
 * of a Gaussian d x l matrix; the weight parameter is 0 for rpml (all
 * initial weights 0.5) and Gaussian / sqrt(d) for rpml_v1. The rpml_v1
 * projection width defaults to l but can be overridden.
 */
inline ProductPoint initialize(int d, int l, Variant variant, std::uint64_t seed,
                               int v1_dim = 0) {
    if (l < 1 || l > d)
        throw UsageError("embedding dimension l must satisfy 1 <= l <= d");
    const int m = v1_dim > 0 ? v1_dim : l;
    if (variant == Variant::RpmlV1 && m > d)
        throw UsageError("v1_dim must satisfy 1 <= v1_dim <= d");
    Rng rng(seed);
    Matrix G(d, l);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < l; ++j)
            G(i, j) = rng.next_gaussian();
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix L = qr.householderQ() * Matrix::Identity(d, l);
    const Matrix R = qr.matrixQR().topRows(l).triangularView<Eigen::Upper>();
    for (int j = 0; j < l; ++j)
        if (R(j, j) < 0.0)
            L.col(j) = -L.col(j);

    ProductPoint p;
    p.L = std::move(L);
    if (variant == Variant::Rpml) {
        p.v = Matrix::Zero(2 * d, 1);
    } else {
        p.v.resize(d, m);
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < m; ++j)
                p.v(i, j) = scale * rng.next_gaussian();
    }
    return p;
}

// row i = L^T x_i
inline Matrix embed(const Matrix& L, const Matrix& X) {
    if (X.cols() != L.rows())
        throw UsageError("dimension mismatch: features have d=" + std::to_string(X.cols()) +
                         " but embedding expects d=" + std::to_string(L.rows()));
    return X * L;
}

namespace detail {

inline FitResult fit_full_batch(const TripletBatch& batch, const TrainConfig& cfg,
                                ProductPoint x0) {
    const LossConfig lcfg{cfg.alpha_deg, cfg.variant, 1.0};
    FitResult out;
    CgOptions opts;
    opts.grad_tol = cfg.grad_tol;
    opts.max_iters = cfg.maxiter;
    opts.on_iterate = [&](int, const ProductPoint& x, double) {
        out.report.mean_weight_trace.push_back(
            loss_intermediates(x, batch, lcfg).w.mean());
    };
    auto cost = [&](const ProductPoint& x) { return objective(x, batch, lcfg); };
    auto grad = [&](const ProductPoint& x) {
        EuclidGrad eg = euclid_grad(x, batch, lcfg);
        if (cfg.freeze_weights)
            eg.v.setZero();
        return ProductTangent{std::move(eg.L), std::move(eg.v)};
    };
    CgResult res = cg_minimize(cost, grad, x0, opts);
    out.params = std::move(res.x);
    out.report.cost_trace = std::move(res.cost_trace);
    out.report.grad_norm_trace = std::move(res.grad_trace);
    out.report.final_grad_norm = res.grad_norm;
    out.report.iterations = res.iterations;
    return out;
}

inline FitResult fit_stochastic(const TripletBatch& batch, const TrainConfig& cfg,
                                ProductPoint x0) {
    const LossConfig lcfg{cfg.alpha_deg, cfg.variant, 1.0};
    const int T = static_cast<int>(batch.size());
    FitResult out;
    out.params = std::move(x0);

    auto full_grad_norm = [&](const ProductPoint& x) {
        EuclidGrad eg = euclid_grad(x, batch, lcfg);
        if (cfg.freeze_weights)
            eg.v.setZero();
        return tangent_norm(riemannian_gradient(x, {std::move(eg.L), std::move(eg.v)}));
    };
    auto record = [&](const ProductPoint& x) {
        const LossIntermediates im = loss_intermediates(x, batch, lcfg);
        out.report.cost_trace.push_back(im.ftilde.sum());
        out.report.mean_weight_trace.push_back(im.w.mean());
        out.report.grad_norm_trace.push_back(full_grad_norm(x));
        return out.report.cost_trace.back();
    };
    if (!std::isfinite(record(out.params)))
        throw NumericalError("cost not finite at the initial point");

    double eta = cfg.eta;
    int halvings = 0;
    int steps = 0;
    Rng shuffle_rng = Rng::derive(cfg.seed, kShuffleStream);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const ProductPoint checkpoint = out.params;
        std::vector<int> order(static_cast<std::size_t>(T));
        std::iota(order.begin(), order.end(), 0);
        shuffle_rng.shuffle(order);

        for (int lo = 0; lo < T; lo += cfg.batch_size) {
            const int hi = std::min(T, lo + cfg.batch_size);
            std::vector<int> idx(order.begin() + lo, order.begin() + hi);
            std::sort(idx.begin(), idx.end());
            const TripletBatch sub = batch_subset(batch, idx);
            const EuclidGrad eg = euclid_grad(out.params, sub, lcfg);
            if (!cfg.freeze_weights)
                out.params.v -= eta * eg.v;
            out.params.L =
                retract(out.params.L, -eta * project_horizontal(out.params.L, eg.L));
            ++steps;
        }

        const LossIntermediates im = loss_intermediates(out.params, batch, lcfg);
        const double cost = im.ftilde.sum();
        if (!std::isfinite(cost) || !out.params.v.allFinite()) {
            if (++halvings > 5)
                throw NumericalError("stochastic training diverged after 5 step-size halvings");
            eta *= 0.5;
            out.params = checkpoint;
            --epoch; // redo this epoch at the smaller step
            continue;
        }
        out.report.cost_trace.push_back(cost);
        out.report.mean_weight_trace.push_back(im.w.mean());
        out.report.grad_norm_trace.push_back(full_grad_norm(out.params));
    }
    out.report.iterations = steps;
    out.report.final_grad_norm =
        out.report.grad_norm_trace.empty() ? 0.0 : out.report.grad_norm_trace.back();
    return out;
}

} // namespace detail

/**
 * Learns the embedding from pseudo-labels: generates triplets once, builds
 * the batch matrices, then either runs Riemannian CG on the product
 * manifold (full_batch_cg) or fixed-step mini-batch updates (stochastic).
 */
inline FitResult fit(const Matrix& X, const Labels& pseudo_labels, const TrainConfig& cfg,
                     std::optional<ProductPoint> init = std::nullopt) {
    const int d = static_cast<int>(X.cols());
    if (static_cast<int>(pseudo_labels.size()) != X.rows())
        throw UsageError("label count does not match example count");
    if (cfg.l < 1 || cfg.l > d)
        throw UsageError("embedding dimension l must satisfy 1 <= l <= d");
    if (cfg.batch_size < 1)
        throw UsageError("batch_size must be >= 1");
    if (cfg.eta <= 0.0)
        throw UsageError("eta must be > 0");

    const auto t0 = std::chrono::steady_clock::now();
    TripletSet triplets =
        generate_triplets(pseudo_labels, cfg.per_anchor, splitmix64(cfg.seed ^ detail::kTripletStream));
    TripletBatch batch = build_batch(X, triplets.items);

    ProductPoint x0 = init ? std::move(*init)
                           : initialize(d, cfg.l, cfg.variant,
                                        splitmix64(cfg.seed ^ detail::kInitStream), cfg.v1_dim);

    FitResult out = (cfg.mode == TrainMode::FullBatchCg)
                        ? detail::fit_full_batch(batch, cfg, std::move(x0))
                        : detail::fit_stochastic(batch, cfg, std::move(x0));
    out.report.triplet_count = static_cast<int>(triplets.items.size());
    out.report.skipped_anchors = triplets.skipped_anchors;
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// Checkpoint: L and the weight parameter in the binary matrix container
// plus a small manifest.
inline void save_checkpoint(const std::string& prefix, const ProductPoint& p, Variant variant,
                            int iteration) {
    save_matrix_binary(p.L, prefix + ".L.bin");
    save_matrix_binary(p.v, prefix + ".w.bin");
    std::ofstream out(prefix + ".json");
    if (!out)
        throw DataError("cannot write " + prefix + ".json");
    out << "{\"iteration\": " << iteration << ", \"variant\": \"" << to_string(variant)
        << "\", \"d\": " << p.L.rows() << ", \"l\": " << p.L.cols() << "}\n";
}

} // namespace rpml

#endif // RPML_TRAINER_HPP_
