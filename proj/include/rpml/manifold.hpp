#ifndef RPML_MANIFOLD_HPP_
#define RPML_MANIFOLD_HPP_

#include <functional>
#include <vector>

#include "rpml/common.hpp"

namespace rpml {

// Point on R^m x Grass(d,l): an orthonormal representative L plus a
// Euclidean factor v (the weight vector r, or the matrix R in the v1
// variant).
struct ProductPoint {
    Matrix L;
    Matrix v;
};

// Tangent at a ProductPoint; the L part lives in the horizontal space
// (L^T xi_L = 0).
struct ProductTangent {
    Matrix L;
    Matrix v;

    ProductTangent operator+(const ProductTangent& o) const { return {L + o.L, v + o.v}; }
    ProductTangent operator-(const ProductTangent& o) const { return {L - o.L, v - o.v}; }
    ProductTangent operator*(double s) const { return {s * L, s * v}; }
    ProductTangent operator-() const { return {-L, -v}; }
};

inline ProductTangent operator*(double s, const ProductTangent& t) { return t * s; }

// Horizontal projection G - L L^T G; maps Euclidean gradients onto the
// Grassmann tangent space.
inline Matrix project_horizontal(const Matrix& L, const Matrix& G) {
    return G - L * (L.transpose() * G);
}

/**
 * SVD retraction: the orthonormal polar factor U V^T of L + xi.
 * The largest-magnitude entry of each left singular vector is forced
 * nonnegative before the product, pinning down the SVD sign ambiguity.
 */
inline Matrix retract(const Matrix& L, const Matrix& xi) {
    Eigen::JacobiSVD<Matrix> svd(L + xi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues().minCoeff() < 1e-12)
        throw NumericalError("retraction undefined: L + xi is rank deficient");
    Matrix U = svd.matrixU();
    Matrix V = svd.matrixV();
    for (Eigen::Index j = 0; j < U.cols(); ++j) {
        Eigen::Index imax;
        U.col(j).cwiseAbs().maxCoeff(&imax);
        if (U(imax, j) < 0.0) {
            U.col(j) = -U.col(j);
            V.col(j) = -V.col(j);
        }
    }
    return U * V.transpose();
}

// Product metric: trace inner product on the L factor plus the Euclidean
// inner product on v.
inline double inner(const ProductTangent& a, const ProductTangent& b) {
    return a.L.cwiseProduct(b.L).sum() + a.v.cwiseProduct(b.v).sum();
}

inline double tangent_norm(const ProductTangent& t) { return std::sqrt(inner(t, t)); }

// Euclidean gradient -> Riemannian gradient (identity on the v factor).
inline ProductTangent riemannian_gradient(const ProductPoint& x, const ProductTangent& egrad) {
    return {project_horizontal(x.L, egrad.L), egrad.v};
}

// Vector transport to the tangent space at `to`: horizontal projection on
// the L part, identity on v.
inline ProductTangent transport(const ProductPoint& to, const ProductTangent& t) {
    return {project_horizontal(to.L, t.L), t.v};
}

inline ProductPoint move(const ProductPoint& x, const ProductTangent& dir, double step) {
    return {retract(x.L, step * dir.L), x.v + step * dir.v};
}

struct CgOptions {
    double grad_tol = 1e-6;
    int max_iters = 500;
    double armijo_c1 = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 30;
    // called after evaluating iterate t (t = 0 is the initial point)
    std::function<void(int, const ProductPoint&, double)> on_iterate;
};

struct CgResult {
    ProductPoint x;
    std::vector<double> cost_trace; // one entry per iterate, non-increasing
    std::vector<double> grad_trace; // Riemannian gradient norm per iterate
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/**
 * Riemannian conjugate gradient on the product manifold: projected
 * gradients, Hestenes-Stiefel beta with projection transport, Armijo
 * backtracking and the SVD retraction. Stops at grad_tol or max_iters.
 * A failed line search restarts once from steepest descent, then throws.
 */
inline CgResult cg_minimize(const std::function<double(const ProductPoint&)>& cost,
                            const std::function<ProductTangent(const ProductPoint&)>& egrad,
                            const ProductPoint& x0, const CgOptions& opts = {}) {
    CgResult res;
    res.x = x0;
    double f = cost(res.x);
    if (!std::isfinite(f))
        throw NumericalError("cost not finite at the initial point");
    res.cost_trace.push_back(f);
    if (opts.on_iterate)
        opts.on_iterate(0, res.x, f);

    ProductTangent g = riemannian_gradient(res.x, egrad(res.x));
    double gnorm = tangent_norm(g);
    res.grad_trace.push_back(gnorm);
    ProductTangent dir = -g;
    double prev_step = 0.0;

    int t = 0;
    for (; t < opts.max_iters; ++t) {
        if (gnorm < opts.grad_tol) {
            res.converged = true;
            break;
        }

        double slope = inner(g, dir);
        if (slope >= 0.0) { // not a descent direction; restart
            dir = -g;
            slope = -gnorm * gnorm;
        }

        double step = (t == 0) ? std::min(1.0, 1.0 / gnorm) : 2.0 * prev_step;
        bool accepted = false;
        bool restarted = false;
        ProductPoint x_new;
        double f_new = f;
        while (true) {
            double s = step;
            for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
                ProductPoint trial = move(res.x, dir, s);
                const double f_trial = cost(trial);
                if (std::isfinite(f_trial) && f_trial <= f + opts.armijo_c1 * s * slope) {
                    x_new = std::move(trial);
                    f_new = f_trial;
                    prev_step = s;
                    accepted = true;
                    break;
                }
                s *= opts.backtrack;
            }
            if (accepted || restarted)
                break;
            // steepest-descent restart, one retry
            restarted = true;
            dir = -g;
            slope = -gnorm * gnorm;
            step = std::min(1.0, 1.0 / gnorm);
        }
        if (!accepted)
            throw NumericalError("line search failed to find a decrease after restart");

        ProductTangent g_new = riemannian_gradient(x_new, egrad(x_new));
        const ProductTangent g_t = transport(x_new, g);
        const ProductTangent dir_t = transport(x_new, dir);
        const ProductTangent y = g_new - g_t;
        const double denom = inner(dir_t, y);
        double beta = 0.0;
        if (denom != 0.0) {
            beta = inner(g_new, y) / denom; // Hestenes-Stiefel
            if (!std::isfinite(beta))
                beta = 0.0;
        }
        dir = -g_new + beta * dir_t;
        if (inner(dir, g_new) >= 0.0)
            dir = -g_new;

        res.x = std::move(x_new);
        f = f_new;
        g = std::move(g_new);
        gnorm = tangent_norm(g);
        res.cost_trace.push_back(f);
        res.grad_trace.push_back(gnorm);
        if (opts.on_iterate)
            opts.on_iterate(t + 1, res.x, f);
    }
    res.grad_norm = gnorm;
    res.iterations = t;
    res.converged = res.converged || gnorm < opts.grad_tol;
    return res;
}

} // namespace rpml

#endif // RPML_MANIFOLD_HPP_
