#ifndef RPML_LOSS_HPP_
#define RPML_LOSS_HPP_

#include <string>

#include "rpml/common.hpp"
#include "rpml/manifold.hpp"
#include "rpml/triplets.hpp"

namespace rpml {

enum class Variant { Rpml, RpmlV1 };

inline std::string to_string(Variant v) { return v == Variant::Rpml ? "rpml" : "rpml_v1"; }

inline Variant variant_from_string(const std::string& s) {
    if (s == "rpml")
        return Variant::Rpml;
    if (s == "rpml_v1")
        return Variant::RpmlV1;
    throw UsageError("unknown variant '" + s + "' (expected rpml or rpml_v1)");
}

struct LossConfig {
    double alpha_deg = 45.0; // enters as 4 tan^2(alpha)
    Variant variant = Variant::Rpml;
    double tau = 1.0; // margin of the baseline hinge triplet loss
};

// Per-triplet quantities shared by the objective and its gradients.
//   z     angular margin            m = softplus(z)     beta = sigmoid(z)
//   w     confidence weight         f = w .* m          g = sigmoid(f)
//   ftilde = softplus(f), the per-triplet negative log likelihood
//   h (resp. h_plus/h_minus) is the sigmoid derivative of the weight input.
struct LossIntermediates {
    Vector w, z, m, f, ftilde, g, beta, rho;
    Vector h;                 // rpml
    Vector h_plus, h_minus;   // rpml_v1
};

// w_i = sigmoid(r^T c_i), the learned confidence of triplet i.
inline Vector weights_rpml(const Matrix& r, const Matrix& C) {
    const Vector t = C.transpose() * r;
    return t.unaryExpr([](double x) { return sigmoid(x); });
}

struct V1Weights {
    Vector w, h_plus, h_minus;
};

// w = (w+ + w-)/2 from the bilinear similarities under R: w+ rewards an
// anchor-positive pair that looks similar, w- rewards a negative that looks
// dissimilar to the midpoint.
inline V1Weights weights_v1(const Matrix& R, const TripletBatch& batch) {
    const Matrix Sa = batch.Xa.transpose() * R;   // T x l
    const Matrix Sp = batch.Xp.transpose() * R;
    const Matrix Sm = batch.A.transpose() * R;
    const Matrix Sn = batch.Xn.transpose() * R;
    const Vector s_plus = Sa.cwiseProduct(Sp).rowwise().sum();  // x_a^T R R^T x_p
    const Vector s_minus = Sm.cwiseProduct(Sn).rowwise().sum(); // x_avg^T R R^T x_n
    V1Weights out;
    out.h_plus = s_plus.unaryExpr([](double x) {
        const double s = sigmoid(x);
        return s * (1.0 - s);
    });
    out.h_minus = s_minus.unaryExpr([](double x) {
        const double s = sigmoid(x);
        return s * (1.0 - s);
    });
    const Vector w_plus = s_plus.unaryExpr([](double x) { return sigmoid(x); });
    const Vector w_minus = s_minus.unaryExpr([](double x) { return 1.0 - sigmoid(x); });
    out.w = 0.5 * (w_plus + w_minus);
    return out;
}

// z_i = ||L^T (x_a - x_p)||^2 - 4 tan^2(alpha) ||L^T (x_n - x_avg)||^2
inline Vector angular_margins(const Matrix& L, const TripletBatch& batch, double alpha_deg) {
    const double scale = four_tan_sq(alpha_deg);
    const Vector ap = (batch.D_ap.transpose() * L).rowwise().squaredNorm();
    const Vector nm = (batch.D_nm.transpose() * L).rowwise().squaredNorm();
    return ap - scale * nm;
}

inline LossIntermediates loss_intermediates(const ProductPoint& params, const TripletBatch& batch,
                                            const LossConfig& cfg) {
    LossIntermediates im;
    im.z = angular_margins(params.L, batch, cfg.alpha_deg);
    im.m = im.z.unaryExpr([](double x) { return softplus(x); });
    im.beta = im.z.unaryExpr([](double x) { return sigmoid(x); });

    if (cfg.variant == Variant::Rpml) {
        const Vector t = batch.C.transpose() * params.v;
        im.rho = t.unaryExpr([](double x) { return 1.0 + std::exp(-x); });
        im.w = t.unaryExpr([](double x) { return sigmoid(x); });
        im.h = im.w.cwiseProduct(Vector::Ones(im.w.size()) - im.w);
    } else {
        V1Weights v1 = weights_v1(params.v, batch);
        im.w = std::move(v1.w);
        im.h_plus = std::move(v1.h_plus);
        im.h_minus = std::move(v1.h_minus);
    }

    im.f = im.w.cwiseProduct(im.m);
    im.ftilde = im.f.unaryExpr([](double x) { return softplus(x); });
    im.g = im.f.unaryExpr([](double x) { return sigmoid(x); });
    return im;
}

// sum_i softplus(w_i softplus(z_i)); invariant under L -> L B for
// orthogonal B.
inline double objective(const ProductPoint& params, const TripletBatch& batch,
                        const LossConfig& cfg) {
    if (batch.size() == 0)
        return 0.0;
    return loss_intermediates(params, batch, cfg).ftilde.sum();
}

struct EuclidGrad {
    Matrix L;
    Matrix v;
};

// grad_L from precomputed intermediates:
// (S_ap D_ap^T - 4 tan^2(alpha) S_nm D_nm^T) L with column scale 2 g w beta.
inline Matrix grad_L_from(const LossIntermediates& im, const ProductPoint& params,
                          const TripletBatch& batch, const LossConfig& cfg) {
    const double scale = four_tan_sq(cfg.alpha_deg);
    const Vector s = 2.0 * im.g.cwiseProduct(im.w).cwiseProduct(im.beta);
    const Matrix ap = batch.D_ap.transpose() * params.L; // T x l
    const Matrix nm = batch.D_nm.transpose() * params.L;
    return batch.D_ap * (ap.array().colwise() * s.array()).matrix() -
           scale * (batch.D_nm * (nm.array().colwise() * s.array()).matrix());
}

/**
 * Exact Euclidean gradients of the objective. The v part is the gradient
 * with respect to r (rpml) or R (rpml_v1), matching params.v.
 */
inline EuclidGrad euclid_grad(const ProductPoint& params, const TripletBatch& batch,
                              const LossConfig& cfg) {
    EuclidGrad out;
    if (batch.size() == 0) {
        out.L = Matrix::Zero(params.L.rows(), params.L.cols());
        out.v = Matrix::Zero(params.v.rows(), params.v.cols());
        return out;
    }
    const LossIntermediates im = loss_intermediates(params, batch, cfg);
    out.L = grad_L_from(im, params, batch, cfg);
    if (cfg.variant == Variant::Rpml) {
        out.v = batch.C * im.g.cwiseProduct(im.h).cwiseProduct(im.m);
    } else {
        // 0.5 sum_i g m [h+ (x_a x_p^T + x_p x_a^T) - h- (x_avg x_n^T + x_n x_avg^T)] R
        const Vector cp = 0.5 * im.g.cwiseProduct(im.h_plus).cwiseProduct(im.m);
        const Vector cm = 0.5 * im.g.cwiseProduct(im.h_minus).cwiseProduct(im.m);
        const Matrix Rp = batch.Xp.transpose() * params.v; // T x l
        const Matrix Ra = batch.Xa.transpose() * params.v;
        const Matrix Rn = batch.Xn.transpose() * params.v;
        const Matrix Rm = batch.A.transpose() * params.v;
        out.v = batch.Xa * (Rp.array().colwise() * cp.array()).matrix() +
                batch.Xp * (Ra.array().colwise() * cp.array()).matrix() -
                batch.A * (Rn.array().colwise() * cm.array()).matrix() -
                batch.Xn * (Rm.array().colwise() * cm.array()).matrix();
    }
    return out;
}

// Hinge triplet baseline, forward value only.
inline double baseline_triplet_hinge(const Matrix& L, const TripletBatch& batch, double tau) {
    if (tau <= 0.0)
        throw UsageError("tau must be > 0");
    const Vector ap = (batch.D_ap.transpose() * L).rowwise().squaredNorm();
    const Vector an = ((batch.Xa - batch.Xn).transpose() * L).rowwise().squaredNorm();
    return (ap - an).unaryExpr([tau](double v) { return std::max(0.0, v + tau); }).sum();
}

// Hinge angular baseline, forward value only: sum_i [z_i]_+.
inline double baseline_angular_hinge(const Matrix& L, const TripletBatch& batch,
                                     double alpha_deg) {
    return angular_margins(L, batch, alpha_deg)
        .unaryExpr([](double v) { return std::max(0.0, v); })
        .sum();
}

} // namespace rpml

#endif // RPML_LOSS_HPP_
