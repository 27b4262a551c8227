#ifndef RPML_COMMON_HPP_
#define RPML_COMMON_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace rpml {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

// Bad flags or parameter ranges. CLI exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable, malformed or invalid input data. CLI exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-convergence or non-finite arithmetic. CLI exit code 4.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// log(1 + exp(x)); the max/log1p split never overflows.
inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// 1 / (1 + exp(-x)), branched on sign so exp never overflows.
inline double sigmoid(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Angular-margin scale 4 tan^2(alpha), alpha given in degrees.
inline double four_tan_sq(double alpha_deg) {
    const double t = std::tan(alpha_deg * std::numbers::pi / 180.0);
    return 4.0 * t * t;
}

} // namespace rpml

#endif // RPML_COMMON_HPP_
