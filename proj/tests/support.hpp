// Shared helpers for the unit tests.
#pragma once

#include "cqtp/qstate.hpp"

#include <numbers>
#include <random>

namespace cqtp::test {

template <typename A, typename B>
double max_abs_diff(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

inline Vector random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vector v(static_cast<Eigen::Index>(dim));
    for (auto& a : v) a = cplx(n(rng), n(rng));
    return v.normalized();
}

inline StateVector random_state(std::mt19937_64& rng, const SubsystemLayout& layout) {
    return {layout, random_vector(rng, layout.dim())};
}

/// Random mixed state of rank `rank`.
inline DensityMatrix random_density(std::mt19937_64& rng, const SubsystemLayout& layout, std::size_t rank = 3) {
    const auto d = static_cast<Eigen::Index>(layout.dim());
    Matrix m = Matrix::Zero(d, d);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (std::size_t k = 0; k < rank; ++k) {
        const Vector v = random_vector(rng, layout.dim());
        m += u(rng) * v * v.adjoint();
    }
    return {layout, m / m.trace()};
}

/// Random normalized (c0, c1) with a complex phase on c1.
inline std::pair<cplx, cplx> random_coefficients(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double c0 = std::sqrt(u(rng));
    const double phase = 2.0 * std::numbers::pi * u(rng);
    return {cplx(c0, 0.0), std::polar(std::sqrt(1.0 - c0 * c0), phase)};
}

}  // namespace cqtp::test
