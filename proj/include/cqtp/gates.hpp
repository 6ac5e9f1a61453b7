// gates.hpp
// Atom-cavity evolutions used by the protocol, as explicit unitaries.
//
// Two-body gates act on (atom, mode) with local index atom * (cutoff + 1) + n.

#pragma once

#include "cqtp/qstate.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace cqtp {

enum class GateKind { resonant, dispersive, ramsey, pauli_x, pauli_y, pauli_z };

enum class Pauli { x, y, z };

namespace detail {

inline std::size_t atom_mode_index(Level level, std::size_t n, std::size_t cutoff) {
    return static_cast<std::size_t>(level) * (cutoff + 1) + n;
}

}  // namespace detail

/// Resonant Jaynes-Cummings evolution for coupling angle lambda*t.
///
/// Couples |e,n> and |g,n+1> with Rabi angle lambda*t*sqrt(n+1):
///   |e,n>   -> cos|e,n> - i sin|g,n+1>
///   |g,n+1> -> -i sin|e,n> + cos|g,n+1>
/// |g,0> is invariant, and so is |e,cutoff>, whose partner lies above the
/// truncation.
inline Matrix resonant_unitary(double angle, std::size_t fock_cutoff = 1) {
    using detail::atom_mode_index;
    const auto d = static_cast<Eigen::Index>(2 * (fock_cutoff + 1));
    Matrix u = Matrix::Identity(d, d);
    const cplx i{0.0, 1.0};
    for (std::size_t n = 0; n < fock_cutoff; ++n) {
        const double a = angle * std::sqrt(static_cast<double>(n + 1));
        const auto en = static_cast<Eigen::Index>(atom_mode_index(Level::e, n, fock_cutoff));
        const auto gn1 = static_cast<Eigen::Index>(atom_mode_index(Level::g, n + 1, fock_cutoff));
        u(en, en) = std::cos(a);
        u(gn1, gn1) = std::cos(a);
        u(gn1, en) = -i * std::sin(a);
        u(en, gn1) = -i * std::sin(a);
    }
    return u;
}

/// Dispersive evolution for angle chi*t: |e,n> -> exp(-i chi t n)|e,n>, |g,n> unchanged.
inline Matrix dispersive_unitary(double angle, std::size_t fock_cutoff = 1) {
    const auto d = static_cast<Eigen::Index>(2 * (fock_cutoff + 1));
    Matrix u = Matrix::Identity(d, d);
    for (std::size_t n = 0; n <= fock_cutoff; ++n) {
        const auto en = static_cast<Eigen::Index>(detail::atom_mode_index(Level::e, n, fock_cutoff));
        u(en, en) = std::polar(1.0, -angle * static_cast<double>(n));
    }
    return u;
}

/// Ramsey zone: |e> -> (|g> + |e>)/sqrt2, |g> -> (|g> - |e>)/sqrt2.
inline Matrix ramsey_unitary() {
    const double s = std::numbers::sqrt2 / 2.0;
    Matrix u(2, 2);
    u << s, s,
        -s, s;
    return u;
}

inline Matrix pauli(Pauli which) {
    const cplx i{0.0, 1.0};
    Matrix u(2, 2);
    switch (which) {
    case Pauli::x:
        u << 0, 1,
             1, 0;
        break;
    case Pauli::y:
        u << 0, -i,
             i, 0;
        break;
    case Pauli::z:
        u << 1, 0,
             0, -1;
        break;
    }
    return u;
}

/// A gate bound to register labels. Two-body kinds take (atom, mode).
struct GateSpec {
    GateKind kind;
    std::vector<std::string> targets;
    /// lambda*t for resonant, chi*t for dispersive; ignored otherwise.
    double angle = 0.0;

    void validate(const SubsystemLayout& layout) const {
        const bool two_body = kind == GateKind::resonant || kind == GateKind::dispersive;
        if (two_body) {
            if (targets.size() != 2 || layout.at(targets[0]).kind != SubsystemKind::atom ||
                layout.at(targets[1]).kind != SubsystemKind::mode) {
                throw LayoutError("atom-field gate needs targets (atom, mode)");
            }
        } else if (targets.size() != 1 || layout.at(targets[0]).kind != SubsystemKind::atom) {
            throw LayoutError("single-atom gate needs exactly one atom target");
        }
    }

    /// Local matrix of this gate for the given layout's mode cutoff.
    Matrix matrix(const SubsystemLayout& layout) const {
        validate(layout);
        switch (kind) {
        case GateKind::resonant:
            return resonant_unitary(angle, layout.at(targets[1]).dim - 1);
        case GateKind::dispersive:
            return dispersive_unitary(angle, layout.at(targets[1]).dim - 1);
        case GateKind::ramsey:
            return ramsey_unitary();
        case GateKind::pauli_x:
            return pauli(Pauli::x);
        case GateKind::pauli_y:
            return pauli(Pauli::y);
        case GateKind::pauli_z:
            return pauli(Pauli::z);
        }
        return {};
    }
};

inline StateVector apply(const GateSpec& gate, const StateVector& psi) {
    return apply(gate.matrix(psi.layout()), gate.targets, psi);
}

inline DensityMatrix apply(const GateSpec& gate, const DensityMatrix& rho) {
    return apply(gate.matrix(rho.layout()), gate.targets, rho);
}

/// max |U^dagger U - I|
inline double unitarity_error(const Matrix& u) {
    return (u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

}  // namespace cqtp
