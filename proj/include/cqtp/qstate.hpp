// qstate.hpp
// Dense composite-register states: labeled subsystem layouts, state vectors,
// density matrices, local operator action, partial trace and fidelity.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cqtp {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kNormTolerance = 1e-10;

class LayoutError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Atomic level in the two-level basis. The numeric value is the basis index.
enum class Level : int { g = 0, e = 1 };

inline const char* to_string(Level l) { return l == Level::g ? "g" : "e"; }

enum class SubsystemKind { atom, mode };

struct Subsystem {
    std::string label;
    std::size_t dim;
    SubsystemKind kind;

    bool operator==(const Subsystem&) const = default;
};

inline Subsystem atom(std::string label) { return {std::move(label), 2, SubsystemKind::atom}; }

/// A cavity mode truncated at `fock_cutoff` photons (dimension cutoff + 1).
inline Subsystem mode(std::string label, std::size_t fock_cutoff) {
    if (fock_cutoff < 1) {
        throw LayoutError("fock cutoff must be at least 1 for mode '" + label + "'");
    }
    return {std::move(label), fock_cutoff + 1, SubsystemKind::mode};
}

/// Ordered list of labeled subsystems. Basis indices are mixed-radix with the
/// first entry most significant, which matches the Kronecker product order.
class SubsystemLayout {
  public:
    SubsystemLayout() = default;

    explicit SubsystemLayout(std::vector<Subsystem> entries) : entries_(std::move(entries)) {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& s = entries_[i];
            if (s.dim < 1) {
                throw LayoutError("subsystem '" + s.label + "' has zero dimension");
            }
            if (s.kind == SubsystemKind::atom && s.dim != 2) {
                throw LayoutError("atom '" + s.label + "' must have dimension 2");
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (entries_[j].label == s.label) {
                    throw LayoutError("duplicate subsystem label '" + s.label + "'");
                }
            }
        }
    }

    std::size_t size() const { return entries_.size(); }
    const std::vector<Subsystem>& entries() const { return entries_; }
    const Subsystem& operator[](std::size_t i) const { return entries_[i]; }

    std::size_t dim() const {
        std::size_t d = 1;
        for (const auto& s : entries_) d *= s.dim;
        return d;
    }

    bool contains(const std::string& label) const {
        return std::any_of(entries_.begin(), entries_.end(),
                           [&](const Subsystem& s) { return s.label == label; });
    }

    std::size_t position(const std::string& label) const {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].label == label) return i;
        }
        throw LayoutError("unknown subsystem label '" + label + "'");
    }

    const Subsystem& at(const std::string& label) const { return entries_[position(label)]; }

    /// Index stride of the subsystem at position `i`.
    std::size_t stride(std::size_t i) const {
        std::size_t s = 1;
        for (std::size_t j = i + 1; j < entries_.size(); ++j) s *= entries_[j].dim;
        return s;
    }

    std::size_t index_of(std::span<const std::size_t> digits) const {
        if (digits.size() != entries_.size()) {
            throw ShapeError("basis digit count does not match layout size");
        }
        std::size_t idx = 0;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (digits[i] >= entries_[i].dim) {
                throw ShapeError("basis digit out of range for '" + entries_[i].label + "'");
            }
            idx = idx * entries_[i].dim + digits[i];
        }
        return idx;
    }

    std::vector<std::size_t> digits_of(std::size_t index) const {
        std::vector<std::size_t> d(entries_.size());
        for (std::size_t i = entries_.size(); i-- > 0;) {
            d[i] = index % entries_[i].dim;
            index /= entries_[i].dim;
        }
        return d;
    }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& s : entries_) out.push_back(s.label);
        return out;
    }

    /// Layout restricted to `labels`, in the order given.
    SubsystemLayout select(std::span<const std::string> labels) const {
        std::vector<Subsystem> out;
        out.reserve(labels.size());
        for (const auto& l : labels) out.push_back(at(l));
        return SubsystemLayout(std::move(out));
    }

    SubsystemLayout concat(const SubsystemLayout& other) const {
        std::vector<Subsystem> out = entries_;
        out.insert(out.end(), other.entries_.begin(), other.entries_.end());
        return SubsystemLayout(std::move(out));
    }

    bool operator==(const SubsystemLayout&) const = default;

  private:
    std::vector<Subsystem> entries_;
};

namespace detail {

// Offsets of every basis state of `labels` (mixed radix in the given order)
// and of every basis state of the complementary subsystems.
struct IndexSplit {
    std::vector<std::size_t> inner;
    std::vector<std::size_t> outer;
};

inline std::vector<std::size_t> enumerate_offsets(const SubsystemLayout& layout,
                                                  std::span<const std::size_t> positions) {
    std::vector<std::size_t> offsets{0};
    for (std::size_t p : positions) {
        const std::size_t dim = layout[p].dim;
        const std::size_t stride = layout.stride(p);
        std::vector<std::size_t> next;
        next.reserve(offsets.size() * dim);
        for (std::size_t base : offsets) {
            for (std::size_t d = 0; d < dim; ++d) next.push_back(base + d * stride);
        }
        offsets = std::move(next);
    }
    return offsets;
}

inline IndexSplit split_indices(const SubsystemLayout& layout,
                                std::span<const std::string> labels) {
    std::vector<std::size_t> inner_pos;
    inner_pos.reserve(labels.size());
    for (const auto& l : labels) {
        const std::size_t p = layout.position(l);
        if (std::find(inner_pos.begin(), inner_pos.end(), p) != inner_pos.end()) {
            throw LayoutError("label '" + l + "' listed twice");
        }
        inner_pos.push_back(p);
    }
    std::vector<std::size_t> outer_pos;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (std::find(inner_pos.begin(), inner_pos.end(), i) == inner_pos.end()) {
            outer_pos.push_back(i);
        }
    }
    return {enumerate_offsets(layout, inner_pos), enumerate_offsets(layout, outer_pos)};
}

// Left-multiplies every column of `m` by `op` acting on the `labels` factor.
inline Matrix apply_left(const Matrix& op, std::span<const std::string> labels,
                         const SubsystemLayout& layout, const Matrix& m) {
    const IndexSplit split = split_indices(layout, labels);
    const auto local = static_cast<Eigen::Index>(split.inner.size());
    if (op.rows() != local || op.cols() != local) {
        throw ShapeError("operator is " + std::to_string(op.rows()) + "x" +
                         std::to_string(op.cols()) + " but targets span dimension " +
                         std::to_string(local));
    }
    Matrix out(m.rows(), m.cols());
    Matrix block(local, m.cols());
    for (std::size_t base : split.outer) {
        for (Eigen::Index i = 0; i < local; ++i) block.row(i) = m.row(base + split.inner[i]);
        const Matrix result = op * block;
        for (Eigen::Index i = 0; i < local; ++i) out.row(base + split.inner[i]) = result.row(i);
    }
    return out;
}

}  // namespace detail

class StateVector {
  public:
    StateVector(SubsystemLayout layout, Vector amplitudes)
        : layout_(std::move(layout)), amps_(std::move(amplitudes)) {
        if (static_cast<std::size_t>(amps_.size()) != layout_.dim()) {
            throw ShapeError("amplitude count " + std::to_string(amps_.size()) +
                             " does not match layout dimension " + std::to_string(layout_.dim()));
        }
    }

    /// Product basis state with the given digit per subsystem.
    static StateVector basis(SubsystemLayout layout, std::span<const std::size_t> digits) {
        Vector a = Vector::Zero(static_cast<Eigen::Index>(layout.dim()));
        a(static_cast<Eigen::Index>(layout.index_of(digits))) = 1.0;
        return {std::move(layout), std::move(a)};
    }

    static StateVector basis(SubsystemLayout layout, std::initializer_list<std::size_t> digits) {
        return basis(std::move(layout), std::span<const std::size_t>(digits.begin(), digits.size()));
    }

    const SubsystemLayout& layout() const { return layout_; }
    const Vector& amplitudes() const { return amps_; }
    std::size_t dim() const { return layout_.dim(); }

    cplx amplitude(std::span<const std::size_t> digits) const {
        return amps_(static_cast<Eigen::Index>(layout_.index_of(digits)));
    }
    cplx amplitude(std::initializer_list<std::size_t> digits) const {
        return amplitude(std::span<const std::size_t>(digits.begin(), digits.size()));
    }

    double norm_squared() const { return amps_.squaredNorm(); }

    StateVector normalized() const {
        const double n = amps_.norm();
        if (n == 0.0) throw std::domain_error("cannot normalize the zero vector");
        return {layout_, amps_ / n};
    }

  private:
    SubsystemLayout layout_;
    Vector amps_;
};

class DensityMatrix {
  public:
    DensityMatrix(SubsystemLayout layout, Matrix matrix)
        : layout_(std::move(layout)), mat_(std::move(matrix)) {
        const auto d = static_cast<Eigen::Index>(layout_.dim());
        if (mat_.rows() != d || mat_.cols() != d) {
            throw ShapeError("density matrix shape does not match layout dimension " +
                             std::to_string(d));
        }
    }

    explicit DensityMatrix(const StateVector& psi)
        : DensityMatrix(psi.layout(), psi.amplitudes() * psi.amplitudes().adjoint()) {}

    const SubsystemLayout& layout() const { return layout_; }
    const Matrix& matrix() const { return mat_; }
    std::size_t dim() const { return layout_.dim(); }

    double trace() const { return mat_.trace().real(); }

    DensityMatrix normalized() const {
        const double t = trace();
        if (t <= 0.0) throw std::domain_error("cannot normalize a density matrix with zero trace");
        return {layout_, mat_ / t};
    }

    double hermiticity_error() const { return (mat_ - mat_.adjoint()).cwiseAbs().maxCoeff(); }

    double min_eigenvalue() const {
        const Matrix herm = 0.5 * (mat_ + mat_.adjoint());
        Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    /// Hermitian to 1e-10, unit trace to 1e-10, eigenvalues above -1e-9.
    bool is_valid() const {
        return hermiticity_error() <= 1e-10 && std::abs(trace() - 1.0) <= 1e-10 &&
               min_eigenvalue() >= -1e-9;
    }

  private:
    SubsystemLayout layout_;
    Matrix mat_;
};

// ---------------------------------------------------------------------------
// Construction

inline StateVector tensor(std::span<const StateVector> factors) {
    if (factors.empty()) throw ShapeError("tensor of an empty factor list");
    SubsystemLayout layout = factors[0].layout();
    Vector amps = factors[0].amplitudes();
    for (std::size_t k = 1; k < factors.size(); ++k) {
        layout = layout.concat(factors[k].layout());
        const Vector& b = factors[k].amplitudes();
        Vector next(amps.size() * b.size());
        for (Eigen::Index i = 0; i < amps.size(); ++i) next.segment(i * b.size(), b.size()) = amps(i) * b;
        amps = std::move(next);
    }
    return {std::move(layout), std::move(amps)};
}

inline StateVector tensor(const StateVector& a, const StateVector& b) {
    const StateVector f[] = {a, b};
    return tensor(std::span<const StateVector>(f));
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
    SubsystemLayout layout = a.layout().concat(b.layout());
    Matrix m = Eigen::kroneckerProduct(a.matrix(), b.matrix());
    return {std::move(layout), std::move(m)};
}

/// Renames subsystems; `renames` holds (old, new) pairs.
inline SubsystemLayout relabel(const SubsystemLayout& layout,
                               std::span<const std::pair<std::string, std::string>> renames) {
    std::vector<Subsystem> entries = layout.entries();
    for (const auto& [from, to] : renames) entries[layout.position(from)].label = to;
    return SubsystemLayout(std::move(entries));
}

inline StateVector relabel(const StateVector& psi,
                           std::span<const std::pair<std::string, std::string>> renames) {
    return {relabel(psi.layout(), renames), psi.amplitudes()};
}

/// Permutes the subsystems of `psi` into the order given by `labels`.
inline StateVector reorder(const StateVector& psi, std::span<const std::string> labels) {
    if (labels.size() != psi.layout().size()) {
        throw LayoutError("reorder requires every label exactly once");
    }
    const auto offsets = detail::split_indices(psi.layout(), labels).inner;
    Vector out(psi.amplitudes().size());
    for (std::size_t i = 0; i < offsets.size(); ++i) out(i) = psi.amplitudes()(offsets[i]);
    return {psi.layout().select(labels), std::move(out)};
}

inline DensityMatrix reorder(const DensityMatrix& rho, std::span<const std::string> labels) {
    if (labels.size() != rho.layout().size()) {
        throw LayoutError("reorder requires every label exactly once");
    }
    const auto offsets = detail::split_indices(rho.layout(), labels).inner;
    const auto n = static_cast<Eigen::Index>(offsets.size());
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = rho.matrix()(offsets[i], offsets[j]);
    }
    return {rho.layout().select(labels), std::move(out)};
}

/// Full-space matrix of `op` acting on `targets` (in the given order) and the
/// identity elsewhere.
inline Matrix embed(const Matrix& op, std::span<const std::string> targets,
                    const SubsystemLayout& layout) {
    const auto d = static_cast<Eigen::Index>(layout.dim());
    return detail::apply_left(op, targets, layout, Matrix::Identity(d, d));
}

inline Matrix embed(const Matrix& op, std::initializer_list<std::string> targets,
                    const SubsystemLayout& layout) {
    return embed(op, std::span<const std::string>(targets.begin(), targets.size()), layout);
}

// ---------------------------------------------------------------------------
// Local action

inline StateVector apply(const Matrix& op, std::span<const std::string> targets,
                         const StateVector& psi) {
    Matrix col = psi.amplitudes();
    Matrix out = detail::apply_left(op, targets, psi.layout(), col);
    return {psi.layout(), out.col(0)};
}

inline StateVector apply(const Matrix& op, std::initializer_list<std::string> targets,
                         const StateVector& psi) {
    return apply(op, std::span<const std::string>(targets.begin(), targets.size()), psi);
}

/// op * rho * op^dagger
inline DensityMatrix apply(const Matrix& op, std::span<const std::string> targets,
                           const DensityMatrix& rho) {
    const Matrix left = detail::apply_left(op, targets, rho.layout(), rho.matrix());
    const Matrix both = detail::apply_left(op, targets, rho.layout(), left.adjoint()).adjoint();
    return {rho.layout(), both};
}

inline DensityMatrix apply(const Matrix& op, std::initializer_list<std::string> targets,
                           const DensityMatrix& rho) {
    return apply(op, std::span<const std::string>(targets.begin(), targets.size()), rho);
}

/// Sum over k of K_k rho K_k^dagger on the `targets` factor.
inline DensityMatrix apply_kraus(std::span<const Matrix> kraus, std::span<const std::string> targets,
                                 const DensityMatrix& rho) {
    Matrix acc = Matrix::Zero(rho.matrix().rows(), rho.matrix().cols());
    for (const auto& k : kraus) acc += apply(k, targets, rho).matrix();
    return {rho.layout(), std::move(acc)};
}

// ---------------------------------------------------------------------------
// Reduction and measurement

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::string> keep) {
    if (keep.empty()) throw LayoutError("partial trace must keep at least one subsystem");
    const auto split = detail::split_indices(rho.layout(), keep);
    const auto n = static_cast<Eigen::Index>(split.inner.size());
    Matrix out = Matrix::Zero(n, n);
    const Matrix& m = rho.matrix();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            cplx s = 0.0;
            for (std::size_t r : split.outer) s += m(split.inner[i] + r, split.inner[j] + r);
            out(i, j) = s;
        }
    }
    return {rho.layout().select(keep), std::move(out)};
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<std::string> keep) {
    return partial_trace(rho, std::span<const std::string>(keep.begin(), keep.size()));
}

/// Reduced density matrix of a pure state, without forming the full projector.
inline DensityMatrix partial_trace(const StateVector& psi, std::span<const std::string> keep) {
    if (keep.empty()) throw LayoutError("partial trace must keep at least one subsystem");
    const auto split = detail::split_indices(psi.layout(), keep);
    const auto n = static_cast<Eigen::Index>(split.inner.size());
    const auto r = static_cast<Eigen::Index>(split.outer.size());
    Matrix amps(n, r);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < r; ++k) amps(i, k) = psi.amplitudes()(split.inner[i] + split.outer[k]);
    }
    return {psi.layout().select(keep), amps * amps.adjoint()};
}

inline DensityMatrix partial_trace(const StateVector& psi, std::initializer_list<std::string> keep) {
    return partial_trace(psi, std::span<const std::string>(keep.begin(), keep.size()));
}

template <typename State>
struct Projection {
    double probability = 0.0;
    /// Renormalized post-measurement state; empty when the outcome has zero probability.
    std::optional<State> state;

    bool empty() const { return !state.has_value(); }
};

namespace detail {

inline Matrix level_projector(Level level) {
    Matrix p = Matrix::Zero(2, 2);
    const int i = static_cast<int>(level);
    p(i, i) = 1.0;
    return p;
}

inline void require_atom(const SubsystemLayout& layout, const std::string& label) {
    if (layout.at(label).kind != SubsystemKind::atom) {
        throw LayoutError("'" + label + "' is not an atom; level detection needs a two-level atom");
    }
}

// Probabilities this small are treated as an impossible outcome.
inline constexpr double kZeroProbability = 1e-300;

}  // namespace detail

/// Projects `label` onto `level`. The projected component is returned
/// unnormalized, so its squared norm is the outcome probability.
inline StateVector project(const StateVector& psi, const std::string& label, Level level) {
    detail::require_atom(psi.layout(), label);
    const std::string t[] = {label};
    return apply(detail::level_projector(level), t, psi);
}

inline DensityMatrix project(const DensityMatrix& rho, const std::string& label, Level level) {
    detail::require_atom(rho.layout(), label);
    const std::string t[] = {label};
    return apply(detail::level_projector(level), t, rho);
}

inline Projection<StateVector> project_and_condition(const StateVector& psi, const std::string& label,
                                                     Level level) {
    const StateVector projected = project(psi, label, level);
    const double p = projected.norm_squared();
    if (p <= detail::kZeroProbability) return {0.0, std::nullopt};
    return {p, StateVector(projected.layout(), projected.amplitudes() / std::sqrt(p))};
}

inline Projection<DensityMatrix> project_and_condition(const DensityMatrix& rho,
                                                       const std::string& label, Level level) {
    const DensityMatrix projected = project(rho, label, level);
    const double p = projected.trace();
    if (p <= detail::kZeroProbability) return {0.0, std::nullopt};
    return {p, DensityMatrix(projected.layout(), projected.matrix() / p)};
}

// ---------------------------------------------------------------------------
// Comparison

namespace detail {

inline double clamp_unit(double f) {
    if (f < -kNormTolerance || f > 1.0 + kNormTolerance) {
        throw std::domain_error("fidelity " + std::to_string(f) + " outside [0, 1]");
    }
    return std::clamp(f, 0.0, 1.0);
}

}  // namespace detail

/// <target|rho|target>, clamped to [0, 1].
inline double fidelity(const DensityMatrix& rho, const StateVector& target) {
    if (!(rho.layout() == target.layout())) throw LayoutError("fidelity: layout mismatch");
    const Vector& t = target.amplitudes();
    return detail::clamp_unit((t.adjoint() * rho.matrix() * t)(0, 0).real());
}

inline double fidelity(const StateVector& psi, const StateVector& target) {
    if (!(psi.layout() == target.layout())) throw LayoutError("fidelity: layout mismatch");
    return detail::clamp_unit(std::norm(target.amplitudes().dot(psi.amplitudes())));
}

/// Largest entrywise difference between `a` and `b` after removing the global
/// phase that best aligns them.
inline double phase_quotient_distance(const StateVector& a, const StateVector& b) {
    if (!(a.layout() == b.layout())) throw LayoutError("phase comparison: layout mismatch");
    const cplx overlap = a.amplitudes().dot(b.amplitudes());
    const cplx phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : cplx(1.0);
    return (a.amplitudes() * phase - b.amplitudes()).cwiseAbs().maxCoeff();
}

}  // namespace cqtp
