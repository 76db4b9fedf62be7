#include "rabistat/operator_core.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

#include "rabistat/error.hpp"

namespace rabistat {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidDimension: return "invalid-dimension";
        case ErrorCode::DimensionMismatch: return "dimension-mismatch";
        case ErrorCode::InvalidParams: return "invalid-params";
        case ErrorCode::NonHermitian: return "non-hermitian";
        case ErrorCode::EigensolverFailure: return "eigensolver-failure";
        case ErrorCode::UndefinedStatistics: return "undefined-statistics";
        case ErrorCode::AmbiguousSteadyState: return "ambiguous-steady-state";
        case ErrorCode::NonStationary: return "non-stationary";
        case ErrorCode::Stiffness: return "stiffness";
        case ErrorCode::ZeroTransition: return "zero-transition";
        case ErrorCode::WindowTooShort: return "window-too-short";
        case ErrorCode::Config: return "config";
    }
    return "unknown";
}

HilbertSpace::HilbertSpace(std::vector<std::size_t> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) {
        throw Error(ErrorCode::InvalidDimension, "Hilbert space needs at least one factor");
    }
    for (auto d : factors_) {
        if (d < 2) {
            throw Error(ErrorCode::InvalidDimension,
                        "factor dimension must be >= 2, got " + std::to_string(d));
        }
        total_dim_ *= d;
    }
}

HilbertSpace HilbertSpace::flat(std::size_t dim) { return HilbertSpace({dim}); }

QOperator::QOperator(HilbertSpace space, Matrix elements)
    : space_(std::move(space)), elements_(std::move(elements)) {
    const auto n = static_cast<Eigen::Index>(space_.total_dim());
    if (elements_.rows() != n || elements_.cols() != n) {
        throw Error(ErrorCode::DimensionMismatch,
                    "matrix is " + std::to_string(elements_.rows()) + "x" +
                        std::to_string(elements_.cols()) + " but space has dimension " +
                        std::to_string(n));
    }
}

QOperator QOperator::zero(const HilbertSpace& space) {
    const auto n = static_cast<Eigen::Index>(space.total_dim());
    return {space, Matrix::Zero(n, n)};
}

QOperator QOperator::identity(const HilbertSpace& space) {
    const auto n = static_cast<Eigen::Index>(space.total_dim());
    return {space, Matrix::Identity(n, n)};
}

bool QOperator::is_hermitian(double tol) const {
    return max_norm(Matrix(elements_ - elements_.adjoint())) <= tol;
}

void QOperator::require_hermitian(const char* what, double tol) const {
    const double defect = max_norm(Matrix(elements_ - elements_.adjoint()));
    if (defect > tol) {
        throw Error(ErrorCode::NonHermitian, std::string(what) + " is not Hermitian (defect " +
                                                 std::to_string(defect) + ")");
    }
}

QOperator fock_annihilation(std::size_t n_fock) {
    if (n_fock < 2) {
        throw Error(ErrorCode::InvalidDimension,
                    "n_fock must be >= 2, got " + std::to_string(n_fock));
    }
    const auto n = static_cast<Eigen::Index>(n_fock);
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index m = 1; m < n; ++m) a(m - 1, m) = std::sqrt(static_cast<double>(m));
    return {HilbertSpace({n_fock}), std::move(a)};
}

QOperator tls_lowering() {
    // |g> = index 0, |e> = index 1.
    Matrix s = Matrix::Zero(2, 2);
    s(0, 1) = 1.0;
    return {HilbertSpace({2}), std::move(s)};
}

QOperator embed(const QOperator& op, const HilbertSpace& space, std::size_t slot) {
    if (slot >= space.factor_count()) {
        throw Error(ErrorCode::InvalidParams, "slot " + std::to_string(slot) +
                                                  " out of range for " +
                                                  std::to_string(space.factor_count()) +
                                                  " factors");
    }
    if (op.dim() != space.factors()[slot]) {
        throw Error(ErrorCode::DimensionMismatch,
                    "operator dimension " + std::to_string(op.dim()) + " does not match factor " +
                        std::to_string(space.factors()[slot]));
    }
    Matrix out = Matrix::Identity(1, 1);
    for (std::size_t f = 0; f < space.factor_count(); ++f) {
        const auto d = static_cast<Eigen::Index>(space.factors()[f]);
        Matrix next = f == slot ? Matrix(Eigen::kroneckerProduct(out, op.matrix()))
                                : Matrix(Eigen::kroneckerProduct(out, Matrix::Identity(d, d)));
        out = std::move(next);
    }
    return {space, std::move(out)};
}

namespace {

void require_same_space(const QOperator& lhs, const QOperator& rhs) {
    if (lhs.dim() != rhs.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "operand dimensions " +
                                                      std::to_string(lhs.dim()) + " and " +
                                                      std::to_string(rhs.dim()) + " differ");
    }
}

}  // namespace

QOperator adjoint(const QOperator& op) { return {op.space(), op.matrix().adjoint()}; }

QOperator operator*(const QOperator& lhs, const QOperator& rhs) {
    require_same_space(lhs, rhs);
    return {lhs.space(), lhs.matrix() * rhs.matrix()};
}

QOperator operator+(const QOperator& lhs, const QOperator& rhs) {
    require_same_space(lhs, rhs);
    return {lhs.space(), lhs.matrix() + rhs.matrix()};
}

QOperator operator-(const QOperator& lhs, const QOperator& rhs) {
    require_same_space(lhs, rhs);
    return {lhs.space(), lhs.matrix() - rhs.matrix()};
}

QOperator operator*(Complex scale, const QOperator& op) { return {op.space(), scale * op.matrix()}; }

QOperator operator*(double scale, const QOperator& op) { return {op.space(), scale * op.matrix()}; }

QOperator commutator(const QOperator& lhs, const QOperator& rhs) {
    require_same_space(lhs, rhs);
    return {lhs.space(), lhs.matrix() * rhs.matrix() - rhs.matrix() * lhs.matrix()};
}

Complex trace(const QOperator& op) { return op.matrix().trace(); }

double max_norm(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double max_norm(const QOperator& op) { return max_norm(op.matrix()); }

}  // namespace rabistat
