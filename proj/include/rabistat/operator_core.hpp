#pragma once

// Dense operators on truncated tensor-product Hilbert spaces.
//
// Energies are in units of the cavity frequency with hbar = 1. Matrices are
// stored densely; every operator carries the space it acts on so that
// dimension errors surface at the call site instead of deep inside Eigen.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

namespace rabistat {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-10;

class HilbertSpace {
public:
    explicit HilbertSpace(std::vector<std::size_t> factors);
    HilbertSpace(std::initializer_list<std::size_t> factors)
        : HilbertSpace(std::vector<std::size_t>(factors)) {}

    // Unstructured space of dimension d, used for dressed-basis operators.
    static HilbertSpace flat(std::size_t dim);

    const std::vector<std::size_t>& factors() const noexcept { return factors_; }
    std::size_t total_dim() const noexcept { return total_dim_; }
    std::size_t factor_count() const noexcept { return factors_.size(); }

    bool operator==(const HilbertSpace& other) const = default;

private:
    std::vector<std::size_t> factors_;
    std::size_t total_dim_ = 1;
};

class QOperator {
public:
    QOperator(HilbertSpace space, Matrix elements);

    static QOperator zero(const HilbertSpace& space);
    static QOperator identity(const HilbertSpace& space);

    const HilbertSpace& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return elements_; }
    std::size_t dim() const noexcept { return space_.total_dim(); }

    Complex operator()(std::size_t row, std::size_t col) const {
        return elements_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
    }

    bool is_hermitian(double tol = kHermitianTol) const;

    // Throws NonHermitian when ||M - M^dagger||_max exceeds tol.
    void require_hermitian(const char* what, double tol = kHermitianTol) const;

private:
    HilbertSpace space_;
    Matrix elements_;
};

QOperator fock_annihilation(std::size_t n_fock);
QOperator tls_lowering();

// I x ... x op x ... x I with op at position `slot`; factor 0 is the most
// significant index of the Kronecker product.
QOperator embed(const QOperator& op, const HilbertSpace& space, std::size_t slot);

QOperator adjoint(const QOperator& op);
QOperator operator*(const QOperator& lhs, const QOperator& rhs);
QOperator operator+(const QOperator& lhs, const QOperator& rhs);
QOperator operator-(const QOperator& lhs, const QOperator& rhs);
QOperator operator*(Complex scale, const QOperator& op);
QOperator operator*(double scale, const QOperator& op);
QOperator commutator(const QOperator& lhs, const QOperator& rhs);
Complex trace(const QOperator& op);
double max_norm(const QOperator& op);
double max_norm(const Matrix& m);

}  // namespace rabistat
