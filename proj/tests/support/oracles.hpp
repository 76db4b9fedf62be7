#pragma once

// Reference computations that avoid the library's own algorithms: eigenvalues
// from the characteristic polynomial, Kronecker products by index arithmetic.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXcd;

// Coefficients c[0..n] of det(x I - A) = sum c[k] x^(n-k), Faddeev-LeVerrier.
// Real for Hermitian A.
inline std::vector<double> char_poly(const Matrix& a) {
    const auto n = a.rows();
    std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
    c[0] = 1.0;
    Matrix m = Matrix::Zero(n, n);
    const Matrix id = Matrix::Identity(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        m = a * m + c[static_cast<std::size_t>(k - 1)] * id;
        const std::complex<double> t = (a * m).trace();
        c[static_cast<std::size_t>(k)] = -t.real() / static_cast<double>(k);
    }
    return c;
}

inline double eval_poly(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (double ck : c) v = v * x + ck;
    return v;
}

// Real roots in [lo, hi] located by sign changes on a scan and refined by
// bisection. Adequate for well-separated eigenvalues only.
inline std::vector<double> bisect_roots(const std::vector<double>& c, double lo, double hi, int scan = 20000) {
    std::vector<double> roots;
    const double h = (hi - lo) / scan;
    double x0 = lo, f0 = eval_poly(c, x0);
    for (int i = 1; i <= scan; ++i) {
        const double x1 = lo + h * i, f1 = eval_poly(c, x1);
        if (f0 == 0.0) roots.push_back(x0);
        else if (f0 * f1 < 0.0) {
            double a = x0, b = x1, fa = f0;
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a + b), fm = eval_poly(c, m);
                if (fa * fm <= 0.0) b = m;
                else { a = m; fa = fm; }
            }
            roots.push_back(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    return roots;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            for (Eigen::Index k = 0; k < b.rows(); ++k)
                for (Eigen::Index l = 0; l < b.cols(); ++l)
                    out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
    return out;
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace oracle
