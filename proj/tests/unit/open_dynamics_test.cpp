#include <doctest.h>

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "../support/oracles.hpp"
#include "rabistat/correlations.hpp"
#include "rabistat/error.hpp"
#include "rabistat/open_dynamics.hpp"
#include "rabistat/thermal.hpp"

using namespace rabistat;

namespace {

struct OpenRabi {
    DressedBasis basis;
    TransitionTable table;
    Liouvillian liouvillian;
};

OpenRabi open_rabi(double g, double t, double ga = 0.01, double gx = 0.01, std::size_t n = 20) {
    auto sys = rabi_system({1.0, 1.0, g, n});
    auto full = diagonalize(sys.hamiltonian, sys.parity);
    auto table = transition_table(full, sys.field, sys.channels);
    const auto cut = default_level_cut(full, t);
    auto basis = full.truncated(cut);
    table = table.truncated(cut);
    auto l = build_liouvillian(basis, all_rates(basis, table, {ga, gx, t}));
    return {std::move(basis), std::move(table), std::move(l)};
}

Matrix random_unitary(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> d;
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = Complex(d(rng), d(rng));
    return Eigen::HouseholderQR<Matrix>(m).householderQ();
}

Matrix random_density(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> d;
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = Complex(d(rng), d(rng));
    Matrix rho = m * m.adjoint();
    return rho / rho.trace();
}

Eigen::VectorXcd vec(const Matrix& m) { return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size()); }

}  // namespace

TEST_CASE("upward and downward rates obey detailed balance") {
    const auto m = open_rabi(0.5, 0.1);
    for (const auto& c : m.liouvillian.channels()) {
        for (Eigen::Index j = 0; j < c.gamma.rows(); ++j)
            for (Eigen::Index k = j + 1; k < c.gamma.cols(); ++k) {
                if (c.gamma(j, k) == 0.0) continue;
                const double delta = m.basis.energies(k) - m.basis.energies(j);
                CHECK(c.nbar(j, k) / (1.0 + c.nbar(j, k)) == doctest::Approx(std::exp(-delta / 0.1)).epsilon(1e-10));
            }
    }
    CHECK(thermal_occupation(1.0, 0.0) == 0.0);
    CHECK_THROWS_AS(thermal_occupation(0.0, 0.1), Error);
    CHECK_THROWS_AS(BathSpec({-0.01, 0.01, 0.1}).validate(), Error);
}

TEST_CASE("steady state is the canonical state for any damping") {
    for (auto [ga, gx] : {std::pair{0.01, 0.01}, std::pair{0.03, 0.005}}) {
        const auto m = open_rabi(0.9, 0.15, ga, gx);
        const Matrix rho = steady_state(m.liouvillian);
        const Matrix expected = thermal_state(m.basis, 0.15).density();
        CHECK(oracle::max_abs(rho - expected) < 1e-10);
    }
}

TEST_CASE("evolution preserves trace and hermiticity") {
    const auto m = open_rabi(0.3, 0.2);
    const int d = int(m.basis.dim());
    const Matrix rho0 = random_density(d, 7);
    const std::vector<double> times{0.0, 0.5, 3.0, 40.0, 400.0};
    const auto states = evolve(m.liouvillian, rho0, times);
    for (const auto& rho : states) {
        CHECK(std::abs(rho.trace() - Complex(1.0)) < 1e-10);
        CHECK(oracle::max_abs(rho - rho.adjoint()) < 1e-12);
    }
    CHECK_THROWS_AS(evolve(m.liouvillian, 2.0 * rho0, times), Error);
}

TEST_CASE("closed-form secular propagation equals the dense exponential") {
    const auto m = open_rabi(0.6, 0.1);
    REQUIRE(Propagator(m.liouvillian).secular());
    const int d = int(m.basis.dim());
    Matrix y0 = random_density(d, 3) + Complex(0, 1) * random_density(d, 4);  // not Hermitian on purpose
    const std::vector<double> times{0.7, 12.0};
    std::vector<Matrix> got(times.size());
    Propagator(m.liouvillian).evolve(y0, times, [&](std::size_t i, const Matrix& y) { got[i] = y; });
    for (std::size_t i = 0; i < times.size(); ++i) {
        const Eigen::VectorXcd ref = (m.liouvillian.matrix() * times[i]).exp() * vec(y0);
        CHECK((vec(got[i]) - ref).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("regression on a damped two-level system in a rotated basis") {
    // Rotating the basis hides the secular structure, so this runs the dense path.
    const double w = 0.7, gamma = 0.05, n = 0.3;
    const Matrix u = random_unitary(2, 11);
    Matrix h0 = Matrix::Zero(2, 2);
    h0(1, 1) = w;
    Matrix sm = Matrix::Zero(2, 2);
    sm(0, 1) = 1.0;
    const Matrix h = u * h0 * u.adjoint();
    const Matrix lower = u * sm * u.adjoint();
    const std::vector<JumpOperator> jumps{{lower, gamma * (1 + n)}, {lower.adjoint(), gamma * n}};
    const auto l = lindblad(h, jumps);
    CHECK_FALSE(Propagator(l).secular());

    const Matrix rho = steady_state(l);
    const double pe = n / (1 + 2 * n);
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 1 - pe;
    expected(1, 1) = pe;
    CHECK(oracle::max_abs(rho - u * expected * u.adjoint()) < 1e-12);

    std::vector<double> tau;
    for (int i = 0; i <= 50; ++i) tau.push_back(i * 1.3);
    const auto c = two_time(l, rho, lower.adjoint(), lower, tau);
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const Complex exact = pe * std::exp(Complex(-gamma * (1 + 2 * n) / 2, -w) * tau[i]);
        CHECK(std::abs(c[i] - exact) < 1e-10);
    }
}

TEST_CASE("standard master equation relaxes to the bare product state when uncoupled") {
    const RabiParams p{1.0, 1.0, 0.0, 10};
    const auto rho = steady_state(standard_me_baseline(p, {0.01, 0.01, 0.3}));
    CHECK(oracle::max_abs(rho - bare_thermal_product_state(p, 0.3)) < 1e-10);
}

TEST_CASE("no dissipation leaves the steady state ambiguous") {
    Matrix h = Matrix::Zero(3, 3);
    h(1, 1) = 1.0;
    h(2, 2) = 2.5;
    const auto l = lindblad(h, {});
    try {
        steady_state(l);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AmbiguousSteadyState);
    }
}

TEST_CASE("Liouvillian index is column stacking") {
    const auto m = open_rabi(0.2, 0.1);
    const auto d = m.liouvillian.dim();
    CHECK(m.liouvillian.index(1, 0) == 1);
    CHECK(m.liouvillian.index(0, 1) == d);
    const Matrix rho = random_density(int(d), 5);
    const Eigen::VectorXcd lv = m.liouvillian.matrix() * vec(rho);
    CHECK((vec(m.liouvillian.apply(rho)) - lv).cwiseAbs().maxCoeff() < 1e-14);
}
