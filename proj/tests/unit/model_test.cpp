#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../support/oracles.hpp"
#include "rabistat/error.hpp"
#include "rabistat/model.hpp"

using namespace rabistat;

namespace {

std::vector<double> sorted_eigenvalues(const QOperator& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix());
    std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    return v;
}

}  // namespace

TEST_CASE("uncoupled Rabi spectrum is n + {0, omega_x}") {
    const auto h = build_rabi({1.0, 1.3, 0.0, 6});
    auto e = sorted_eigenvalues(h);
    std::vector<double> expected;
    for (int n = 0; n < 6; ++n) {
        expected.push_back(n);
        expected.push_back(n + 1.3);
    }
    std::sort(expected.begin(), expected.end());
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(e[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("Jaynes-Cummings doublets split by 2 g sqrt(n)") {
    const double g = 0.03;
    const auto h = build_rwa({1.0, 1.0, g, 8});
    const auto e = sorted_eigenvalues(h);
    CHECK(e[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(e[1] == doctest::Approx(1.0 - g));
    CHECK(e[2] == doctest::Approx(1.0 + g));
    CHECK(e[3] == doctest::Approx(2.0 - g * std::sqrt(2.0)));
    CHECK(e[4] == doctest::Approx(2.0 + g * std::sqrt(2.0)));
    const auto space = rabi_space(8);
    CHECK(max_norm(commutator(h, excitation_number(space, ModelKind::Rabi))) < 1e-14);
}

TEST_CASE("parity commutes with the Rabi Hamiltonian but excitation number does not") {
    const auto space = rabi_space(10);
    const auto h = build_rabi({1.0, 1.0, 0.4, 10});
    const auto p = parity_operator(space, ModelKind::Rabi);
    CHECK(max_norm(commutator(h, p)) < 1e-14);
    CHECK(max_norm(commutator(h, excitation_number(space, ModelKind::Rabi))) > 0.1);
    CHECK(max_norm(p * p - QOperator::identity(space)) == 0.0);
    // |g, 0> is even, |e, 0> odd.
    CHECK(p(0, 0).real() == 1.0);
    CHECK(p(10, 10).real() == -1.0);
}

TEST_CASE("multi-emitter and two-mode builders") {
    MultiTlsParams mp;
    mp.emitters = {{1.0, 0.2}, {1.0, 0.2}};
    mp.n_fock = 5;
    const auto sys = multi_tls_system(mp);
    CHECK(sys.hamiltonian.dim() == 20);
    CHECK(sys.channels.size() == 3);
    CHECK(max_norm(commutator(sys.hamiltonian, sys.parity)) < 1e-14);
    CHECK_THROWS_AS(build_multi_tls(mp, 10), Error);

    TwoModeParams tp;
    tp.mode1 = {1.0, 0.3, 4};
    tp.mode2 = {2.0, 0.6, 3};
    const auto two = two_mode_system(tp);
    CHECK(two.hamiltonian.dim() == 24);
    CHECK(two.hamiltonian.is_hermitian());
    CHECK(max_norm(commutator(two.hamiltonian, two.parity)) < 1e-14);
    CHECK(two.channels.size() == 3);
    // Field of mode 1 only: X = -i (a1 - a1^dag), so <0,1|X|0,0> sits on mode 1.
    CHECK(two.field.is_hermitian());
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(build_rabi({1.0, 1.0, -0.1, 5}), Error);
    CHECK_THROWS_AS(build_rabi({0.0, 1.0, 0.1, 5}), Error);
    CHECK_THROWS_AS(build_rabi({1.0, 1.0, 0.1, 1}), Error);
    MultiTlsParams none;
    none.n_fock = 4;
    CHECK_THROWS_AS(build_multi_tls(none), Error);
}
