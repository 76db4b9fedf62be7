#include "rabistat/thermal.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

#include "rabistat/error.hpp"

namespace rabistat {

Matrix ThermalState::density() const { return populations.cast<Complex>().asDiagonal().toDenseMatrix(); }

ThermalState thermal_state(const DressedBasis& basis, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorCode::InvalidParams,
                    "temperature must be > 0, got " + std::to_string(temperature));
    }
    // Measured from the ground state so the exponent never overflows; deep
    // tails underflow gracefully to zero.
    const double e0 = basis.energy(0);
    RealVector weights(basis.energies.size());
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
        weights(j) = std::exp(-(basis.energies(j) - e0) / temperature);
    }
    const double z = weights.sum();
    return {temperature, weights / z, z};
}

ThermalState ground_state(const DressedBasis& basis) {
    RealVector p = RealVector::Zero(basis.energies.size());
    p(0) = 1.0;
    return {0.0, std::move(p), 1.0};
}

namespace {

Matrix emission_operator(const DressedBasis& basis, const TransitionTable& table, const ThermalState& state) {
    if (state.dim() != basis.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "thermal state and basis dimensions differ");
    }
    return xdot_plus(basis, table, state.dim()).matrix();
}

}  // namespace

double photon_flux(const DressedBasis& basis, const TransitionTable& table, const ThermalState& state) {
    const Matrix xp = emission_operator(basis, table, state);
    return (xp.cwiseAbs2() * state.populations).sum();
}

double g2_zero(const DressedBasis& basis, const TransitionTable& table, const ThermalState& state) {
    const Matrix xp = emission_operator(basis, table, state);
    const double flux = (xp.cwiseAbs2() * state.populations).sum();
    if (!(flux > kFluxFloor)) {
        throw Error(ErrorCode::UndefinedStatistics,
                    "photon flux " + std::to_string(flux) + " below floor; g2(0) undefined");
    }
    const Matrix two = xp * xp;
    const double pairs = (two.cwiseAbs2() * state.populations).sum();
    return pairs / (flux * flux);
}

double normal_order_g2(const Matrix& rho, const Matrix& a) {
    const Matrix ad = a.adjoint();
    const double n = (ad * a * rho).trace().real();
    if (!(n > kFluxFloor)) {
        throw Error(ErrorCode::UndefinedStatistics, "mean photon number below floor; g2(0) undefined");
    }
    const double pairs = (ad * ad * a * a * rho).trace().real();
    return pairs / (n * n);
}

Matrix bare_thermal_product_state(const RabiParams& params, double temperature) {
    params.validate();
    if (!(temperature > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "temperature must be > 0");
    }
    const auto n = static_cast<Eigen::Index>(params.n_fock);
    RealVector mode(n);
    for (Eigen::Index m = 0; m < n; ++m) mode(m) = std::exp(-params.omega0 * static_cast<double>(m) / temperature);
    mode /= mode.sum();
    RealVector tls(2);
    tls << 1.0, std::exp(-params.omega_x / temperature);
    tls /= tls.sum();
    const Eigen::MatrixXd rho_tls = tls.asDiagonal().toDenseMatrix();
    const Eigen::MatrixXd rho_mode = mode.asDiagonal().toDenseMatrix();
    return Eigen::kroneckerProduct(rho_tls, rho_mode).eval().cast<Complex>();
}

double g2_zero_rwa_baseline(const RabiParams& params, double temperature) {
    const Matrix rho = bare_thermal_product_state(params, temperature);
    const auto a = embed(fock_annihilation(params.n_fock), rabi_space(params.n_fock), 1);
    return normal_order_g2(rho, a.matrix());
}

}  // namespace rabistat
