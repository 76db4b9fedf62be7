#pragma once

// Canonical equilibrium state in the dressed basis and equal-time photon
// statistics of the emitted field.

#include "rabistat/dressed.hpp"
#include "rabistat/model.hpp"

namespace rabistat {

// Below this photon flux the zero-delay statistics are reported as undefined.
inline constexpr double kFluxFloor = 1e-30;

struct ThermalState {
    double temperature = 0.0;  // k_B T in units of omega0; 0 marks the ground-state limit
    RealVector populations;    // p_j, summing to one
    double partition = 1.0;    // Z with energies measured from the ground state

    std::size_t dim() const noexcept { return static_cast<std::size_t>(populations.size()); }
    // Diagonal density matrix in the dressed basis.
    Matrix density() const;
};

ThermalState thermal_state(const DressedBasis& basis, double temperature);
ThermalState ground_state(const DressedBasis& basis);

// <Xdot^- Xdot^+> = sum_{j<k} p_k Delta_kj^2 |X_jk|^2.
double photon_flux(const DressedBasis& basis, const TransitionTable& table, const ThermalState& state);

// Tr[Xdot^- Xdot^- Xdot^+ Xdot^+ rho] / Tr[Xdot^- Xdot^+ rho]^2.
double g2_zero(const DressedBasis& basis, const TransitionTable& table, const ThermalState& state);

// <a^dag a^dag a a> / <a^dag a>^2 for an arbitrary state.
double normal_order_g2(const Matrix& rho, const Matrix& annihilation);

// Product of bare thermal states of mode and emitter on the Rabi space.
Matrix bare_thermal_product_state(const RabiParams& params, double temperature);

// Normal-order g2 of the bare mode in the bare product thermal state.
double g2_zero_rwa_baseline(const RabiParams& params, double temperature);

}  // namespace rabistat
