#pragma once

// Dressed (eigen)basis of a cavity system and the operators expressed in it.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rabistat/model.hpp"
#include "rabistat/operator_core.hpp"

namespace rabistat {

// Eigenvalues closer than this are treated as one degenerate cluster.
inline constexpr double kDegeneracyTol = 1e-9;
// Transition elements below this magnitude are snapped to exactly zero.
inline constexpr double kTransitionSnap = 1e-12;

struct DressedBasis {
    RealVector energies;        // ascending
    Matrix vectors;             // column j is |j> in the bare basis
    std::vector<int> parities;  // +1 or -1 per state

    std::size_t dim() const noexcept { return static_cast<std::size_t>(energies.size()); }
    double energy(std::size_t j) const { return energies(static_cast<Eigen::Index>(j)); }
    // Delta_kj = omega_k - omega_j.
    double gap(std::size_t k, std::size_t j) const { return energy(k) - energy(j); }

    // Lowest n states; energies and vectors are kept as-is (not renormalized).
    DressedBasis truncated(std::size_t n) const;
};

struct ChannelElements {
    std::string name;
    ChannelKind kind;
    Matrix elements;  // C_jk = -i <j|(c - c^dagger)|k>
};

struct TransitionTable {
    Matrix field;  // X_jk = <j|X|k>
    std::vector<ChannelElements> channels;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(field.rows()); }
    TransitionTable truncated(std::size_t n) const;
};

// Full spectrum in ascending order with definite parity per state. Inside a
// degenerate cluster the vectors are rotated to diagonalize the parity and
// ordered +1 first; every vector is phased so its largest component is real
// and positive.
DressedBasis diagonalize(const QOperator& hamiltonian, const QOperator& parity);

TransitionTable transition_table(const DressedBasis& basis, const QOperator& field,
                                 std::span<const Channel> channels);

// Number of states with omega_j - omega_0 <= 30 T + 4, widened to close any
// degenerate cluster at the boundary.
std::size_t default_level_cut(const DressedBasis& basis, double temperature);

// -i sum_{j<k<level_cut} Delta_kj X_jk |j><k|, as a level_cut x level_cut
// operator in the dressed basis.
QOperator xdot_plus(const DressedBasis& basis, const TransitionTable& table,
                    std::size_t level_cut);

// Single emission line k -> j as a dim x dim dressed-basis operator.
QOperator xdot_plus_filtered(const DressedBasis& basis, const TransitionTable& table,
                             std::size_t j, std::size_t k);

struct LevelCrossing {
    std::size_t lower_level = 0;  // levels lower_level and lower_level + 1 swap
    double g_left = 0.0;
    double g_right = 0.0;
};

struct LevelTable {
    std::vector<double> g;
    std::vector<std::vector<double>> energies;  // [grid point][level]
    std::vector<LevelCrossing> crossings;
};

using SystemFactory = std::function<CavitySystem(double g)>;

// Energies of the lowest `levels` states over an ascending coupling grid.
// Crossings are found by following each state to the one with maximal
// eigenvector overlap at the next grid point.
LevelTable level_sweep(const SystemFactory& factory, std::span<const double> g_grid,
                       std::size_t levels, std::size_t workers = 1);

void write_level_csv(std::ostream& out, const LevelTable& table);
void write_crossings_csv(std::ostream& out, const LevelTable& table);

}  // namespace rabistat
