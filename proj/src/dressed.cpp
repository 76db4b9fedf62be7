#include "rabistat/dressed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "rabistat/error.hpp"
#include "rabistat/format.hpp"
#include "rabistat/parallel.hpp"

namespace rabistat {

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

DressedBasis DressedBasis::truncated(std::size_t n) const {
    if (n < 1 || n > dim()) {
        throw Error(ErrorCode::InvalidDimension,
                    "cannot truncate " + std::to_string(dim()) + " states to " + std::to_string(n));
    }
    const auto m = static_cast<Eigen::Index>(n);
    return {energies.head(m), vectors.leftCols(m),
            std::vector<int>(parities.begin(), parities.begin() + m)};
}

TransitionTable TransitionTable::truncated(std::size_t n) const {
    if (n < 1 || n > dim()) {
        throw Error(ErrorCode::InvalidDimension,
                    "cannot truncate " + std::to_string(dim()) + " states to " + std::to_string(n));
    }
    const auto m = static_cast<Eigen::Index>(n);
    TransitionTable out{field.topLeftCorner(m, m), {}};
    for (const auto& c : channels) out.channels.push_back({c.name, c.kind, c.elements.topLeftCorner(m, m)});
    return out;
}

namespace {

void fix_phase(Eigen::Ref<Vector> v) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v(i));
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }
    if (best_abs <= 0.0) return;
    v *= std::conj(v(best)) / best_abs;
    v(best) = best_abs;
}

}  // namespace

DressedBasis diagonalize(const QOperator& hamiltonian, const QOperator& parity) {
    hamiltonian.require_hermitian("Hamiltonian");
    if (parity.dim() != hamiltonian.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "parity and Hamiltonian dimensions differ");
    }
    const Matrix& h = hamiltonian.matrix();
    const Matrix& p = parity.matrix();
    const double scale = std::max(1.0, max_norm(h));
    if (max_norm(Matrix(h * p - p * h)) > 1e-8 * scale) {
        throw Error(ErrorCode::InvalidParams, "parity operator does not commute with the Hamiltonian");
    }

    Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::EigensolverFailure, "Hermitian eigensolver did not converge");
    }
    DressedBasis basis{solver.eigenvalues(), solver.eigenvectors(), {}};
    const Eigen::Index n = basis.energies.size();

    // Give each vector in a degenerate cluster definite parity, +1 first.
    for (Eigen::Index start = 0; start < n;) {
        Eigen::Index stop = start + 1;
        while (stop < n && basis.energies(stop) - basis.energies(stop - 1) < kDegeneracyTol) ++stop;
        const Eigen::Index size = stop - start;
        if (size > 1) {
            const Matrix block = basis.vectors.middleCols(start, size);
            Eigen::SelfAdjointEigenSolver<Matrix> sub(block.adjoint() * p * block);
            const Matrix rotated = block * sub.eigenvectors().rowwise().reverse();
            basis.vectors.middleCols(start, size) = rotated;
        }
        start = stop;
    }

    basis.parities.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        auto v = basis.vectors.col(j);
        const double value = (v.adjoint() * p * v)(0, 0).real();
        const double rounded = value >= 0.0 ? 1.0 : -1.0;
        if (std::abs(value - rounded) > 1e-6) {
            throw Error(ErrorCode::EigensolverFailure,
                        "eigenvector " + std::to_string(j) + " has no definite parity (" +
                            std::to_string(value) + ")");
        }
        basis.parities[static_cast<std::size_t>(j)] = static_cast<int>(rounded);
        fix_phase(v);
    }
    return basis;
}

namespace {

Matrix to_dressed(const DressedBasis& basis, const Matrix& bare) {
    Matrix m = basis.vectors.adjoint() * bare * basis.vectors;
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            if (std::abs(m(j, k)) < kTransitionSnap) {
                m(j, k) = 0.0;
                continue;
            }
            if (basis.parities[static_cast<std::size_t>(j)] == basis.parities[static_cast<std::size_t>(k)]) {
                // Only parity-changing operators are ever passed here.
                if (std::abs(m(j, k)) > 1e-8) {
                    throw Error(ErrorCode::InvalidParams,
                                "transition element between equal-parity states is nonzero");
                }
                m(j, k) = 0.0;
            }
        }
    }
    return m;
}

}  // namespace

TransitionTable transition_table(const DressedBasis& basis, const QOperator& field,
                                 std::span<const Channel> channels) {
    const auto bare_dim = static_cast<std::size_t>(basis.vectors.rows());
    if (field.dim() != bare_dim) {
        throw Error(ErrorCode::DimensionMismatch, "field operator does not match the basis");
    }
    TransitionTable table{to_dressed(basis, field.matrix()), {}};
    for (const auto& c : channels) {
        if (c.op.dim() != bare_dim) {
            throw Error(ErrorCode::DimensionMismatch, "channel '" + c.name + "' does not match the basis");
        }
        const Matrix quad = Complex(0.0, -1.0) * (c.op.matrix() - c.op.matrix().adjoint());
        table.channels.push_back({c.name, c.kind, to_dressed(basis, quad)});
    }
    return table;
}

std::size_t default_level_cut(const DressedBasis& basis, double temperature) {
    const double window = 30.0 * temperature + 4.0;
    const double e0 = basis.energy(0);
    std::size_t cut = 0;
    while (cut < basis.dim() && basis.energy(cut) - e0 <= window) ++cut;
    while (cut < basis.dim() && cut > 0 && basis.gap(cut, cut - 1) < kDegeneracyTol) ++cut;
    return std::clamp<std::size_t>(cut, std::min<std::size_t>(2, basis.dim()), basis.dim());
}

QOperator xdot_plus(const DressedBasis& basis, const TransitionTable& table, std::size_t level_cut) {
    if (level_cut < 2) {
        throw Error(ErrorCode::InvalidParams, "level_cut must be >= 2, got " + std::to_string(level_cut));
    }
    if (level_cut > basis.dim() || level_cut > table.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "level_cut " + std::to_string(level_cut) + " exceeds basis dimension");
    }
    const auto n = static_cast<Eigen::Index>(level_cut);
    Matrix m = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = j + 1; k < n; ++k) {
            const double delta = basis.energies(k) - basis.energies(j);
            m(j, k) = Complex(0.0, -delta) * table.field(j, k);
        }
    }
    return {HilbertSpace::flat(level_cut), std::move(m)};
}

QOperator xdot_plus_filtered(const DressedBasis& basis, const TransitionTable& table,
                             std::size_t j, std::size_t k) {
    if (k <= j) {
        throw Error(ErrorCode::InvalidParams, "filtered line needs k > j");
    }
    const std::size_t n = std::min(basis.dim(), table.dim());
    if (k >= n) {
        throw Error(ErrorCode::InvalidParams, "state index " + std::to_string(k) + " out of range");
    }
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const auto jj = static_cast<Eigen::Index>(j);
    const auto kk = static_cast<Eigen::Index>(k);
    m(jj, kk) = Complex(0.0, -basis.gap(k, j)) * table.field(jj, kk);
    return {HilbertSpace::flat(n), std::move(m)};
}

namespace {

// Maps each state at one grid point to a state at the next one, always
// consuming the largest remaining overlap first.
std::vector<std::size_t> match_states(const Matrix& prev, const Matrix& next) {
    const Eigen::MatrixXd overlap = (prev.adjoint() * next).cwiseAbs();
    const auto n = static_cast<std::size_t>(overlap.rows());
    std::vector<std::size_t> target(n, n);
    std::vector<bool> row_used(n, false), col_used(n, false);
    for (std::size_t round = 0; round < n; ++round) {
        double best = -1.0;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (row_used[i]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (col_used[j]) continue;
                const double v = overlap(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (v > best) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        row_used[bi] = col_used[bj] = true;
        target[bi] = bj;
    }
    return target;
}

}  // namespace

LevelTable level_sweep(const SystemFactory& factory, std::span<const double> g_grid,
                       std::size_t levels, std::size_t workers) {
    if (g_grid.empty()) throw Error(ErrorCode::InvalidParams, "coupling grid is empty");
    if (levels < 2) throw Error(ErrorCode::InvalidParams, "need at least two levels");
    for (std::size_t i = 1; i < g_grid.size(); ++i) {
        if (!(g_grid[i] > g_grid[i - 1])) throw Error(ErrorCode::InvalidParams, "coupling grid must ascend");
    }

    const std::size_t points = g_grid.size();
    std::vector<DressedBasis> bases(points);
    parallel_for(points, workers, [&](std::size_t i) {
        const auto system = factory(g_grid[i]);
        bases[i] = diagonalize(system.hamiltonian, system.parity);
    });

    const std::size_t dim = bases.front().dim();
    const std::size_t shown = std::min(levels, dim);
    // Track two spare levels so states entering from above are matched.
    const std::size_t tracked = std::min(levels + 2, dim);

    LevelTable table;
    table.g.assign(g_grid.begin(), g_grid.end());
    for (const auto& b : bases) {
        table.energies.emplace_back(b.energies.data(), b.energies.data() + shown);
    }
    const auto cols = static_cast<Eigen::Index>(tracked);
    for (std::size_t n = 0; n + 1 < points; ++n) {
        const auto map = match_states(bases[n].vectors.leftCols(cols), bases[n + 1].vectors.leftCols(cols));
        for (std::size_t i = 0; i + 1 < shown; ++i) {
            if (map[i] != i + 1 || map[i + 1] != i) continue;
            if (bases[n].gap(i + 1, i) < kDegeneracyTol || bases[n + 1].gap(i + 1, i) < kDegeneracyTol) continue;
            table.crossings.push_back({i, g_grid[n], g_grid[n + 1]});
        }
    }
    return table;
}

void write_level_csv(std::ostream& out, const LevelTable& table) {
    out << "g";
    const std::size_t levels = table.energies.empty() ? 0 : table.energies.front().size();
    for (std::size_t l = 0; l < levels; ++l) out << ",omega_" << l;
    out << '\n';
    for (std::size_t i = 0; i < table.g.size(); ++i) {
        out << format_number(table.g[i]);
        for (double e : table.energies[i]) out << ',' << format_number(e);
        out << '\n';
    }
}

void write_crossings_csv(std::ostream& out, const LevelTable& table) {
    out << "lower_level,upper_level,g_left,g_right\n";
    for (const auto& c : table.crossings) {
        out << c.lower_level << ',' << c.lower_level + 1 << ',' << format_number(c.g_left) << ','
            << format_number(c.g_right) << '\n';
    }
}

}  // namespace rabistat
