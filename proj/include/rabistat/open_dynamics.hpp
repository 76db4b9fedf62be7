#pragma once

// Thermal master equation in the dressed basis, its steady state and time
// evolution, plus the bare-operator master equation used as a baseline.
//
// Superoperators act on column-stacked density matrices:
// vec(rho)[i + d*j] = rho(i, j), so vec(A rho B) = (B^T kron A) vec(rho).

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <deque>
#include <vector>

#include "rabistat/dressed.hpp"
#include "rabistat/model.hpp"

namespace rabistat {

struct BathSpec {
    double gamma_a = 0.01;  // cavity damping, units of omega0
    double gamma_x = 0.01;  // emitter damping
    double temperature = 0.1;

    void validate() const;
    double rate_for(ChannelKind kind) const { return kind == ChannelKind::Cavity ? gamma_a : gamma_x; }
};

// 1 / (exp(delta / T) - 1); zero for T = 0.
double thermal_occupation(double delta, double temperature);

// Relaxation data of one channel. Only the strict upper triangle (j < k) is
// populated: gamma(j, k) = gamma_c (Delta_kj / omega0) |C_jk|^2 and
// nbar(j, k) = n(Delta_kj, T). Pairs closer than kDegeneracyTol get zero rate.
struct ChannelRates {
    std::string name;
    ChannelKind kind;
    Eigen::MatrixXd gamma;
    Eigen::MatrixXd nbar;
};

ChannelRates rates(const DressedBasis& basis, const TransitionTable& table, const BathSpec& bath,
                   std::size_t channel);
std::vector<ChannelRates> all_rates(const DressedBasis& basis, const TransitionTable& table,
                                    const BathSpec& bath);

class Liouvillian {
public:
    Liouvillian(std::size_t dim, Matrix superoperator, std::vector<ChannelRates> channels = {});

    std::size_t dim() const noexcept { return dim_; }
    const Matrix& matrix() const noexcept { return matrix_; }
    const std::vector<ChannelRates>& channels() const noexcept { return channels_; }

    Matrix apply(const Matrix& rho) const;

    std::size_t index(std::size_t row, std::size_t col) const noexcept { return row + dim_ * col; }

private:
    std::size_t dim_;
    Matrix matrix_;
    std::vector<ChannelRates> channels_;
};

// -i[H, .] + sum_c sum_{j<k} Gamma_c^{jk} ( n D[|k><j|] + (1 + n) D[|j><k|] )
// with H = diag(omega_j) in the dressed basis.
Liouvillian build_liouvillian(const DressedBasis& basis, std::span<const ChannelRates> channels);

struct JumpOperator {
    Matrix op;
    double rate = 0.0;
};

// Generic -i[H, .] + sum rate * D[op].
Liouvillian lindblad(const Matrix& hamiltonian, std::span<const JumpOperator> jumps);

// Jaynes-Cummings Hamiltonian with local thermal dissipators on the bare a
// and sigma^-, at constant rates gamma(1 + n) and gamma n.
Liouvillian standard_me_baseline(const RabiParams& params, const BathSpec& bath);

// Population/coherence split of a Liouvillian whose coherences evolve
// independently (each vec index (m, n), m != n, maps only to itself) and
// whose populations only feed populations.
struct SecularForm {
    Eigen::MatrixXd population_rates;  // d x d rate matrix, columns sum to zero
    Matrix coherence_rates;            // entry (m, n): diagonal element of L at index (m, n)
};

std::optional<SecularForm> secular_form(const Liouvillian& liouvillian);

Matrix steady_state(const Liouvillian& liouvillian);

// exp(L t) applied to operators, reusing step propagators across equal
// time steps. Secular Liouvillians are propagated in closed form per
// coherence plus a d x d population exponential; others through the dense
// d^2 x d^2 exponential. Not safe for concurrent use (step cache).
class Propagator {
public:
    explicit Propagator(const Liouvillian& liouvillian);

    bool secular() const noexcept { return secular_.has_value(); }

    // Calls visit(i, Y(times[i])) with Y(0) = y0; times ascending and >= 0.
    void evolve(const Matrix& y0, std::span<const double> times,
                const std::function<void(std::size_t, const Matrix&)>& visit) const;

private:
    struct Step {
        double dt = 0.0;
        Matrix coherence_factor;
        Matrix population;
        Matrix dense;
    };
    const Step& step(double dt) const;
    void advance(Matrix& y, const Step& s) const;

    const Liouvillian* liouvillian_;
    std::optional<SecularForm> secular_;
    mutable std::deque<Step> cache_;
};

std::vector<Matrix> evolve(const Liouvillian& liouvillian, const Matrix& rho0, std::span<const double> times);

}  // namespace rabistat
