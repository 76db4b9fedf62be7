#include "rabistat/open_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "rabistat/error.hpp"

namespace rabistat {

void BathSpec::validate() const {
    if (!(gamma_a >= 0.0) || !(gamma_x >= 0.0)) {
        throw Error(ErrorCode::InvalidParams, "damping rates must be >= 0");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorCode::InvalidParams, "bath temperature must be > 0");
    }
}

double thermal_occupation(double delta, double temperature) {
    if (temperature <= 0.0) return 0.0;
    if (!(delta > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "thermal occupation needs a positive frequency");
    }
    return 1.0 / std::expm1(delta / temperature);
}

ChannelRates rates(const DressedBasis& basis, const TransitionTable& table, const BathSpec& bath,
                   std::size_t channel) {
    bath.validate();
    if (channel >= table.channels.size()) {
        throw Error(ErrorCode::InvalidParams, "channel index " + std::to_string(channel) + " out of range");
    }
    if (table.dim() != basis.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "transition table and basis dimensions differ");
    }
    const auto& c = table.channels[channel];
    const auto n = static_cast<Eigen::Index>(basis.dim());
    ChannelRates out{c.name, c.kind, Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
    const double gamma = bath.rate_for(c.kind);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = j + 1; k < n; ++k) {
            const double delta = basis.energies(k) - basis.energies(j);
            if (delta < kDegeneracyTol) continue;
            out.gamma(j, k) = gamma * delta * std::norm(c.elements(j, k));
            out.nbar(j, k) = thermal_occupation(delta, bath.temperature);
        }
    }
    return out;
}

std::vector<ChannelRates> all_rates(const DressedBasis& basis, const TransitionTable& table,
                                    const BathSpec& bath) {
    std::vector<ChannelRates> out;
    for (std::size_t c = 0; c < table.channels.size(); ++c) out.push_back(rates(basis, table, bath, c));
    return out;
}

Liouvillian::Liouvillian(std::size_t dim, Matrix superoperator, std::vector<ChannelRates> channels)
    : dim_(dim), matrix_(std::move(superoperator)), channels_(std::move(channels)) {
    const auto n = static_cast<Eigen::Index>(dim * dim);
    if (matrix_.rows() != n || matrix_.cols() != n) {
        throw Error(ErrorCode::DimensionMismatch, "superoperator must be d^2 x d^2");
    }
}

Matrix Liouvillian::apply(const Matrix& rho) const {
    const auto d = static_cast<Eigen::Index>(dim_);
    if (rho.rows() != d || rho.cols() != d) {
        throw Error(ErrorCode::DimensionMismatch, "operator does not match the Liouvillian");
    }
    const Vector out = matrix_ * Eigen::Map<const Vector>(rho.data(), d * d);
    return Eigen::Map<const Matrix>(out.data(), d, d);
}

Liouvillian build_liouvillian(const DressedBasis& basis, std::span<const ChannelRates> channels) {
    const std::size_t d = basis.dim();
    const auto n = static_cast<Eigen::Index>(d);
    auto idx = [d](std::size_t r, std::size_t c) { return static_cast<Eigen::Index>(r + d * c); };
    Matrix l = Matrix::Zero(n * n, n * n);

    for (std::size_t m = 0; m < d; ++m) {
        for (std::size_t k = 0; k < d; ++k) {
            l(idx(m, k), idx(m, k)) = Complex(0.0, -(basis.energy(m) - basis.energy(k)));
        }
    }

    // out[b]: total rate of jumps leaving state b.
    std::vector<double> out(d, 0.0);
    auto add_jump = [&](std::size_t to, std::size_t from, double rate) {
        if (!(rate >= 0.0) || !std::isfinite(rate)) {
            throw Error(ErrorCode::InvalidParams, "negative or non-finite Lindblad rate");
        }
        if (rate == 0.0) return;
        l(idx(to, to), idx(from, from)) += rate;
        out[from] += rate;
    };
    for (const auto& c : channels) {
        if (c.gamma.rows() != n || c.nbar.rows() != n) {
            throw Error(ErrorCode::DimensionMismatch, "channel '" + c.name + "' rates do not match the basis");
        }
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = j + 1; k < d; ++k) {
                const double gamma = c.gamma(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
                const double nbar = c.nbar(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
                if (gamma < 0.0) throw Error(ErrorCode::InvalidParams, "negative relaxation coefficient");
                if (gamma == 0.0) continue;
                add_jump(k, j, gamma * nbar);
                add_jump(j, k, gamma * (1.0 + nbar));
            }
        }
    }
    for (std::size_t m = 0; m < d; ++m) {
        for (std::size_t k = 0; k < d; ++k) l(idx(m, k), idx(m, k)) -= 0.5 * (out[m] + out[k]);
    }
    return {d, std::move(l), std::vector<ChannelRates>(channels.begin(), channels.end())};
}

Liouvillian lindblad(const Matrix& h, std::span<const JumpOperator> jumps) {
    const auto d = h.rows();
    if (h.cols() != d) throw Error(ErrorCode::DimensionMismatch, "Hamiltonian must be square");
    const Matrix id = Matrix::Identity(d, d);
    Matrix l = Complex(0.0, -1.0) * (Eigen::kroneckerProduct(id, h).eval() -
                                     Eigen::kroneckerProduct(h.transpose(), id).eval());
    for (const auto& j : jumps) {
        if (j.op.rows() != d || j.op.cols() != d) {
            throw Error(ErrorCode::DimensionMismatch, "jump operator does not match the Hamiltonian");
        }
        if (!(j.rate >= 0.0)) throw Error(ErrorCode::InvalidParams, "negative Lindblad rate");
        if (j.rate == 0.0) continue;
        const Matrix nop = j.op.adjoint() * j.op;
        l += j.rate * (Eigen::kroneckerProduct(j.op.conjugate(), j.op).eval() -
                       0.5 * Eigen::kroneckerProduct(id, nop).eval() -
                       0.5 * Eigen::kroneckerProduct(nop.transpose(), id).eval());
    }
    return {static_cast<std::size_t>(d), std::move(l)};
}

Liouvillian standard_me_baseline(const RabiParams& params, const BathSpec& bath) {
    bath.validate();
    const auto h = build_rwa(params);
    const auto space = rabi_space(params.n_fock);
    const Matrix a = embed(fock_annihilation(params.n_fock), space, 1).matrix();
    const Matrix sm = embed(tls_lowering(), space, 0).matrix();
    const double na = thermal_occupation(params.omega0, bath.temperature);
    const double nx = thermal_occupation(params.omega_x, bath.temperature);
    const std::vector<JumpOperator> jumps{
        {a, bath.gamma_a * (1.0 + na)},
        {a.adjoint(), bath.gamma_a * na},
        {sm, bath.gamma_x * (1.0 + nx)},
        {sm.adjoint(), bath.gamma_x * nx},
    };
    return lindblad(h.matrix(), jumps);
}

std::optional<SecularForm> secular_form(const Liouvillian& liouvillian) {
    const std::size_t d = liouvillian.dim();
    const Matrix& l = liouvillian.matrix();
    const auto n = static_cast<Eigen::Index>(d);
    auto idx = [&](std::size_t r, std::size_t c) { return static_cast<Eigen::Index>(liouvillian.index(r, c)); };

    SecularForm form{Eigen::MatrixXd::Zero(n, n), Matrix::Zero(n, n)};
    for (std::size_t m = 0; m < d; ++m) {
        for (std::size_t k = 0; k < d; ++k) {
            const Eigen::Index col = idx(m, k);
            for (Eigen::Index row = 0; row < l.rows(); ++row) {
                const Complex v = l(row, col);
                if (v == Complex(0.0)) continue;
                const auto r = static_cast<std::size_t>(row) % d;
                const auto c = static_cast<std::size_t>(row) / d;
                if (m != k) {
                    if (row != col) return std::nullopt;
                } else if (r != c || v.imag() != 0.0) {
                    return std::nullopt;
                }
                if (m == k) {
                    form.population_rates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m)) = v.real();
                }
            }
            form.coherence_rates(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = l(col, col);
        }
    }
    return form;
}

namespace {

Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

void check_steady_state(const Liouvillian& liouvillian, const Matrix& rho) {
    const double residual = max_norm(liouvillian.apply(rho));
    if (residual > 1e-10) {
        throw Error(ErrorCode::EigensolverFailure,
                    "steady-state residual " + std::to_string(residual) + " exceeds 1e-10");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(rho, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -1e-10) {
        throw Error(ErrorCode::EigensolverFailure, "steady state is not positive semidefinite");
    }
}

Matrix secular_steady_state(const SecularForm& form) {
    const Eigen::MatrixXd& r = form.population_rates;
    const auto n = r.rows();

    // Uniqueness is judged against the slowest nonzero decay out of any state.
    double rate_scale = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (r(i, i) != 0.0) rate_scale = std::min(rate_scale, std::abs(r(i, i)));
    }
    if (!std::isfinite(rate_scale)) {
        throw Error(ErrorCode::AmbiguousSteadyState,
                    "no dissipation: null space has dimension " + std::to_string(n * n));
    }
    const double tol = 1e-8 * rate_scale;

    Eigen::EigenSolver<Eigen::MatrixXd> eig(r, false);
    std::vector<double> mags;
    for (Eigen::Index i = 0; i < n; ++i) mags.push_back(std::abs(eig.eigenvalues()(i)));
    std::sort(mags.begin(), mags.end());
    std::size_t null_dim = static_cast<std::size_t>(std::count_if(mags.begin(), mags.end(), [&](double v) { return v <= tol; }));
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index k = 0; k < n; ++k) {
            if (m != k && std::abs(form.coherence_rates(m, k)) <= tol) ++null_dim;
        }
    }
    if (null_dim != 1 || (mags.size() > 1 && mags[1] <= tol)) {
        throw Error(ErrorCode::AmbiguousSteadyState,
                    "Liouvillian null space has dimension " + std::to_string(std::max<std::size_t>(null_dim, 2)));
    }

    // Replace one balance equation by normalization and solve directly; this
    // keeps exponentially small populations accurate.
    Eigen::MatrixXd system = r;
    system.row(0).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(0) = 1.0;
    const Eigen::VectorXd p = system.fullPivLu().solve(rhs);
    return p.cast<Complex>().asDiagonal().toDenseMatrix();
}

Matrix dense_steady_state(const Liouvillian& liouvillian) {
    const auto d = static_cast<Eigen::Index>(liouvillian.dim());
    Matrix system = liouvillian.matrix();
    system.row(0).setZero();
    for (Eigen::Index i = 0; i < d; ++i) system(0, i + d * i) = 1.0;
    Vector rhs = Vector::Zero(d * d);
    rhs(0) = 1.0;
    Eigen::PartialPivLU<Matrix> lu(system);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-12)) {
        throw Error(ErrorCode::AmbiguousSteadyState,
                    "Liouvillian null space is degenerate (reciprocal condition " + std::to_string(rcond) + ")");
    }
    const Vector v = lu.solve(rhs);
    return Eigen::Map<const Matrix>(v.data(), d, d);
}

}  // namespace

Matrix steady_state(const Liouvillian& liouvillian) {
    const auto form = secular_form(liouvillian);
    Matrix rho = form ? secular_steady_state(*form) : dense_steady_state(liouvillian);
    rho = hermitian_part(rho);
    rho /= rho.trace().real();
    check_steady_state(liouvillian, rho);
    return rho;
}

Propagator::Propagator(const Liouvillian& liouvillian)
    : liouvillian_(&liouvillian), secular_(secular_form(liouvillian)) {}

const Propagator::Step& Propagator::step(double dt) const {
    // Grid steps differ by rounding noise only; treat those as equal.
    for (auto it = cache_.rbegin(); it != cache_.rend(); ++it) {
        if (std::abs(it->dt - dt) <= 1e-8 * dt) return *it;
    }
    if (cache_.size() >= 16) cache_.pop_front();
    Step s;
    s.dt = dt;
    bool finite = true;
    if (secular_) {
        s.coherence_factor = (secular_->coherence_rates * dt).array().exp().matrix();
        s.population = Eigen::MatrixXd((secular_->population_rates * dt).exp()).cast<Complex>();
        finite = s.coherence_factor.allFinite() && s.population.allFinite();
    } else {
        s.dense = (liouvillian_->matrix() * dt).exp();
        finite = s.dense.allFinite();
    }
    if (!finite) {
        throw Error(ErrorCode::Stiffness, "propagator over step " + std::to_string(dt) +
                                              " is not finite (|L|_max = " +
                                              std::to_string(max_norm(liouvillian_->matrix())) + ")");
    }
    cache_.push_back(std::move(s));
    return cache_.back();
}

void Propagator::advance(Matrix& y, const Step& s) const {
    if (secular_) {
        const Vector pops = s.population * y.diagonal();
        y.array() *= s.coherence_factor.array();
        y.diagonal() = pops;
    } else {
        const auto d = y.rows();
        const Vector v = s.dense * Eigen::Map<const Vector>(y.data(), d * d);
        y = Eigen::Map<const Matrix>(v.data(), d, d);
    }
}

void Propagator::evolve(const Matrix& y0, std::span<const double> times,
                        const std::function<void(std::size_t, const Matrix&)>& visit) const {
    const auto d = static_cast<Eigen::Index>(liouvillian_->dim());
    if (y0.rows() != d || y0.cols() != d) {
        throw Error(ErrorCode::DimensionMismatch, "initial operator does not match the Liouvillian");
    }
    Matrix y = y0;
    double t = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= t)) throw Error(ErrorCode::InvalidParams, "time grid must be ascending and >= 0");
        const double dt = times[i] - t;
        if (dt > 0.0) advance(y, step(dt));
        t = times[i];
        visit(i, y);
    }
}

std::vector<Matrix> evolve(const Liouvillian& liouvillian, const Matrix& rho0, std::span<const double> times) {
    const QOperator check(HilbertSpace::flat(liouvillian.dim()), rho0);
    check.require_hermitian("initial density matrix", 1e-9);
    if (std::abs(rho0.trace() - Complex(1.0)) > 1e-9) {
        throw Error(ErrorCode::InvalidParams, "initial density matrix must have unit trace");
    }
    std::vector<Matrix> out(times.size());
    Propagator(liouvillian).evolve(rho0, times, [&](std::size_t i, const Matrix& m) { out[i] = m; });
    return out;
}

}  // namespace rabistat
