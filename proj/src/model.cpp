#include "rabistat/model.hpp"

#include <cmath>
#include <string>

#include "rabistat/error.hpp"

namespace rabistat {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw Error(ErrorCode::InvalidParams, msg);
}

void require_frequency(double w, const char* name) {
    require(std::isfinite(w) && w > 0.0, std::string(name) + " must be > 0, got " + std::to_string(w));
}

void require_coupling(double g, const char* name) {
    require(std::isfinite(g) && g >= 0.0, std::string(name) + " must be >= 0, got " + std::to_string(g));
}

void require_truncation(std::size_t n, const char* name) {
    require(n >= 2, std::string(name) + " must be >= 2, got " + std::to_string(n));
}

void require_cap(const HilbertSpace& space, std::size_t cap) {
    if (space.total_dim() > cap) {
        throw Error(ErrorCode::InvalidParams, "Hilbert dimension " +
                                                  std::to_string(space.total_dim()) +
                                                  " exceeds cap " + std::to_string(cap));
    }
}

// Field quadrature -i (a - a^dagger).
QOperator quadrature(const QOperator& a) { return Complex(0.0, -1.0) * (a - adjoint(a)); }

QOperator sigma_x(const QOperator& sm) { return sm + adjoint(sm); }

}  // namespace

void RabiParams::validate() const {
    require_frequency(omega0, "omega0");
    require_frequency(omega_x, "omega_x");
    require_coupling(g, "g");
    require_truncation(n_fock, "n_fock");
}

void MultiTlsParams::validate() const {
    require_frequency(omega0, "omega0");
    require(!emitters.empty(), "at least one emitter is required");
    for (const auto& e : emitters) {
        require_frequency(e.omega_x, "omega_x");
        require_coupling(e.g, "g");
    }
    require_truncation(n_fock, "n_fock");
}

void TwoModeParams::validate() const {
    require_frequency(mode1.omega0, "mode1.omega0");
    require_frequency(mode2.omega0, "mode2.omega0");
    require_coupling(mode1.g, "mode1.g");
    require_coupling(mode2.g, "mode2.g");
    require_truncation(mode1.n_fock, "mode1.n_fock");
    require_truncation(mode2.n_fock, "mode2.n_fock");
    require_frequency(omega_x, "omega_x");
}

HilbertSpace rabi_space(std::size_t n_fock) { return HilbertSpace({2, n_fock}); }

QOperator build_rabi(const RabiParams& p) {
    p.validate();
    const auto space = rabi_space(p.n_fock);
    const auto a = embed(fock_annihilation(p.n_fock), space, 1);
    const auto sm = embed(tls_lowering(), space, 0);
    const auto ad = adjoint(a);
    const auto sp = adjoint(sm);
    auto h = p.omega0 * (ad * a) + p.omega_x * (sp * sm) + p.g * ((a + ad) * (sm + sp));
    h.require_hermitian("Rabi Hamiltonian");
    return h;
}

QOperator build_rwa(const RabiParams& p) {
    p.validate();
    const auto space = rabi_space(p.n_fock);
    const auto a = embed(fock_annihilation(p.n_fock), space, 1);
    const auto sm = embed(tls_lowering(), space, 0);
    const auto ad = adjoint(a);
    const auto sp = adjoint(sm);
    auto h = p.omega0 * (ad * a) + p.omega_x * (sp * sm) + p.g * (a * sp + ad * sm);
    h.require_hermitian("Jaynes-Cummings Hamiltonian");
    return h;
}

namespace {

HilbertSpace multi_tls_space(const MultiTlsParams& p) {
    std::vector<std::size_t> factors(p.emitters.size(), 2);
    factors.push_back(p.n_fock);
    return HilbertSpace(std::move(factors));
}

HilbertSpace two_mode_space(const TwoModeParams& p) {
    return HilbertSpace({2, p.mode1.n_fock, p.mode2.n_fock});
}

void require_small_enough(const MultiTlsParams& p, std::size_t cap) {
    // Guard before building: 2^J overflows long before the Kronecker products do.
    std::size_t dim = p.n_fock;
    for (std::size_t j = 0; j < p.emitters.size(); ++j) {
        dim *= 2;
        if (dim > cap) {
            throw Error(ErrorCode::InvalidParams,
                        "Hilbert dimension for " + std::to_string(p.emitters.size()) +
                            " emitters exceeds cap " + std::to_string(cap));
        }
    }
}

}  // namespace

QOperator build_multi_tls(const MultiTlsParams& p, std::size_t dim_cap) {
    return multi_tls_system(p, dim_cap).hamiltonian;
}

QOperator build_two_mode(const TwoModeParams& p, std::size_t dim_cap) {
    return two_mode_system(p, dim_cap).hamiltonian;
}

QOperator excitation_number(const HilbertSpace& space, ModelKind kind) {
    const auto& f = space.factors();
    bool ok = false;
    switch (kind) {
        case ModelKind::Rabi:
            ok = f.size() == 2 && f[0] == 2;
            break;
        case ModelKind::MultiTls:
            ok = f.size() >= 2;
            for (std::size_t i = 0; ok && i + 1 < f.size(); ++i) ok = f[i] == 2;
            break;
        case ModelKind::TwoMode:
            ok = f.size() == 3 && f[0] == 2;
            break;
    }
    if (!ok) throw Error(ErrorCode::DimensionMismatch, "space layout does not match model kind");

    // TLS excitation and photon number are both the factor index.
    const auto n = static_cast<Eigen::Index>(space.total_dim());
    RealVector counts = RealVector::Zero(n);
    for (Eigen::Index idx = 0; idx < n; ++idx) {
        auto rest = static_cast<std::size_t>(idx);
        double total = 0.0;
        for (auto it = f.rbegin(); it != f.rend(); ++it) {
            total += static_cast<double>(rest % *it);
            rest /= *it;
        }
        counts(idx) = total;
    }
    return {space, counts.cast<Complex>().asDiagonal().toDenseMatrix()};
}

QOperator parity_operator(const HilbertSpace& space, ModelKind kind) {
    const auto number = excitation_number(space, kind);
    Matrix p = Matrix::Zero(number.matrix().rows(), number.matrix().cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const auto n = static_cast<long>(std::lround(number.matrix()(i, i).real()));
        p(i, i) = (n % 2 == 0) ? 1.0 : -1.0;
    }
    return {space, std::move(p)};
}

CavitySystem rabi_system(const RabiParams& p) {
    auto h = build_rabi(p);
    const auto& space = h.space();
    auto a = embed(fock_annihilation(p.n_fock), space, 1);
    auto sm = embed(tls_lowering(), space, 0);
    auto field = quadrature(a);
    auto parity = parity_operator(space, ModelKind::Rabi);
    std::vector<Channel> channels;
    channels.push_back({"cavity", ChannelKind::Cavity, std::move(a)});
    channels.push_back({"tls", ChannelKind::Emitter, std::move(sm)});
    return {ModelKind::Rabi, std::move(h), std::move(parity), std::move(field), std::move(channels)};
}

CavitySystem multi_tls_system(const MultiTlsParams& p, std::size_t dim_cap) {
    p.validate();
    require_small_enough(p, dim_cap);
    const auto space = multi_tls_space(p);
    require_cap(space, dim_cap);
    const std::size_t mode_slot = p.emitters.size();

    const auto a = embed(fock_annihilation(p.n_fock), space, mode_slot);
    const auto ad = adjoint(a);
    auto h = p.omega0 * (ad * a);
    auto coupling = QOperator::zero(space);
    std::vector<Channel> channels;
    channels.push_back({"cavity", ChannelKind::Cavity, a});
    for (std::size_t j = 0; j < p.emitters.size(); ++j) {
        auto sm = embed(tls_lowering(), space, j);
        h = h + p.emitters[j].omega_x * (adjoint(sm) * sm);
        coupling = coupling + p.emitters[j].g * sigma_x(sm);
        channels.push_back({"tls" + std::to_string(j + 1), ChannelKind::Emitter, std::move(sm)});
    }
    h = h + (a + ad) * coupling;
    h.require_hermitian("multi-TLS Hamiltonian");
    auto parity = parity_operator(space, ModelKind::MultiTls);
    return {ModelKind::MultiTls, std::move(h), std::move(parity), quadrature(a), std::move(channels)};
}

CavitySystem two_mode_system(const TwoModeParams& p, std::size_t dim_cap) {
    p.validate();
    const auto space = two_mode_space(p);
    require_cap(space, dim_cap);

    const auto a1 = embed(fock_annihilation(p.mode1.n_fock), space, 1);
    const auto a2 = embed(fock_annihilation(p.mode2.n_fock), space, 2);
    const auto sm = embed(tls_lowering(), space, 0);
    auto h = p.mode1.omega0 * (adjoint(a1) * a1) + p.mode2.omega0 * (adjoint(a2) * a2) +
             p.omega_x * (adjoint(sm) * sm) +
             (p.mode1.g * (a1 + adjoint(a1)) + p.mode2.g * (a2 + adjoint(a2))) * sigma_x(sm);
    h.require_hermitian("two-mode Hamiltonian");
    auto parity = parity_operator(space, ModelKind::TwoMode);
    std::vector<Channel> channels;
    channels.push_back({"cavity1", ChannelKind::Cavity, a1});
    channels.push_back({"cavity2", ChannelKind::Cavity, a2});
    channels.push_back({"tls", ChannelKind::Emitter, sm});
    return {ModelKind::TwoMode, std::move(h), std::move(parity), quadrature(a1), std::move(channels)};
}

}  // namespace rabistat
