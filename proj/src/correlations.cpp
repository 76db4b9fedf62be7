#include "rabistat/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "rabistat/error.hpp"
#include "rabistat/format.hpp"
#include "rabistat/thermal.hpp"

namespace rabistat {

const char* to_string(SpectrumNormalization mode) noexcept {
    switch (mode) {
        case SpectrumNormalization::Raw: return "raw";
        case SpectrumNormalization::PerFlux: return "per-flux";
        case SpectrumNormalization::PaperFigure: return "paper-figure";
    }
    return "raw";
}

SpectrumNormalization parse_normalization(const std::string& text) {
    if (text == "raw") return SpectrumNormalization::Raw;
    if (text == "per-flux") return SpectrumNormalization::PerFlux;
    if (text == "paper-figure") return SpectrumNormalization::PaperFigure;
    throw Error(ErrorCode::Config, "unknown normalization '" + text + "' (expected raw, per-flux or paper-figure)");
}

namespace {

// Tr[M Y] without forming the product.
Complex trace_product(const Matrix& m_transposed, const Matrix& y) { return m_transposed.cwiseProduct(y).sum(); }

void require_stationary(const Liouvillian& l, const Matrix& rho) {
    const double residual = max_norm(l.apply(rho));
    if (residual > 1e-8) {
        throw Error(ErrorCode::NonStationary,
                    "state is not stationary under the Liouvillian (residual " + std::to_string(residual) + ")");
    }
}

void require_tau(std::span<const double> tau) {
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (!(tau[i] >= 0.0) || (i > 0 && !(tau[i] >= tau[i - 1]))) {
            throw Error(ErrorCode::InvalidParams, "delay grid must be ascending and >= 0");
        }
    }
}

std::vector<Complex> regress(const Liouvillian& l, const Matrix& y0, const Matrix& observable,
                             std::span<const double> tau) {
    const Matrix mt = observable.transpose();
    std::vector<Complex> out(tau.size());
    Propagator(l).evolve(y0, tau, [&](std::size_t i, const Matrix& y) { out[i] = trace_product(mt, y); });
    return out;
}

void require_consistent(const DressedBasis& basis, const TransitionTable& table, const Liouvillian& l) {
    if (basis.dim() != l.dim() || table.dim() != l.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "basis, transition table and Liouvillian dimensions differ");
    }
}

}  // namespace

std::vector<Complex> two_time(const Liouvillian& liouvillian, const Matrix& rho_ss, const Matrix& a,
                              const Matrix& b, std::span<const double> tau) {
    require_stationary(liouvillian, rho_ss);
    require_tau(tau);
    return regress(liouvillian, rho_ss * a, b, tau);
}

std::vector<Complex> two_time_quartic(const Liouvillian& liouvillian, const Matrix& rho_ss,
                                      const Matrix& a, const Matrix& m, const Matrix& d,
                                      std::span<const double> tau) {
    require_stationary(liouvillian, rho_ss);
    require_tau(tau);
    return regress(liouvillian, d * rho_ss * a, m, tau);
}

std::vector<double> TauWindow::grid() const {
    if (!(t_max > 0.0) || !(step > 0.0)) throw Error(ErrorCode::InvalidParams, "delay window must be positive");
    const auto n = static_cast<std::size_t>(std::ceil(t_max / step - 1e-9));
    std::vector<double> out(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out[i] = t_max * static_cast<double>(i) / static_cast<double>(n);
    return out;
}

TauWindow default_tau_window(const DressedBasis& basis, const TransitionTable& table,
                             const Liouvillian& liouvillian, double temperature) {
    require_consistent(basis, table, liouvillian);
    const auto state = thermal_state(basis, temperature);
    const Matrix xp = xdot_plus(basis, table, basis.dim()).matrix();
    const double flux = (xp.cwiseAbs2() * state.populations).sum();
    if (!(flux > kFluxFloor)) throw Error(ErrorCode::UndefinedStatistics, "photon flux below floor");

    double slowest = std::numeric_limits<double>::infinity();
    double fastest = 0.0;
    double fastest_gap = 0.0;
    const auto n = static_cast<Eigen::Index>(basis.dim());
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = j + 1; k < n; ++k) {
            if (state.populations(k) * std::norm(xp(j, k)) < 1e-6 * flux) continue;
            const auto col = static_cast<Eigen::Index>(liouvillian.index(static_cast<std::size_t>(k), static_cast<std::size_t>(j)));
            const double kappa = -liouvillian.matrix()(col, col).real();
            slowest = std::min(slowest, kappa);
            fastest = std::max(fastest, kappa);
            fastest_gap = std::max(fastest_gap, basis.energies(k) - basis.energies(j));
        }
    }
    double relaxation = std::numeric_limits<double>::infinity();
    if (const auto form = secular_form(liouvillian)) {
        Eigen::EigenSolver<Eigen::MatrixXd> eig(form->population_rates, false);
        std::vector<double> mags;
        for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) mags.push_back(std::abs(eig.eigenvalues()(i)));
        std::sort(mags.begin(), mags.end());
        if (mags.size() > 1) relaxation = mags[1];
    }
    if (!(slowest > 0.0) || !std::isfinite(slowest)) {
        throw Error(ErrorCode::WindowTooShort, "populated transitions do not decay; no finite delay window");
    }
    const double decay = std::min(slowest, relaxation);
    return {10.0 / decay, std::min(0.05 / fastest_gap, 0.05 / fastest)};
}

CorrelationTrace g2_tau(const DressedBasis& basis, const TransitionTable& table,
                        const Liouvillian& liouvillian, double temperature, std::span<const double> tau) {
    require_consistent(basis, table, liouvillian);
    const auto state = thermal_state(basis, temperature);
    const Matrix rho = state.density();
    const Matrix xp = xdot_plus(basis, table, basis.dim()).matrix();
    const Matrix xm = xp.adjoint();
    const double flux = (xp.cwiseAbs2() * state.populations).sum();
    if (!(flux > kFluxFloor)) throw Error(ErrorCode::UndefinedStatistics, "photon flux below floor; g2 undefined");

    const auto raw = two_time_quartic(liouvillian, rho, xm, xm * xp, xp, tau);
    CorrelationTrace trace{{tau.begin(), tau.end()}, {}, {}};
    trace.values.reserve(raw.size());
    for (const auto& v : raw) trace.values.push_back(v.real() / (flux * flux));
    trace.meta.temperature = temperature;
    trace.meta.level_cut = basis.dim();
    return trace;
}

CorrelationTrace g2_cross_filtered(const DressedBasis& basis, const TransitionTable& table,
                                   const Liouvillian& liouvillian, double temperature,
                                   std::span<const double> tau) {
    require_consistent(basis, table, liouvillian);
    if (basis.dim() < 3) throw Error(ErrorCode::InvalidParams, "need at least three dressed states");
    for (std::size_t i = 1; i < tau.size(); ++i) {
        if (!(tau[i] >= tau[i - 1])) throw Error(ErrorCode::InvalidParams, "delay grid must be ascending");
    }
    const Matrix upper = xdot_plus_filtered(basis, table, 1, 2).matrix();  // |1><2|
    const Matrix lower = xdot_plus_filtered(basis, table, 0, 1).matrix();  // |0><1|
    if (std::abs(upper(1, 2)) == 0.0 || std::abs(lower(0, 1)) == 0.0) {
        throw Error(ErrorCode::ZeroTransition,
                    "the 2->1 or 1->0 line is forbidden at this coupling (below the level crossing)");
    }
    const auto state = thermal_state(basis, temperature);
    const Matrix rho = state.density();
    require_stationary(liouvillian, rho);
    const double flux_upper = state.populations(2) * std::norm(upper(1, 2));
    const double flux_lower = state.populations(1) * std::norm(lower(0, 1));
    const double norm = flux_upper * flux_lower;
    if (!(flux_upper > kFluxFloor) || !(flux_lower > kFluxFloor)) {
        throw Error(ErrorCode::UndefinedStatistics, "line flux below floor; cross-correlation undefined");
    }

    std::vector<double> forward, backward;
    for (double t : tau) (t >= 0.0 ? forward : backward).push_back(std::abs(t));
    std::reverse(backward.begin(), backward.end());

    const auto after = regress(liouvillian, upper * rho * upper.adjoint(), lower.adjoint() * lower, forward);
    const auto before = regress(liouvillian, lower * rho * lower.adjoint(), upper.adjoint() * upper, backward);

    CorrelationTrace trace{{tau.begin(), tau.end()}, {}, {}};
    trace.values.resize(tau.size());
    const std::size_t n_neg = backward.size();
    for (std::size_t i = 0; i < n_neg; ++i) trace.values[i] = before[n_neg - 1 - i].real() / norm;
    for (std::size_t i = 0; i < after.size(); ++i) trace.values[n_neg + i] = after[i].real() / norm;
    trace.meta.temperature = temperature;
    trace.meta.level_cut = basis.dim();
    return trace;
}

Spectrum emission_spectrum(const DressedBasis& basis, const TransitionTable& table,
                           const Liouvillian& liouvillian, double temperature,
                           std::span<const double> omega, TauWindow window) {
    require_consistent(basis, table, liouvillian);
    if (window.step == 0.0) window = default_tau_window(basis, table, liouvillian, temperature);
    const auto state = thermal_state(basis, temperature);
    const Matrix rho = state.density();
    const Matrix xp = xdot_plus(basis, table, basis.dim()).matrix();
    const double flux = (xp.cwiseAbs2() * state.populations).sum();
    if (!(flux > kFluxFloor)) throw Error(ErrorCode::UndefinedStatistics, "photon flux below floor; spectrum undefined");

    const auto tau = window.grid();
    const auto corr = two_time(liouvillian, rho, xp.adjoint(), xp, tau);
    if (std::abs(corr.back()) > 1e-3 * std::abs(corr.front())) {
        throw Error(ErrorCode::WindowTooShort, "first-order correlation has not decayed by tau = " +
                                                   std::to_string(window.t_max));
    }

    const double h = tau.size() > 1 ? tau[1] - tau[0] : 0.0;
    Spectrum s;
    s.omega.assign(omega.begin(), omega.end());
    s.values.resize(omega.size());
    s.flux = flux;
    constexpr std::size_t kResync = 512;
    for (std::size_t w = 0; w < omega.size(); ++w) {
        const Complex z = std::polar(1.0, omega[w] * h);
        Complex phase = 1.0;
        Complex acc = 0.5 * corr.front();
        for (std::size_t i = 1; i < corr.size(); ++i) {
            phase = (i % kResync == 0) ? std::polar(1.0, omega[w] * tau[i]) : phase * z;
            acc += (i + 1 == corr.size() ? 0.5 : 1.0) * corr[i] * phase;
        }
        s.values[w] = 2.0 * h * acc.real();
    }
    s.meta.temperature = temperature;
    s.meta.level_cut = basis.dim();
    return s;
}

void normalize_spectra(std::span<Spectrum> spectra, SpectrumNormalization mode) {
    if (spectra.empty()) return;
    switch (mode) {
        case SpectrumNormalization::Raw:
            break;
        case SpectrumNormalization::PerFlux:
            for (auto& s : spectra) {
                for (auto& v : s.values) v /= s.flux;
            }
            break;
        case SpectrumNormalization::PaperFigure: {
            const auto coldest = std::min_element(spectra.begin(), spectra.end(), [](const Spectrum& a, const Spectrum& b) {
                return a.meta.temperature < b.meta.temperature;
            });
            const double peak = *std::max_element(coldest->values.begin(), coldest->values.end());
            if (!(peak > 0.0)) throw Error(ErrorCode::UndefinedStatistics, "reference spectrum has no positive maximum");
            for (auto& s : spectra) {
                for (auto& v : s.values) v /= peak;
            }
            break;
        }
    }
    for (auto& s : spectra) s.normalization = mode;
}

namespace {

void write_metadata(std::ostream& out, const CorrelationMetadata& m) {
    out << "#g=" << format_number(m.g) << '\n'
        << "#T=" << format_number(m.temperature) << '\n'
        << "#gamma_a=" << format_number(m.gamma_a) << '\n'
        << "#gamma_x=" << format_number(m.gamma_x) << '\n'
        << "#n_fock=" << m.n_fock << '\n'
        << "#level_cut=" << m.level_cut << '\n';
}

}  // namespace

void write_trace_csv(std::ostream& out, const CorrelationTrace& trace, const std::string& column) {
    write_metadata(out, trace.meta);
    out << "tau," << column << '\n';
    for (std::size_t i = 0; i < trace.tau.size(); ++i) {
        out << format_number(trace.tau[i]) << ',' << format_number(trace.values[i]) << '\n';
    }
}

void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum) {
    write_metadata(out, spectrum.meta);
    out << "#normalization=" << to_string(spectrum.normalization) << '\n';
    out << "omega,S\n";
    for (std::size_t i = 0; i < spectrum.omega.size(); ++i) {
        out << format_number(spectrum.omega[i]) << ',' << format_number(spectrum.values[i]) << '\n';
    }
}

}  // namespace rabistat
