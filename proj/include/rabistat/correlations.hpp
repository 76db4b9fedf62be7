#pragma once

// Two-time correlations of the emitted field via the quantum regression
// theorem: g2(tau), frequency-filtered cross-correlations and the emission
// spectrum.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rabistat/dressed.hpp"
#include "rabistat/open_dynamics.hpp"

namespace rabistat {

struct CorrelationMetadata {
    double g = 0.0;
    double temperature = 0.0;
    double gamma_a = 0.0;
    double gamma_x = 0.0;
    std::size_t level_cut = 0;
    std::size_t n_fock = 0;
};

struct CorrelationTrace {
    std::vector<double> tau;
    std::vector<double> values;
    CorrelationMetadata meta;
};

enum class SpectrumNormalization { Raw, PerFlux, PaperFigure };

const char* to_string(SpectrumNormalization mode) noexcept;
SpectrumNormalization parse_normalization(const std::string& text);

struct Spectrum {
    std::vector<double> omega;
    std::vector<double> values;
    SpectrumNormalization normalization = SpectrumNormalization::Raw;
    double flux = 0.0;  // <Xdot^- Xdot^+> of the emitting state
    CorrelationMetadata meta;
};

// <A(t) B(t + tau)> = Tr[B exp(L tau)(rho A)] in the stationary state.
std::vector<Complex> two_time(const Liouvillian& liouvillian, const Matrix& rho_ss, const Matrix& a,
                              const Matrix& b, std::span<const double> tau);

// <A(t) M(t + tau) D(t)> = Tr[M exp(L tau)(D rho A)].
std::vector<Complex> two_time_quartic(const Liouvillian& liouvillian, const Matrix& rho_ss,
                                      const Matrix& a, const Matrix& m, const Matrix& d,
                                      std::span<const double> tau);

struct TauWindow {
    double t_max = 0.0;
    double step = 0.0;

    std::vector<double> grid() const;
};

// Ten decay times of the slowest populated transition or population mode,
// sampled with step 0.05 / max(fastest populated gap, fastest decay rate).
TauWindow default_tau_window(const DressedBasis& basis, const TransitionTable& table,
                             const Liouvillian& liouvillian, double temperature);

// g2(tau) of the detected field with the canonical state as stationary state.
// The basis, table and Liouvillian must share one (possibly truncated) dimension.
CorrelationTrace g2_tau(const DressedBasis& basis, const TransitionTable& table,
                        const Liouvillian& liouvillian, double temperature,
                        std::span<const double> tau);

// Coincidences between the 2->1 and 1->0 lines. Positive tau: the 2->1 photon
// comes first. Negative tau: the 1->0 photon comes first, evaluated by a
// forward regression with the operator roles swapped.
CorrelationTrace g2_cross_filtered(const DressedBasis& basis, const TransitionTable& table,
                                   const Liouvillian& liouvillian, double temperature,
                                   std::span<const double> tau);

// S(omega) = 2 Re int_0^inf <Xdot^-(t) Xdot^+(t + tau)> e^{i omega tau} dtau by
// trapezoid quadrature over `window` (the default window when step == 0).
Spectrum emission_spectrum(const DressedBasis& basis, const TransitionTable& table,
                           const Liouvillian& liouvillian, double temperature,
                           std::span<const double> omega, TauWindow window = {});

// In-place normalization of a set of spectra. PaperFigure divides every
// spectrum by the maximum of the lowest-temperature one.
void normalize_spectra(std::span<Spectrum> spectra, SpectrumNormalization mode);

void write_trace_csv(std::ostream& out, const CorrelationTrace& trace, const std::string& column);
void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum);

}  // namespace rabistat
