// End-to-end checks of the physics results. One line per check; the exit
// status is nonzero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rabistat/correlations.hpp"
#include "rabistat/dressed.hpp"
#include "rabistat/error.hpp"
#include "rabistat/format.hpp"
#include "rabistat/open_dynamics.hpp"
#include "rabistat/sweep.hpp"
#include "rabistat/thermal.hpp"

using namespace rabistat;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), s);
    std::fflush(stdout);
}

std::string num(double v) { return format_number(v); }

struct Point {
    DressedBasis full;
    TransitionTable full_table;
    DressedBasis basis;
    TransitionTable table;
    Liouvillian liouvillian;
};

Point point(double g, double t, double ga = 0.01, double gx = 0.01, std::size_t n = 20) {
    auto sys = rabi_system({1.0, 1.0, g, n});
    auto full = diagonalize(sys.hamiltonian, sys.parity);
    auto table = transition_table(full, sys.field, sys.channels);
    const auto cut = default_level_cut(full, t);
    auto basis = full.truncated(cut);
    auto cut_table = table.truncated(cut);
    auto l = build_liouvillian(basis, all_rates(basis, cut_table, {ga, gx, t}));
    return {std::move(full), std::move(table), std::move(basis), std::move(cut_table), std::move(l)};
}

const Marker& marker(const char* name) {
    for (const auto& m : marker_points())
        if (std::string(m.name) == name) return m;
    throw Error(ErrorCode::InvalidParams, name);
}

double g2_at(double g, double t, std::size_t n) {
    const auto p = point(g, t, 0.01, 0.01, n);
    return g2_zero(p.basis, p.table, thermal_state(p.basis, t));
}

Outcome marker_regions() {
    const auto start = std::chrono::steady_clock::now();
    SweepConfig c;
    c.markers = true;
    c.workers = 1;
    const auto r = run_g2zero_sweep(c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double d = r.records[0].values[0], tr = r.records[1].values[0];
    const double sq = r.records[2].values[0], ci = r.records[3].values[0];
    const bool ok = d > 1.999 && d < 2.0 && tr > 1.0 && tr < 1.999 && sq < 1.0 && ci > 2.0 && secs < 10.0;
    return {ok, "diamond " + num(d) + " (want (1.999,2)), triangle " + num(tr) + " (want (1,1.999)), square " +
                    num(sq) + " (want <1), circle " + num(ci) + " (want >2), " + num(secs) + " s (want <10)"};
}

Outcome rwa_baseline() {
    std::string detail;
    double worst = 0.0;
    for (const auto& m : marker_points()) {
        const RabiParams params{1.0, 1.0, m.g, 20};
        const auto rho = steady_state(standard_me_baseline(params, {0.01, 0.01, m.temperature}));
        const auto a = embed(fock_annihilation(20), rabi_space(20), 1);
        const double v = normal_order_g2(rho, a.matrix());
        worst = std::max(worst, std::abs(v - 2.0));
        detail += std::string(m.name) + " " + num(v) + " ";
    }
    return {worst <= 1e-4, detail + "(max |g2-2| " + num(worst) + ", want <= 1e-4)"};
}

Outcome level_crossing() {
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(0.01 * i);
    const SystemFactory f = [](double g) { return rabi_system({1.0, 1.0, g, 20}); };
    const auto table = level_sweep(f, grid, 4, 1);
    for (const auto& c : table.crossings) {
        if (c.lower_level == 2) {
            return {c.g_left >= 0.40 && c.g_right <= 0.50,
                    "levels 2/3 swap between g = " + num(c.g_left) + " and " + num(c.g_right) + " (want within [0.40, 0.50])"};
        }
    }
    return {false, "no crossing of levels 2 and 3 found on [0, 1]"};
}

Outcome quasidegeneracy() {
    const auto low = point(0.1, 0.1), high = point(0.9, 0.1);
    const double d_low = low.full.gap(1, 0), d_high = high.full.gap(1, 0);
    const double ratio = d_high / d_low;
    return {ratio < 0.05, "Delta10(0.9) = " + num(d_high) + ", Delta10(0.1) = " + num(d_low) + ", ratio " + num(ratio) +
                              " (want < 0.05)"};
}

Outcome thermalization() {
    double worst = 0.0, worst_shift = 0.0;
    for (const auto& m : marker_points()) {
        const auto a = point(m.g, m.temperature, 0.01, 0.01);
        const auto b = point(m.g, m.temperature, 0.03, 0.005);
        const Matrix rho_a = steady_state(a.liouvillian);
        const Matrix rho_b = steady_state(b.liouvillian);
        worst = std::max(worst, max_norm(Matrix(rho_a - thermal_state(a.basis, m.temperature).density())));
        worst_shift = std::max(worst_shift, max_norm(Matrix(rho_a - rho_b)));
    }
    return {worst <= 1e-6 && worst_shift <= 1e-6,
            "max |rho_ss - rho_T| " + num(worst) + ", max change with damping " + num(worst_shift) + " (want <= 1e-6)"};
}

Outcome oscillation() {
    const auto& m = marker("diamond");
    const auto p = point(m.g, m.temperature);
    const auto window = default_tau_window(p.basis, p.table, p.liouvillian, m.temperature);
    const auto trace = g2_tau(p.basis, p.table, p.liouvillian, m.temperature, window.grid());
    std::vector<double> peaks;
    for (std::size_t i = 1; i + 1 < trace.values.size(); ++i) {
        if (trace.values[i] > trace.values[i - 1] && trace.values[i] >= trace.values[i + 1]) peaks.push_back(trace.tau[i]);
    }
    if (peaks.size() < 3) return {false, "fewer than three maxima in g2(tau)"};
    std::vector<double> spacing;
    for (std::size_t i = 1; i < peaks.size(); ++i) spacing.push_back(peaks[i] - peaks[i - 1]);
    std::nth_element(spacing.begin(), spacing.begin() + spacing.size() / 2, spacing.end());
    const double period = spacing[spacing.size() / 2];
    const double freq = 2.0 * M_PI / period;
    const double d12 = p.basis.gap(2, 1);
    const double err = std::abs(freq - d12) / d12;
    return {err <= 0.03, "median peak spacing " + num(period) + " -> " + num(freq) + " vs Delta12 " + num(d12) +
                             " (rel. error " + num(err) + ", want <= 0.03)"};
}

Outcome cascade() {
    const auto& m = marker("circle");
    const auto p = point(m.g, m.temperature);
    const auto window = default_tau_window(p.basis, p.table, p.liouvillian, m.temperature);
    const double few = 3.0 / 0.01;
    const std::vector<double> tau{-window.step, few};
    const auto c = g2_cross_filtered(p.basis, p.table, p.liouvillian, m.temperature, tau);
    return {c.values[1] > 2.0 && c.values[0] < 1.0,
            "g2(tau = " + num(few) + ") = " + num(c.values[1]) + " (want > 2), g2(tau = " + num(-window.step) +
                ") = " + num(c.values[0]) + " (want < 1)"};
}

struct MarkerSpectrum {
    const Marker* marker;
    Spectrum spectrum;
    Point model;
};

// Full width at half maximum of the line near `center`, from a fine local grid.
double fwhm(const Point& p, double t, double center, double half_span) {
    std::vector<double> omega;
    const int n = 1200;
    for (int i = 0; i <= n; ++i) omega.push_back(center - half_span + 2.0 * half_span * i / n);
    const auto s = emission_spectrum(p.basis, p.table, p.liouvillian, t, omega);
    const auto top = std::max_element(s.values.begin(), s.values.end()) - s.values.begin();
    const double half = s.values[std::size_t(top)] / 2.0;
    auto cross = [&](int dir) {
        for (long i = top; i > 0 && i < n; i += dir) {
            const double a = s.values[std::size_t(i)], b = s.values[std::size_t(i + dir)];
            if (a >= half && b < half) return omega[std::size_t(i)] + (omega[std::size_t(i + dir)] - omega[std::size_t(i)]) * (a - half) / (a - b);
        }
        return std::nan("");
    };
    return cross(1) - cross(-1);
}

Outcome spectra() {
    SweepConfig c;
    const auto omega = c.omega.values();
    const double step = omega[1] - omega[0];
    std::vector<MarkerSpectrum> all;
    for (const auto& m : marker_points()) {
        auto p = point(m.g, m.temperature);
        auto s = emission_spectrum(p.basis, p.table, p.liouvillian, m.temperature, omega);
        all.push_back({&m, std::move(s), std::move(p)});
    }
    std::vector<Spectrum> normalized;
    for (const auto& a : all) normalized.push_back(a.spectrum);
    normalize_spectra(normalized, SpectrumNormalization::PaperFigure);

    bool positions = true;
    std::string detail = "peaks:";
    for (std::size_t k = 0; k < all.size(); ++k) {
        const auto& s = normalized[k];
        const auto& p = all[k].model;
        const double top = *std::max_element(s.values.begin(), s.values.end());
        for (std::size_t i = 1; i + 1 < s.values.size(); ++i) {
            if (!(s.values[i] > s.values[i - 1] && s.values[i] >= s.values[i + 1] && s.values[i] >= 0.01 * top)) continue;
            double nearest = 1e9;
            for (std::size_t kk = 0; kk < p.basis.dim(); ++kk)
                for (std::size_t j = 0; j < kk; ++j)
                    if (p.table.field(Eigen::Index(j), Eigen::Index(kk)) != Complex(0.0))
                        nearest = std::min(nearest, std::abs(s.omega[i] - p.basis.gap(kk, j)));
            if (nearest > step) positions = false;
            detail += " " + std::string(all[k].marker->name) + "@" + num(s.omega[i]) + "(off " + num(nearest) + ")";
        }
    }

    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return all[a].marker->temperature < all[b].marker->temperature; });
    bool heights = true;
    detail += "; heights by T:";
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& s = normalized[order[i]];
        const double h = *std::max_element(s.values.begin(), s.values.end());
        detail += " " + std::string(all[order[i]].marker->name) + " " + num(h);
        if (i > 0) {
            const auto& prev = normalized[order[i - 1]];
            if (!(h > *std::max_element(prev.values.begin(), prev.values.end()))) heights = false;
        }
    }

    const auto& circle = *std::find_if(all.begin(), all.end(), [](const MarkerSpectrum& a) {
        return std::string(a.marker->name) == "circle";
    });
    const auto& cp = circle.model;
    const double w10 = fwhm(cp, circle.marker->temperature, cp.basis.gap(1, 0), 0.004);
    const double w21 = fwhm(cp, circle.marker->temperature, cp.basis.gap(2, 1), 0.04);
    const bool narrower = w10 < w21;
    detail += "; circle FWHM Delta10 " + num(w10) + " vs Delta21 " + num(w21);
    detail += std::string("; positions ") + (positions ? "ok" : "off") + ", heights " +
              (heights ? "increasing" : "not increasing") + ", widths " + (narrower ? "ok" : "wrong order");
    return {positions && heights && narrower, detail};
}

Outcome properties() {
    std::mt19937 rng(20240611);
    std::uniform_real_distribution<double> gd(0.0, 1.0), td(0.02, 0.3);
    double worst_tau0 = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double g = gd(rng), t = td(rng);
        const auto p = point(g, t);
        const std::vector<double> zero{0.0};
        const double a = g2_tau(p.basis, p.table, p.liouvillian, t, zero).values[0];
        const double b = g2_zero(p.basis, p.table, thermal_state(p.basis, t));
        worst_tau0 = std::max(worst_tau0, std::abs(a - b));
    }

    double worst_trace = 0.0, worst_herm = 0.0, worst_balance = 0.0, worst_parity = 0.0, worst_drift = 0.0;
    for (const auto& m : marker_points()) {
        const auto p = point(m.g, m.temperature);
        const auto d = Eigen::Index(p.basis.dim());
        Matrix rho0 = Matrix::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) rho0(i, j) = Complex(1.0 / (1 + i + j), 0.1 * (i - j)) / double(d);
        rho0 = rho0 * rho0.adjoint();
        rho0 /= rho0.trace();
        const std::vector<double> times{1.0, 10.0, 100.0, 1000.0};
        for (const auto& rho : evolve(p.liouvillian, rho0, times)) {
            worst_trace = std::max(worst_trace, std::abs(rho.trace() - Complex(1.0)));
            worst_herm = std::max(worst_herm, max_norm(Matrix(rho - rho.adjoint())));
        }
        for (const auto& c : p.liouvillian.channels())
            for (Eigen::Index j = 0; j < d; ++j)
                for (Eigen::Index k = j + 1; k < d; ++k) {
                    if (c.gamma(j, k) == 0.0) continue;
                    const double up = c.gamma(j, k) * c.nbar(j, k), down = c.gamma(j, k) * (1 + c.nbar(j, k));
                    const double boltzmann = std::exp(-(p.basis.energies(k) - p.basis.energies(j)) / m.temperature);
                    worst_balance = std::max(worst_balance, std::abs(up / down - boltzmann) / boltzmann);
                }
        for (Eigen::Index j = 0; j < Eigen::Index(p.full.dim()); ++j)
            for (Eigen::Index k = 0; k < Eigen::Index(p.full.dim()); ++k)
                if (p.full.parities[std::size_t(j)] == p.full.parities[std::size_t(k)])
                    worst_parity = std::max(worst_parity, std::abs(p.full_table.field(j, k)));
        const double g20 = g2_at(m.g, m.temperature, 20), g40 = g2_at(m.g, m.temperature, 40);
        worst_drift = std::max(worst_drift, std::abs(g40 - g20));
    }
    const bool ok = worst_tau0 <= 1e-6 && worst_trace <= 1e-10 && worst_herm <= 1e-10 && worst_balance <= 1e-10 &&
                    worst_parity == 0.0 && worst_drift < 1e-4;
    return {ok, "g2_tau(0) vs g2(0) " + num(worst_tau0) + " over 20 draws (<= 1e-6); trace " + num(worst_trace) +
                    "; hermiticity " + num(worst_herm) + "; detailed balance " + num(worst_balance) +
                    "; same-parity field elements " + num(worst_parity) + "; n_fock 20->40 drift " + num(worst_drift) +
                    " (< 1e-4)"};
}

Outcome supplement() {
    std::string detail;
    bool ok = true;
    for (std::size_t emitters : {2u, 3u, 4u}) {
        SweepConfig c;
        c.model = ModelKind::MultiTls;
        c.emitters = emitters;
        c.n_fock = 16;
        c.g = {0.1, 0.6, 6};
        c.temperature = {0.03, 0.07, 3};
        c.workers = 1;
        const auto r = run_g2zero_sweep(c);
        double best = 1e300;
        for (const auto& rec : r.records)
            if (rec.status == "ok") best = std::min(best, rec.values[0]);
        detail += std::to_string(emitters) + " TLS min g2 " + num(best) + "; ";
        ok = ok && best < 1.0;
    }
    int better = 0;
    for (double g : {0.2, 0.3, 0.4, 0.5, 0.6}) {
        for (double t : {0.05, 0.07}) {
            SweepConfig c;
            c.model = ModelKind::TwoMode;
            c.n_fock = 14;
            c.n_fock2 = 10;
            const auto sys = build_system(c, g);
            const auto b = diagonalize(sys.hamiltonian, sys.parity);
            const auto tt = transition_table(b, sys.field, sys.channels);
            const auto cut = default_level_cut(b, t);
            const auto bb = b.truncated(cut);
            const double two = g2_zero(bb, tt.truncated(cut), thermal_state(bb, t));
            const double one = g2_at(g, t, 20);
            if (two < one) ++better;
        }
    }
    detail += "two-mode below single-mode at " + std::to_string(better) + "/10 points";
    return {ok && better == 10, detail};
}

}  // namespace

int main() {
    report("C1", "marker regions", marker_regions);
    report("C2", "standard master equation baseline", rwa_baseline);
    report("C3", "level crossing", level_crossing);
    report("C4", "quasidegeneracy", quasidegeneracy);
    report("C5", "thermalization", thermalization);
    report("C6", "oscillation frequency", oscillation);
    report("C7", "cascade cross-correlation", cascade);
    report("C8", "spectrum structure", spectra);
    report("C9", "property suite", properties);
    report("C10", "multi-emitter and two-mode", supplement);
    std::printf("%d of 10 checks failed\n", failures);
    return failures == 0 ? 0 : 1;
}
