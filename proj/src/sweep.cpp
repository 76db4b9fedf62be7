#include "rabistat/sweep.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "rabistat/dressed.hpp"
#include "rabistat/error.hpp"
#include "rabistat/format.hpp"
#include "rabistat/open_dynamics.hpp"
#include "rabistat/parallel.hpp"
#include "rabistat/thermal.hpp"

namespace rabistat {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kConvergenceTol = 1e-4;
constexpr double kLevelConvergenceTol = 1e-6;
constexpr double kTopFockTol = 1e-8;

constexpr std::array<Marker, 4> kMarkers{{
    {"diamond", 0.1, 0.2},
    {"triangle", 0.2, 0.1},
    {"square", 0.5, 0.07},
    {"circle", 0.9, 0.15},
}};

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// What a CSV cell would read back as, so JSON output matches CSV digits.
double round12(double v) { return std::isfinite(v) ? std::stod(format_number(v)) : v; }

json number(double v) { return std::isfinite(v) ? json(round12(v)) : json(nullptr); }

// Wall times are kept to the microsecond.
double wall(double ms) { return std::round(ms * 1000.0) / 1000.0; }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

[[noreturn]] void config_error(const std::string& key, const std::string& got, const std::string& expected) {
    throw Error(ErrorCode::Config, key + ": got " + got + ", expected " + expected);
}

void check_grid(const GridSpec& grid, const std::string& name, double lo, double hi) {
    const std::string range = "a value in [" + format_number(lo) + ", " + format_number(hi) + "]";
    if (!(grid.min >= lo && grid.min <= hi)) config_error(name + "-min", format_number(grid.min), range);
    if (!(grid.max >= lo && grid.max <= hi)) config_error(name + "-max", format_number(grid.max), range);
    if (grid.steps < 1) config_error(name + "-steps", "0", "at least 1");
    if (grid.steps > 1 && !(grid.max > grid.min)) {
        config_error(name + "-max", format_number(grid.max), "more than " + name + "-min for an ascending grid");
    }
}

TaskKind parse_task(const std::string& text) {
    static const std::map<std::string, TaskKind> kinds{
        {"g2zero", TaskKind::G2Zero}, {"levels", TaskKind::Levels},       {"g2tau", TaskKind::G2Tau},
        {"crosscorr", TaskKind::CrossCorr}, {"spectrum", TaskKind::Spectrum}, {"baseline", TaskKind::Baseline},
    };
    const auto it = kinds.find(text);
    if (it == kinds.end()) config_error("task", text, "one of g2zero, levels, g2tau, crosscorr, spectrum, baseline");
    return it->second;
}

void parse_model(const std::string& text, SweepConfig& config) {
    if (text == "rabi") {
        config.model = ModelKind::Rabi;
        config.emitters = 1;
        return;
    }
    if (text == "two-mode") {
        config.model = ModelKind::TwoMode;
        config.emitters = 1;
        return;
    }
    const std::string prefix = "multi-tls:";
    if (text.rfind(prefix, 0) == 0) {
        const std::string count = text.substr(prefix.size());
        std::size_t used = 0;
        int n = 0;
        try {
            n = std::stoi(count, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == count.size() && n >= 1 && n <= 8) {
            config.model = ModelKind::MultiTls;
            config.emitters = static_cast<std::size_t>(n);
            return;
        }
    }
    config_error("model", text, "rabi, two-mode or multi-tls:N with N in [1, 8]");
}

std::string file_label(const SweepPoint& p, bool marker) {
    return marker ? p.name : "g" + format_number(p.g) + "_T" + format_number(p.temperature);
}

std::string extension(const SweepConfig& c) { return c.format == OutputFormat::Json ? ".json" : ".csv"; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Config, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::Config, "write failed for " + path.string());
}

// Dressed model of one point, cut to the levels that matter at T.
struct PointModel {
    DressedBasis basis;
    TransitionTable table;
};

PointModel dressed_model(const SweepConfig& c, double g, std::size_t scale) {
    const auto system = build_system(c, g, scale);
    auto basis = diagonalize(system.hamiltonian, system.parity);
    auto table = transition_table(basis, system.field, system.channels);
    return {std::move(basis), std::move(table)};
}

PointModel cut(const PointModel& full, const SweepConfig& c, double temperature) {
    const std::size_t n = c.level_cut ? std::min(c.level_cut, full.basis.dim())
                                      : default_level_cut(full.basis, temperature);
    return {full.basis.truncated(n), full.table.truncated(n)};
}

double g2_at(const PointModel& full, const SweepConfig& c, double temperature) {
    const auto m = cut(full, c, temperature);
    return g2_zero(m.basis, m.table, thermal_state(m.basis, temperature));
}

bool agrees(double a, double b) { return std::abs(a - b) <= kConvergenceTol * std::max(1.0, std::abs(a)); }

void mark_failed(PointRecord& r, const Error& e) {
    r.status = to_string(e.code());
    r.message = e.what();
    r.values.assign(r.values.size(), std::numeric_limits<double>::quiet_NaN());
    r.converged = false;
    r.region.clear();
}

PointRecord fresh_record(const SweepPoint& p, const SweepConfig& c, std::size_t columns) {
    PointRecord r;
    r.point = p.name;
    r.g = p.g;
    r.temperature = p.temperature;
    r.values.assign(columns, std::numeric_limits<double>::quiet_NaN());
    r.n_fock = c.n_fock;
    return r;
}

std::map<std::string, const PointRecord*> reusable(std::span<const PointRecord> reuse) {
    std::map<std::string, const PointRecord*> out;
    for (const auto& r : reuse) {
        if (r.status == "ok") out[r.point] = &r;
    }
    return out;
}

CorrelationMetadata metadata(const SweepConfig& c, const SweepPoint& p, std::size_t level_cut) {
    return {p.g, p.temperature, c.gamma_a, c.gamma_x, level_cut, c.n_fock};
}

json metadata_json(const CorrelationMetadata& m) {
    return {{"g", number(m.g)},           {"T", number(m.temperature)}, {"gamma_a", number(m.gamma_a)},
            {"gamma_x", number(m.gamma_x)}, {"n_fock", m.n_fock},         {"level_cut", m.level_cut}};
}

json values_json(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

std::string trace_text(const SweepConfig& c, const CorrelationTrace& trace, const std::string& column) {
    std::ostringstream out;
    if (c.format == OutputFormat::Json) {
        out << json{{"meta", metadata_json(trace.meta)}, {"tau", values_json(trace.tau)},
                    {column, values_json(trace.values)}}
                   .dump(2)
            << '\n';
    } else {
        write_trace_csv(out, trace, column);
    }
    return out.str();
}

std::string spectrum_text(const SweepConfig& c, const Spectrum& s) {
    std::ostringstream out;
    if (c.format == OutputFormat::Json) {
        auto meta = metadata_json(s.meta);
        meta["normalization"] = to_string(s.normalization);
        out << json{{"meta", meta}, {"omega", values_json(s.omega)}, {"S", values_json(s.values)}}.dump(2) << '\n';
    } else {
        write_spectrum_csv(out, s);
    }
    return out.str();
}

void write_record_header(std::ostream& out, const SweepConfig& c) {
    out << "#task=" << to_string(c.task) << '\n'
        << "#model=" << c.model_name() << '\n'
        << "#omega_x=" << format_number(c.omega_x) << '\n'
        << "#n_fock=" << c.n_fock << '\n';
    if (c.task == TaskKind::Baseline) {
        out << "#gamma_a=" << format_number(c.gamma_a) << '\n' << "#gamma_x=" << format_number(c.gamma_x) << '\n';
    }
    out << "#config_hash=" << hex64(c.hash()) << '\n';
}

std::string records_text(const SweepConfig& c, const SweepResult& result) {
    std::ostringstream out;
    const bool region = result.task == TaskKind::G2Zero;
    if (c.format == OutputFormat::Json) {
        json rows = json::array();
        for (const auto& r : result.records) {
            json row{{"point", r.point}, {"g", number(r.g)},         {"T", number(r.temperature)},
                     {"n_fock", r.n_fock}, {"converged", r.converged}, {"status", r.status},
                     {"wall_ms", number(wall(r.wall_ms))}};
            for (std::size_t i = 0; i < result.columns.size(); ++i) row[result.columns[i]] = number(r.values[i]);
            if (region) row["region"] = r.region;
            rows.push_back(std::move(row));
        }
        json doc{{"task", to_string(c.task)}, {"model", c.model_name()},     {"omega_x", number(c.omega_x)},
                 {"n_fock", c.n_fock},        {"config_hash", hex64(c.hash())}, {"records", rows}};
        out << doc.dump(2) << '\n';
        return out.str();
    }
    write_record_header(out, c);
    out << "point,g,T";
    for (const auto& col : result.columns) out << ',' << col;
    if (region) out << ",region";
    out << ",n_fock,converged,status,wall_ms\n";
    for (const auto& r : result.records) {
        out << r.point << ',' << format_number(r.g) << ',' << format_number(r.temperature);
        for (double v : r.values) out << ',' << format_number(v);
        if (region) out << ',' << r.region;
        out << ',' << r.n_fock << ',' << (r.converged ? 1 : 0) << ',' << r.status << ','
            << format_number(wall(r.wall_ms)) << '\n';
    }
    return out.str();
}

// Bare photon-number g2 of the Jaynes-Cummings master equation steady state,
// with the top-Fock population as truncation check.
std::pair<double, bool> standard_baseline(const SweepConfig& c, double g, double temperature) {
    const RabiParams params{1.0, c.omega_x, g, c.n_fock};
    const BathSpec bath{c.gamma_a, c.gamma_x, temperature};
    const auto rho = steady_state(standard_me_baseline(params, bath));
    const auto a = embed(fock_annihilation(c.n_fock), rabi_space(c.n_fock), 1);
    const auto n = static_cast<Eigen::Index>(c.n_fock);
    const double top = (rho(n - 1, n - 1) + rho(2 * n - 1, 2 * n - 1)).real();
    return {normal_order_g2(rho, a.matrix()), top <= kTopFockTol};
}

}  // namespace

const char* to_string(TaskKind task) noexcept {
    switch (task) {
        case TaskKind::G2Zero: return "g2zero";
        case TaskKind::Levels: return "levels";
        case TaskKind::G2Tau: return "g2tau";
        case TaskKind::CrossCorr: return "crosscorr";
        case TaskKind::Spectrum: return "spectrum";
        case TaskKind::Baseline: return "baseline";
    }
    return "g2zero";
}

const char* to_string(OutputFormat format) noexcept { return format == OutputFormat::Json ? "json" : "csv"; }

std::vector<double> GridSpec::values() const {
    if (steps <= 1) return {min};
    std::vector<double> out(steps);
    const double span = max - min;
    for (std::size_t i = 0; i < steps; ++i) {
        out[i] = min + span * static_cast<double>(i) / static_cast<double>(steps - 1);
    }
    out.back() = max;
    return out;
}

std::span<const Marker> marker_points() { return kMarkers; }

void SweepConfig::validate() const {
    check_grid(g, "g", 0.0, kCouplingBound);
    if (task != TaskKind::Levels) check_grid(temperature, "t", kTemperatureMin, kTemperatureMax);
    if (omega.steps < 1) config_error("w-steps", "0", "at least 1");
    if (omega.steps > 1 && !(omega.max > omega.min)) {
        config_error("w-max", format_number(omega.max), "more than w-min");
    }
    if (!(omega_x > 0.0)) config_error("omega-x", format_number(omega_x), "a positive value");
    if (!(gamma_a >= 0.0)) config_error("gamma-a", format_number(gamma_a), "a value >= 0");
    if (!(gamma_x >= 0.0)) config_error("gamma-x", format_number(gamma_x), "a value >= 0");
    if (!(gamma_a + gamma_x > 0.0)) config_error("gamma-a", "0 with gamma-x 0", "at least one positive damping rate");
    if (n_fock < 2) config_error("n-fock", std::to_string(n_fock), "at least 2");
    if (n_fock2 < 2) config_error("n-fock2", std::to_string(n_fock2), "at least 2");
    if (!(mode2_omega > 0.0)) config_error("mode2-omega", format_number(mode2_omega), "a positive value");
    if (!(mode2_ratio >= 0.0)) config_error("mode2-ratio", format_number(mode2_ratio), "a value >= 0");
    if (level_cut == 1) config_error("level-cut", "1", "0 (automatic) or at least 2");
    if (levels < 2) config_error("levels", std::to_string(levels), "at least 2");
    if (!(tau_max >= 0.0)) config_error("tau-max", format_number(tau_max), "a value >= 0");
    if (!(tau_step >= 0.0)) config_error("tau-step", format_number(tau_step), "a value >= 0");
    if ((tau_max > 0.0) != (tau_step > 0.0)) {
        config_error("tau-step", format_number(tau_step), "set together with tau-max (both 0 for automatic)");
    }
    if (tau_max > 0.0 && tau_step > tau_max) config_error("tau-step", format_number(tau_step), "at most tau-max");
    if (workers < 1) config_error("workers", "0", "at least 1");
    if (model == ModelKind::MultiTls && (emitters < 1 || emitters > 8)) {
        config_error("model", "multi-tls:" + std::to_string(emitters), "1 to 8 emitters");
    }
    if (task == TaskKind::Baseline && model != ModelKind::Rabi) {
        config_error("model", model_name(), "rabi for the baseline task");
    }
}

std::string SweepConfig::model_name() const {
    switch (model) {
        case ModelKind::Rabi: return "rabi";
        case ModelKind::TwoMode: return "two-mode";
        case ModelKind::MultiTls: return "multi-tls:" + std::to_string(emitters);
    }
    return "rabi";
}

std::string SweepConfig::canonical() const {
    std::ostringstream s;
    s << "task=" << to_string(task) << '\n'
      << "model=" << model_name() << '\n'
      << "markers=" << (markers ? 1 : 0) << '\n'
      << "g=" << format_number(g.min) << ':' << format_number(g.max) << ':' << g.steps << '\n'
      << "t=" << format_number(temperature.min) << ':' << format_number(temperature.max) << ':'
      << temperature.steps << '\n'
      << "w=" << format_number(omega.min) << ':' << format_number(omega.max) << ':' << omega.steps << '\n'
      << "omega_x=" << format_number(omega_x) << '\n'
      << "gamma_a=" << format_number(gamma_a) << '\n'
      << "gamma_x=" << format_number(gamma_x) << '\n'
      << "n_fock=" << n_fock << '\n'
      << "n_fock2=" << n_fock2 << '\n'
      << "mode2_omega=" << format_number(mode2_omega) << '\n'
      << "mode2_ratio=" << format_number(mode2_ratio) << '\n'
      << "level_cut=" << level_cut << '\n'
      << "levels=" << levels << '\n'
      << "tau_max=" << format_number(tau_max) << '\n'
      << "tau_step=" << format_number(tau_step) << '\n'
      << "normalize=" << to_string(normalize) << '\n'
      << "format=" << to_string(format) << '\n';
    return s.str();
}

std::uint64_t SweepConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::size_t default_workers() {
    if (const char* env = std::getenv("RABISTAT_WORKERS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n >= 1) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::optional<SweepConfig> parse_config(const std::vector<std::string>& args, std::ostream& out) {
    SweepConfig c;
    c.workers = default_workers();

    CLI::App app{"Thermal photon statistics of the quantum Rabi model", "rabistat"};
    app.set_config("--config", "", "key = value file; command-line flags override it");
    app.allow_config_extras(CLI::config_extras_mode::error);

    std::string task = "g2zero";
    std::string model = "rabi";
    std::string normalize = "raw";
    std::string format = "csv";
    double g_point = 0.0;
    double t_point = 0.0;

    app.add_option("task", task, "g2zero | levels | g2tau | crosscorr | spectrum | baseline")
        ->capture_default_str();
    auto* g_min = app.add_option("--g-min", c.g.min, "smallest g/omega0")->capture_default_str();
    auto* g_max = app.add_option("--g-max,--gmax", c.g.max, "largest g/omega0")->capture_default_str();
    auto* g_steps = app.add_option("--g-steps", c.g.steps, "g grid points")->capture_default_str();
    auto* g_opt = app.add_option("--g", g_point, "single coupling (sets the g grid to one point)");
    auto* t_min = app.add_option("--t-min", c.temperature.min, "lowest k_B T/omega0")->capture_default_str();
    auto* t_max = app.add_option("--t-max", c.temperature.max, "highest k_B T/omega0")->capture_default_str();
    auto* t_steps = app.add_option("--t-steps", c.temperature.steps, "temperature grid points")->capture_default_str();
    auto* t_opt = app.add_option("--t", t_point, "single temperature (sets the T grid to one point)");
    app.add_option("--w-min", c.omega.min, "spectrum: lowest frequency")->capture_default_str();
    app.add_option("--w-max", c.omega.max, "spectrum: highest frequency")->capture_default_str();
    app.add_option("--w-steps", c.omega.steps, "spectrum: frequency points")->capture_default_str();
    app.add_option("--omega-x", c.omega_x, "emitter frequency / omega0")->capture_default_str();
    app.add_option("--gamma-a", c.gamma_a, "cavity damping / omega0")->capture_default_str();
    app.add_option("--gamma-x", c.gamma_x, "emitter damping / omega0")->capture_default_str();
    app.add_option("--n-fock", c.n_fock, "photon truncation (mode 1)")->capture_default_str();
    app.add_option("--n-fock2", c.n_fock2, "photon truncation of mode 2 (two-mode)")->capture_default_str();
    app.add_option("--mode2-omega", c.mode2_omega, "mode 2 frequency / omega0 (two-mode)")->capture_default_str();
    app.add_option("--mode2-ratio", c.mode2_ratio, "mode 2 coupling / g (two-mode)")->capture_default_str();
    app.add_option("--level-cut", c.level_cut, "dressed levels kept; 0 = by temperature")->capture_default_str();
    app.add_option("--levels", c.levels, "levels task: number of levels tracked")->capture_default_str();
    app.add_option("--tau-max", c.tau_max, "delay window; 0 = automatic")->capture_default_str();
    app.add_option("--tau-step", c.tau_step, "delay step; 0 = automatic")->capture_default_str();
    app.add_option("--model", model, "rabi | multi-tls:N | two-mode")->capture_default_str();
    app.add_flag("--markers", c.markers, "use the four marker points instead of the grid");
    app.add_option("--normalize", normalize, "raw | per-flux | paper-figure")->capture_default_str();
    app.add_option("--out", c.out, "output directory")->capture_default_str();
    app.add_option("--workers", c.workers, "worker threads (default: RABISTAT_WORKERS or cores)");
    app.add_option("--format", format, "csv | json")->capture_default_str();
    app.add_flag("--resume", c.resume, "rerun only failed or missing points of a previous run in --out");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw Error(ErrorCode::Config, e.what());
    }

    c.task = parse_task(task);
    parse_model(model, c);
    c.normalize = parse_normalization(normalize);
    if (format == "csv") {
        c.format = OutputFormat::Csv;
    } else if (format == "json") {
        c.format = OutputFormat::Json;
    } else {
        config_error("format", format, "csv or json");
    }
    if (g_opt->count() > 0) {
        if (g_min->count() + g_max->count() + g_steps->count() > 0) {
            config_error("g", format_number(g_point), "either --g or a --g-min/--g-max/--g-steps grid");
        }
        c.g = {g_point, g_point, 1};
    }
    if (t_opt->count() > 0) {
        if (t_min->count() + t_max->count() + t_steps->count() > 0) {
            config_error("t", format_number(t_point), "either --t or a --t-min/--t-max/--t-steps grid");
        }
        c.temperature = {t_point, t_point, 1};
    }
    // Level tracking needs a fine grid; default to steps of 0.01.
    if (c.task == TaskKind::Levels && g_steps->count() == 0 && g_opt->count() == 0) {
        c.g.steps = static_cast<std::size_t>(std::llround((c.g.max - c.g.min) / 0.01)) + 1;
    }
    c.validate();
    return c;
}

std::size_t SweepResult::failed() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const PointRecord& r) { return r.status != "ok"; }));
}

std::size_t SweepResult::unconverged() const {
    return static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(), [](const PointRecord& r) { return r.status == "ok" && !r.converged; }));
}

int SweepResult::exit_code() const {
    if (failed() > 0) return 3;
    if (unconverged() > 0) return 4;
    return 0;
}

std::string region_label(double g2) {
    if (!std::isfinite(g2)) return "";
    if (g2 < 1.0) return "blue";
    if (g2 <= 1.999) return "gray";
    if (g2 <= 2.0 + 1e-9) return "green";
    return "red";
}

std::vector<SweepPoint> sweep_points(const SweepConfig& config) {
    std::vector<SweepPoint> points;
    if (config.markers) {
        for (const auto& m : kMarkers) points.push_back({m.name, m.g, m.temperature});
        return points;
    }
    const auto gs = config.g.values();
    const auto ts = config.task == TaskKind::Levels ? std::vector<double>{0.0} : config.temperature.values();
    for (std::size_t i = 0; i < gs.size(); ++i) {
        for (std::size_t j = 0; j < ts.size(); ++j) {
            points.push_back({std::to_string(i) + "_" + std::to_string(j), gs[i], ts[j]});
        }
    }
    return points;
}

CavitySystem build_system(const SweepConfig& config, double g, std::size_t fock_scale) {
    switch (config.model) {
        case ModelKind::Rabi:
            return rabi_system({1.0, config.omega_x, g, config.n_fock * fock_scale});
        case ModelKind::MultiTls: {
            MultiTlsParams p;
            p.emitters.assign(config.emitters, EmitterCoupling{config.omega_x, g});
            p.n_fock = config.n_fock * fock_scale;
            return multi_tls_system(p);
        }
        case ModelKind::TwoMode: {
            TwoModeParams p;
            p.mode1 = {1.0, g, config.n_fock * fock_scale};
            p.mode2 = {config.mode2_omega, config.mode2_ratio * g, config.n_fock2 * fock_scale};
            p.omega_x = config.omega_x;
            return two_mode_system(p);
        }
    }
    throw Error(ErrorCode::Config, "unknown model");
}

SweepResult run_g2zero_sweep(const SweepConfig& config, std::span<const PointRecord> reuse) {
    const auto points = sweep_points(config);
    const auto done = reusable(reuse);
    SweepResult result;
    result.task = TaskKind::G2Zero;
    result.columns = {"g2"};
    result.records.reserve(points.size());
    for (const auto& p : points) {
        const auto it = done.find(p.name);
        result.records.push_back(it != done.end() ? *it->second : fresh_record(p, config, 1));
    }

    // One pair of diagonalizations per distinct coupling.
    std::vector<std::pair<double, std::vector<std::size_t>>> columns;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (done.count(points[i].name)) continue;
        auto it = std::find_if(columns.begin(), columns.end(), [&](const auto& c) { return c.first == points[i].g; });
        if (it == columns.end()) {
            columns.push_back({points[i].g, {i}});
        } else {
            it->second.push_back(i);
        }
    }

    parallel_for(columns.size(), config.workers, [&](std::size_t ci) {
        const auto& [g, indices] = columns[ci];
        const auto start = Clock::now();
        std::optional<PointModel> base, doubled;
        try {
            base = dressed_model(config, g, 1);
            doubled = dressed_model(config, g, 2);
        } catch (const Error& e) {
            for (auto i : indices) mark_failed(result.records[i], e);
            return;
        }
        const double shared = elapsed_ms(start) / static_cast<double>(indices.size());
        for (auto i : indices) {
            const auto t0 = Clock::now();
            auto& r = result.records[i];
            try {
                const double v = g2_at(*base, config, r.temperature);
                const double check = g2_at(*doubled, config, r.temperature);
                r.values = {v};
                r.region = region_label(v);
                r.converged = agrees(v, check);
            } catch (const Error& e) {
                mark_failed(r, e);
            }
            r.wall_ms = shared + elapsed_ms(t0);
        }
    });
    return result;
}

namespace {

void run_levels(const SweepConfig& c, SweepResult& result) {
    const auto gs = c.g.values();
    const SystemFactory base = [&](double g) { return build_system(c, g, 1); };
    const SystemFactory doubled = [&](double g) { return build_system(c, g, 2); };
    const auto start = Clock::now();
    const auto table = level_sweep(base, gs, c.levels, c.workers);
    const auto check = level_sweep(doubled, gs, c.levels, c.workers);
    const double per_point = elapsed_ms(start) / static_cast<double>(gs.size());

    for (std::size_t i = 0; i < c.levels; ++i) result.columns.push_back("omega_" + std::to_string(i));
    const auto points = sweep_points(c);
    for (std::size_t i = 0; i < gs.size(); ++i) {
        auto r = fresh_record(points[i], c, c.levels);
        r.temperature = std::numeric_limits<double>::quiet_NaN();
        r.values = table.energies[i];
        r.converged = true;
        for (std::size_t l = 0; l < c.levels; ++l) {
            const double e = table.energies[i][l];
            if (std::abs(e - check.energies[i][l]) > kLevelConvergenceTol * std::max(1.0, std::abs(e))) {
                r.converged = false;
            }
        }
        r.wall_ms = per_point;
        result.records.push_back(std::move(r));
    }

    const fs::path dir(c.out);
    if (c.format == OutputFormat::Json) {
        json crossings = json::array();
        for (const auto& x : table.crossings) {
            crossings.push_back({{"lower_level", x.lower_level},
                                 {"upper_level", x.lower_level + 1},
                                 {"g_left", number(x.g_left)},
                                 {"g_right", number(x.g_right)}});
        }
        json energies = json::array();
        for (const auto& row : table.energies) energies.push_back(values_json(row));
        const json doc{{"model", c.model_name()},
                       {"n_fock", c.n_fock},
                       {"g", values_json(table.g)},
                       {"energies", energies},
                       {"crossings", crossings}};
        write_text(dir / "levels.json", doc.dump(2) + "\n");
        result.outputs.push_back("levels.json");
    } else {
        std::ostringstream levels, crossings;
        write_level_csv(levels, table);
        write_crossings_csv(crossings, table);
        write_text(dir / "levels.csv", levels.str());
        write_text(dir / "crossings.csv", crossings.str());
        result.outputs.push_back("levels.csv");
        result.outputs.push_back("crossings.csv");
    }
}

struct OpenModel {
    PointModel model;
    Liouvillian liouvillian;
};

OpenModel open_model(const SweepConfig& c, const PointModel& full, double temperature) {
    auto m = cut(full, c, temperature);
    const auto rates = all_rates(m.basis, m.table, BathSpec{c.gamma_a, c.gamma_x, temperature});
    auto l = build_liouvillian(m.basis, rates);
    return {std::move(m), std::move(l)};
}

TauWindow window_for(const SweepConfig& c, const OpenModel& m, double temperature) {
    if (c.tau_max > 0.0) return {c.tau_max, c.tau_step};
    return default_tau_window(m.model.basis, m.model.table, m.liouvillian, temperature);
}

}  // namespace

SweepResult run_trace_task(const SweepConfig& config, std::span<const PointRecord> reuse) {
    SweepResult result;
    result.task = config.task;
    fs::create_directories(config.out);
    if (config.task == TaskKind::Levels) {
        run_levels(config, result);
        return result;
    }
    if (config.task == TaskKind::G2Zero) throw Error(ErrorCode::Config, "g2zero is not a trace task");

    const auto points = sweep_points(config);
    const fs::path dir(config.out);
    auto done = reusable(reuse);
    for (auto it = done.begin(); it != done.end();) {
        const bool present = it->second->file.empty() || fs::exists(dir / it->second->file);
        it = present ? std::next(it) : done.erase(it);
    }
    // Normalized spectra depend on each other; reuse only a complete run.
    if (config.task == TaskKind::Spectrum && done.size() != points.size()) done.clear();

    switch (config.task) {
        case TaskKind::G2Tau: result.columns = {"g2_0"}; break;
        case TaskKind::CrossCorr: result.columns = {"at_0_minus", "max_positive"}; break;
        case TaskKind::Spectrum: result.columns = {"peak_omega", "peak", "flux"}; break;
        case TaskKind::Baseline: result.columns = {"g2_standard", "g2_dressed"}; break;
        default: break;
    }
    result.records.reserve(points.size());
    std::vector<bool> pending(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto it = done.find(points[i].name);
        pending[i] = it == done.end();
        result.records.push_back(pending[i] ? fresh_record(points[i], config, result.columns.size()) : *it->second);
    }

    const char* stem = to_string(config.task);
    std::vector<Spectrum> spectra(points.size());
    parallel_for(points.size(), config.workers, [&](std::size_t i) {
        if (!pending[i]) return;
        const auto start = Clock::now();
        const auto& p = points[i];
        auto& r = result.records[i];
        try {
            const auto full = dressed_model(config, p.g, 1);
            const auto doubled = dressed_model(config, p.g, 2);
            const double g2 = g2_at(full, config, p.temperature);
            r.converged = agrees(g2, g2_at(doubled, config, p.temperature));
            if (config.task == TaskKind::Baseline) {
                const auto [standard, fock_ok] = standard_baseline(config, p.g, p.temperature);
                r.values = {standard, g2};
                r.converged = r.converged && fock_ok;
            } else {
                const auto open = open_model(config, full, p.temperature);
                const auto& basis = open.model.basis;
                const auto& table = open.model.table;
                const auto meta = metadata(config, p, basis.dim());
                const auto window = window_for(config, open, p.temperature);
                r.file = std::string(stem) + "_" + file_label(p, config.markers) + extension(config);
                if (config.task == TaskKind::G2Tau) {
                    const auto tau = window.grid();
                    auto trace = g2_tau(basis, table, open.liouvillian, p.temperature, tau);
                    trace.meta = meta;
                    r.values = {trace.values.front()};
                    write_text(dir / r.file, trace_text(config, trace, "g2"));
                } else if (config.task == TaskKind::CrossCorr) {
                    const auto forward = window.grid();
                    std::vector<double> tau;
                    for (std::size_t k = forward.size(); k-- > 1;) tau.push_back(-forward[k]);
                    tau.insert(tau.end(), forward.begin(), forward.end());
                    auto trace = g2_cross_filtered(basis, table, open.liouvillian, p.temperature, tau);
                    trace.meta = meta;
                    const std::size_t zero = forward.size() - 1;
                    const double before = zero > 0 ? trace.values[zero - 1] : std::numeric_limits<double>::quiet_NaN();
                    r.values = {before, *std::max_element(trace.values.begin() + static_cast<std::ptrdiff_t>(zero),
                                                          trace.values.end())};
                    write_text(dir / r.file, trace_text(config, trace, "g2_21_10"));
                } else {
                    const auto omega = config.omega.values();
                    spectra[i] = emission_spectrum(basis, table, open.liouvillian, p.temperature, omega, window);
                    spectra[i].meta = meta;
                }
            }
        } catch (const Error& e) {
            mark_failed(r, e);
            r.file.clear();
        }
        r.wall_ms = elapsed_ms(start);
    });

    if (config.task == TaskKind::Spectrum) {
        std::vector<Spectrum> ok;
        std::vector<std::size_t> where;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (pending[i] && result.records[i].status == "ok") {
                ok.push_back(std::move(spectra[i]));
                where.push_back(i);
            }
        }
        normalize_spectra(ok, config.normalize);
        for (std::size_t k = 0; k < ok.size(); ++k) {
            auto& r = result.records[where[k]];
            const auto& s = ok[k];
            const auto peak = std::max_element(s.values.begin(), s.values.end()) - s.values.begin();
            r.values = {s.omega[static_cast<std::size_t>(peak)], s.values[static_cast<std::size_t>(peak)], s.flux};
            r.file = std::string(stem) + "_" + file_label(points[where[k]], config.markers) + extension(config);
            write_text(dir / r.file, spectrum_text(config, s));
        }
    }

    if (config.task == TaskKind::Baseline) {
        const std::string name = std::string("baseline") + extension(config);
        write_text(dir / name, records_text(config, result));
        result.outputs.push_back(name);
    } else {
        for (const auto& r : result.records) {
            if (!r.file.empty()) result.outputs.push_back(r.file);
        }
    }
    return result;
}

void write_g2zero(std::ostream& out, const SweepConfig& config, const SweepResult& result) {
    out << records_text(config, result);
}

void write_manifest(std::ostream& out, const SweepConfig& config, const SweepResult& result, double wall_ms) {
    json settings = json::object();
    std::istringstream lines(config.canonical());
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        settings[line.substr(0, eq)] = line.substr(eq + 1);
    }
    json records = json::array();
    for (const auto& r : result.records) {
        records.push_back({{"point", r.point},
                           {"g", number(r.g)},
                           {"T", number(r.temperature)},
                           {"values", values_json(r.values)},
                           {"region", r.region},
                           {"n_fock", r.n_fock},
                           {"converged", r.converged},
                           {"status", r.status},
                           {"message", r.message},
                           {"file", r.file},
                           {"wall_ms", number(wall(r.wall_ms))}});
    }
    const json doc{{"tool", "rabistat"},
                   {"version", kVersion},
                   {"task", to_string(config.task)},
                   {"config_hash", hex64(config.hash())},
                   {"config", settings},
                   {"columns", result.columns},
                   {"points", result.records.size()},
                   {"failed", result.failed()},
                   {"unconverged", result.unconverged()},
                   {"exit_code", result.exit_code()},
                   {"outputs", result.outputs},
                   {"records", records},
                   {"wall_ms", number(wall(wall_ms))}};
    out << doc.dump(2) << '\n';
}

std::vector<PointRecord> read_manifest_records(const std::string& path, std::uint64_t expected_hash) {
    std::ifstream in(path);
    if (!in) return {};
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, "unreadable manifest " + path + ": " + e.what());
    }
    if (doc.value("config_hash", std::string{}) != hex64(expected_hash)) {
        throw Error(ErrorCode::Config,
                    "manifest " + path + " belongs to a different configuration; drop --resume or change --out");
    }
    const auto as_double = [](const json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    std::vector<PointRecord> out;
    for (const auto& j : doc.at("records")) {
        PointRecord r;
        r.point = j.at("point").get<std::string>();
        r.g = as_double(j.at("g"));
        r.temperature = as_double(j.at("T"));
        for (const auto& v : j.at("values")) r.values.push_back(as_double(v));
        r.region = j.at("region").get<std::string>();
        r.n_fock = j.at("n_fock").get<std::size_t>();
        r.converged = j.at("converged").get<bool>();
        r.status = j.at("status").get<std::string>();
        r.message = j.at("message").get<std::string>();
        r.file = j.at("file").get<std::string>();
        r.wall_ms = as_double(j.at("wall_ms"));
        out.push_back(std::move(r));
    }
    return out;
}

int run(const SweepConfig& config, std::ostream& log) {
    const auto start = Clock::now();
    const fs::path dir(config.out);
    fs::create_directories(dir);
    std::vector<PointRecord> reuse;
    if (config.resume) {
        reuse = read_manifest_records((dir / "manifest.json").string(), config.hash());
        const std::string data = config.task == TaskKind::G2Zero   ? "g2zero" + extension(config)
                                 : config.task == TaskKind::Baseline ? "baseline" + extension(config)
                                                                     : "";
        if (!data.empty() && !fs::exists(dir / data)) reuse.clear();
    }

    SweepResult result;
    if (config.task == TaskKind::G2Zero) {
        result = run_g2zero_sweep(config, reuse);
        const std::string name = "g2zero" + extension(config);
        std::ostringstream text;
        write_g2zero(text, config, result);
        write_text(dir / name, text.str());
        result.outputs.push_back(name);
    } else {
        result = run_trace_task(config, reuse);
    }

    std::ostringstream manifest;
    write_manifest(manifest, config, result, elapsed_ms(start));
    write_text(dir / "manifest.json", manifest.str());

    log << to_string(config.task) << ": " << result.records.size() << " points, " << result.failed() << " failed, "
        << result.unconverged() << " unconverged -> " << dir.string() << '\n';
    for (const auto& r : result.records) {
        if (r.status != "ok") log << "  " << r.point << " (g=" << format_number(r.g) << ", T=" << format_number(r.temperature)
                                  << "): " << r.status << ": " << r.message << '\n';
    }
    return result.exit_code();
}

}  // namespace rabistat
