#pragma once

// Parameter sweeps over (g, T) and the files they produce.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rabistat/correlations.hpp"
#include "rabistat/model.hpp"

namespace rabistat {

enum class TaskKind { G2Zero, Levels, G2Tau, CrossCorr, Spectrum, Baseline };
enum class OutputFormat { Csv, Json };

const char* to_string(TaskKind task) noexcept;
const char* to_string(OutputFormat format) noexcept;

// Inclusive, evenly spaced; a single step means just `min`.
struct GridSpec {
    double min = 0.0;
    double max = 0.0;
    std::size_t steps = 1;

    std::vector<double> values() const;
};

struct Marker {
    const char* name;
    double g;
    double temperature;
};

// diamond (0.1, 0.2), triangle (0.2, 0.1), square (0.5, 0.07), circle (0.9, 0.15).
std::span<const Marker> marker_points();

inline constexpr double kCouplingBound = 1.5;
inline constexpr double kTemperatureMin = 0.02;
inline constexpr double kTemperatureMax = 1.0;

struct SweepConfig {
    TaskKind task = TaskKind::G2Zero;
    ModelKind model = ModelKind::Rabi;
    std::size_t emitters = 1;  // multi-tls only

    GridSpec g{0.0, 1.0, 60};
    GridSpec temperature{0.02, 0.3, 60};
    GridSpec omega{0.0, 1.5, 1501};  // spectrum frequencies
    bool markers = false;            // replaces the (g, T) grid by the four markers

    double omega_x = 1.0;
    double gamma_a = 0.01;
    double gamma_x = 0.01;
    std::size_t n_fock = kDefaultFockTruncation;
    std::size_t n_fock2 = 10;   // two-mode: second mode
    double mode2_omega = 2.0;   // two-mode: omega0 of mode 2
    double mode2_ratio = 2.0;   // two-mode: g2 = ratio * g
    std::size_t level_cut = 0;  // 0 picks one per temperature
    std::size_t levels = 6;     // levels task
    double tau_max = 0.0;       // 0 picks the window per point
    double tau_step = 0.0;
    SpectrumNormalization normalize = SpectrumNormalization::Raw;

    std::string out = ".";
    OutputFormat format = OutputFormat::Csv;
    std::size_t workers = 1;
    bool resume = false;

    void validate() const;
    std::string model_name() const;
    // Every field that changes results, one "key=value" per line. Worker
    // count, output directory and the resume flag are excluded.
    std::string canonical() const;
    std::uint64_t hash() const;  // FNV-1a of canonical()
};

// Worker default: RABISTAT_WORKERS if set, else the hardware concurrency.
std::size_t default_workers();

// CLI arguments (without the program name). Returns nullopt after printing
// help to `out`. Throws Error(Config) on any violation.
std::optional<SweepConfig> parse_config(const std::vector<std::string>& args, std::ostream& out);

struct PointRecord {
    std::string point;  // marker name or "i_j" grid index
    double g = 0.0;
    double temperature = 0.0;
    std::vector<double> values;  // named by SweepResult::columns
    std::string region;          // g2zero only
    std::size_t n_fock = 0;
    bool converged = false;
    std::string status = "ok";  // or an error code
    std::string message;
    std::string file;  // trace tasks: the output file of this point
    double wall_ms = 0.0;
};

struct SweepResult {
    TaskKind task = TaskKind::G2Zero;
    std::vector<std::string> columns;
    std::vector<PointRecord> records;
    std::vector<std::string> outputs;

    std::size_t failed() const;
    std::size_t unconverged() const;
    int exit_code() const;  // 0, 3 numerical failure, 4 convergence failure
};

// green (1.999, 2], gray [1, 1.999], blue < 1, red > 2. Values within 1e-9 of
// 2 count as 2.
std::string region_label(double g2);

struct SweepPoint {
    std::string name;
    double g;
    double temperature;
};

// Markers, or the grid with g outer and T inner.
std::vector<SweepPoint> sweep_points(const SweepConfig& config);

CavitySystem build_system(const SweepConfig& config, double g, std::size_t fock_scale = 1);

// Records in `reuse` with status ok are copied instead of recomputed.
SweepResult run_g2zero_sweep(const SweepConfig& config, std::span<const PointRecord> reuse = {});

// levels, g2tau, crosscorr, spectrum or baseline; writes one file per point
// (one file per task for levels and baseline) into config.out.
SweepResult run_trace_task(const SweepConfig& config, std::span<const PointRecord> reuse = {});

void write_g2zero(std::ostream& out, const SweepConfig& config, const SweepResult& result);
void write_manifest(std::ostream& out, const SweepConfig& config, const SweepResult& result, double wall_ms);
std::vector<PointRecord> read_manifest_records(const std::string& path, std::uint64_t expected_hash);

// Full run: resume handling, the task, data files and manifest.json.
// Returns the process exit code.
int run(const SweepConfig& config, std::ostream& log);

}  // namespace rabistat
