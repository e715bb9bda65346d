#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kspec/embed.hpp"
#include "kspec/kbk.hpp"
#include "kspec/sim.hpp"

/// Noise-sweep benchmark harness: every method sees the same noisy series per trial.
namespace kspec::experiment {

inline constexpr std::string_view tool_version = "0.1.0";

enum class Method { Dmd, Tdmd, Fbdmd, Kbk };

std::string_view name(Method method) noexcept;
Method parse_method(std::string_view text);

struct ExperimentConfig {
    sim::SystemId system = sim::SystemId::RealSpectrum;
    long n_samples = 30;
    double sample_period = 0.2;
    int block_length = 4;
    embed::Observable observable = embed::Observable::X2;
    std::vector<double> noise_variances;
    int trials = 1;
    std::vector<Method> methods;
    std::uint64_t seed = 0;
    kbk::EMConfig em;
    std::filesystem::path output_dir = "results";
    /// Defaults to sim::default_initial_condition when unset.
    std::optional<Eigen::Vector2d> initial_condition;
    int substeps = 10;
};

/// Throws ContractViolation describing the first invalid field.
void validate(const ExperimentConfig& config);

struct TrialRecord {
    sim::SystemId system{};
    Method method{};
    double noise_variance = 0.0;
    int variance_index = 0;
    int trial = 0;
    double e1 = 0.0;
    double e2 = 0.0;
    int iterations = 0;
    double runtime_ms = 0.0;
    std::uint64_t seed_used = 0;
    /// FNV-1a hash of the noisy observable series the method consumed.
    std::uint64_t data_checksum = 0;
    ComplexList<double> eigenvalues;
    bool failed = false;
    std::string error;
    /// Non-fatal condition, e.g. a complex fbdmd square root.
    std::string warning;
};

/// RealSpectrum, ImaginarySpectrum, ComplexSpectrum with the benchmark settings.
std::vector<ExperimentConfig> default_configs();
ExperimentConfig default_config(sim::SystemId system);

std::uint64_t series_checksum(const Eigen::VectorXd& series);

/// Runs every (variance, trial, method) cell; failures are recorded, not thrown.
/// Records are ordered by variance, trial, then method.
std::vector<TrialRecord> run_experiment(const ExperimentConfig& config);

struct SummaryRow {
    sim::SystemId system{};
    Method method{};
    double noise_variance = 0.0;
    int successes = 0;
    int failures = 0;
    double e1_mean = 0.0;
    double e1_std = 0.0;
    double e2_mean = 0.0;
    double e2_std = 0.0;
};

/// Per (system, method, variance) mean and population std over successful trials.
std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records);

/// Looks up one summary row; nullptr if absent.
const SummaryRow* find(const std::vector<SummaryRow>& rows, sim::SystemId system, Method method,
                       double noise_variance);

struct WriteOptions {
    /// When false, runtime_ms is written as 0 so repeated runs are byte-identical.
    bool include_timing = false;
};

void write_results_csv(std::ostream& os, const std::vector<TrialRecord>& records,
                       const WriteOptions& options = {});
void write_eigs_csv(std::ostream& os, const std::vector<TrialRecord>& records);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);
std::string metadata_json(const ExperimentConfig& config, const WriteOptions& options = {});

/// results.csv, eigs.csv, summary.csv and metadata.json under config.output_dir.
void write_outputs(const ExperimentConfig& config, const std::vector<TrialRecord>& records,
                   const WriteOptions& options = {});

}  // namespace kspec::experiment
