#include "kspec/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <tuple>

#include <json.hpp>

#include "kspec/baselines.hpp"
#include "kspec/rng.hpp"
#include "kspec/spectrum.hpp"

namespace kspec::experiment {

namespace {

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct MethodOutput {
    Eigen::MatrixXd A;
    /// Set when the spectrum comes from a complex operator instead of A.
    std::optional<Eigen::MatrixXcd> spectral_operator;
    std::string warning;
    Eigen::VectorXd reconstruction;
    int iterations = 0;
};

MethodOutput run_method(Method method, const ExperimentConfig& config,
                        const embed::BlockData<double>& data)
{
    MethodOutput out;
    if (method == Method::Kbk) {
        const auto fit = kbk::em_fit(data, config.em);
        out.A = fit.model.A;
        out.reconstruction = embed::flatten_blocks(embed::BlockData<double>{fit.posterior.means, data.sample_period});
        out.iterations = static_cast<int>(fit.trace.iterations.size());
        return out;
    }
    const auto pairs = baselines::make_pairs(data);
    switch (method) {
    case Method::Dmd: out.A = baselines::dmd(pairs); break;
    case Method::Tdmd: out.A = baselines::tdmd(pairs); break;
    case Method::Fbdmd: {
        auto fit = baselines::fbdmd_fit(pairs);
        out.A = fit.A;
        if (fit.near_branch_cut) {
            out.spectral_operator = std::move(fit.root);
            out.warning = "fbdmd: negative real eigenvalue in A_f A_b^-1, complex principal square root";
        }
        break;
    }
    case Method::Kbk: break;
    }
    out.reconstruction = embed::flatten_blocks(
        embed::BlockData<double>{baselines::propagate_blocks(out.A, data), data.sample_period});
    return out;
}

}  // namespace

std::string_view name(Method method) noexcept
{
    switch (method) {
    case Method::Dmd: return "dmd";
    case Method::Tdmd: return "tdmd";
    case Method::Fbdmd: return "fbdmd";
    case Method::Kbk: return "kbk";
    }
    return "unknown";
}

Method parse_method(std::string_view text)
{
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "dmd") return Method::Dmd;
    if (t == "tdmd") return Method::Tdmd;
    if (t == "fbdmd") return Method::Fbdmd;
    if (t == "kbk") return Method::Kbk;
    throw ContractViolation("unknown method '" + std::string(text) + "'");
}

void validate(const ExperimentConfig& c)
{
    detail::require(c.block_length >= 2, "config: M must be >= 2");
    detail::require(c.n_samples >= 2L * c.block_length, "config: N must be >= 2M");
    detail::require(c.sample_period > 0.0, "config: Ts must be positive");
    detail::require(c.trials >= 1, "config: trials must be >= 1");
    detail::require(!c.methods.empty(), "config: methods must be nonempty");
    detail::require(!c.noise_variances.empty(), "config: noise variances must be nonempty");
    for (double v : c.noise_variances)
        detail::require(std::isfinite(v) && v >= 0.0, "config: noise variances must be finite and >= 0");
    detail::require(c.substeps >= 1, "config: substeps must be >= 1");
    detail::require(c.em.max_iterations >= 1, "config: em max iterations must be >= 1");
    detail::require(c.em.likelihood_rel_tol > 0.0, "config: em tolerance must be positive");
    detail::require(c.em.cov_floor > 0.0, "config: covariance floor must be positive");
    if (c.initial_condition)
        detail::require(c.initial_condition->allFinite(), "config: initial condition must be finite");
}

ExperimentConfig default_config(sim::SystemId system)
{
    ExperimentConfig c;
    c.system = system;
    c.block_length = 4;
    c.noise_variances = {1e-4, 1e-3, 1e-2, 1e-1};
    c.trials = 50;
    c.methods = {Method::Dmd, Method::Tdmd, Method::Fbdmd, Method::Kbk};
    switch (system) {
    case sim::SystemId::RealSpectrum:
        c.n_samples = 30;
        c.sample_period = 0.2;
        c.observable = embed::Observable::X2;
        break;
    case sim::SystemId::ImaginarySpectrum:
        c.n_samples = 60;
        c.sample_period = 0.1;
        c.observable = embed::Observable::X1;
        break;
    case sim::SystemId::ComplexSpectrum:
        c.n_samples = 200;
        c.sample_period = 0.1;
        c.observable = embed::Observable::X1;
        break;
    }
    return c;
}

std::vector<ExperimentConfig> default_configs()
{
    return {default_config(sim::SystemId::RealSpectrum),
            default_config(sim::SystemId::ImaginarySpectrum),
            default_config(sim::SystemId::ComplexSpectrum)};
}

std::uint64_t series_checksum(const Eigen::VectorXd& series)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Eigen::Index i = 0; i < series.size(); ++i) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &series(i), sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& config)
{
    validate(config);
    const Eigen::Vector2d x0 =
        config.initial_condition.value_or(sim::default_initial_condition<double>(config.system));
    const auto clean = sim::integrate(config.system, x0, config.sample_period, config.n_samples,
                                      config.substeps);
    const Eigen::Index coord = embed::coordinate(config.observable);
    const Eigen::VectorXd clean_series = clean.coordinate(coord);
    const auto truth_blocks = embed::build_blocks(clean_series, config.block_length, config.sample_period);
    const Eigen::VectorXd truth = embed::flatten_blocks(truth_blocks);
    const auto true_eigs = sim::true_eigenvalues<double>(config.system);

    std::vector<TrialRecord> records;
    for (std::size_t vi = 0; vi < config.noise_variances.size(); ++vi) {
        const double variance = config.noise_variances[vi];
        for (int trial = 0; trial < config.trials; ++trial) {
            const std::uint64_t seed = derive_seed(config.seed, vi, static_cast<std::uint64_t>(trial));
            const auto noisy = sim::add_noise(clean, sim::NoiseSpec{variance, seed});
            const Eigen::VectorXd series = noisy.coordinate(coord);
            const std::uint64_t checksum = series_checksum(series);
            const auto data = embed::build_blocks(series, config.block_length, config.sample_period);

            for (Method method : config.methods) {
                TrialRecord rec;
                rec.system = config.system;
                rec.method = method;
                rec.noise_variance = variance;
                rec.variance_index = static_cast<int>(vi);
                rec.trial = trial;
                rec.seed_used = seed;
                rec.data_checksum = checksum;
                const auto start = std::chrono::steady_clock::now();
                try {
                    const MethodOutput out = run_method(method, config, data);
                    rec.warning = out.warning;
                    const auto spec =
                        out.spectral_operator
                            ? spectrum::analyze(*out.spectral_operator, config.block_length,
                                                config.sample_period, true_eigs.size())
                            : spectrum::analyze(out.A, config.block_length, config.sample_period,
                                                true_eigs.size());
                    rec.eigenvalues = spec.continuous;
                    rec.e1 = spectrum::eig_error(spec.continuous, true_eigs);
                    rec.e2 = spectrum::state_rmse(out.reconstruction, truth);
                    rec.iterations = out.iterations;
                    if (!std::isfinite(rec.e1) || !std::isfinite(rec.e2))
                        throw NumericalError("non-finite error metric");
                } catch (const std::exception& e) {
                    rec.failed = true;
                    rec.error = e.what();
                    rec.e1 = rec.e2 = std::numeric_limits<double>::quiet_NaN();
                    rec.eigenvalues.clear();
                }
                rec.runtime_ms = std::chrono::duration<double, std::milli>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();
                records.push_back(std::move(rec));
            }
        }
    }
    return records;
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records)
{
    struct Acc {
        std::vector<double> e1, e2;
        int failures = 0;
    };
    std::map<std::tuple<int, int, double>, Acc> groups;
    for (const auto& r : records) {
        auto& acc = groups[{static_cast<int>(r.system), static_cast<int>(r.method), r.noise_variance}];
        if (r.failed) {
            ++acc.failures;
            continue;
        }
        acc.e1.push_back(r.e1);
        acc.e2.push_back(r.e2);
    }
    auto moments = [](const std::vector<double>& v) -> std::pair<double, double> {
        if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
    };

    std::vector<SummaryRow> rows;
    for (const auto& [key, acc] : groups) {
        SummaryRow row;
        row.system = static_cast<sim::SystemId>(std::get<0>(key));
        row.method = static_cast<Method>(std::get<1>(key));
        row.noise_variance = std::get<2>(key);
        row.successes = static_cast<int>(acc.e1.size());
        row.failures = acc.failures;
        std::tie(row.e1_mean, row.e1_std) = moments(acc.e1);
        std::tie(row.e2_mean, row.e2_std) = moments(acc.e2);
        rows.push_back(row);
    }
    return rows;
}

const SummaryRow* find(const std::vector<SummaryRow>& rows, sim::SystemId system, Method method,
                       double noise_variance)
{
    for (const auto& r : rows)
        if (r.system == system && r.method == method && r.noise_variance == noise_variance) return &r;
    return nullptr;
}

void write_results_csv(std::ostream& os, const std::vector<TrialRecord>& records,
                       const WriteOptions& options)
{
    os << "system,method,noise_var,trial,E1,E2,iterations,runtime_ms,failed\n";
    for (const auto& r : records) {
        os << sim::name(r.system) << ',' << name(r.method) << ',' << num(r.noise_variance) << ','
           << r.trial << ',' << num(r.e1) << ',' << num(r.e2) << ',' << r.iterations << ','
           << num(options.include_timing ? r.runtime_ms : 0.0) << ',' << (r.failed ? 1 : 0) << '\n';
    }
}

void write_eigs_csv(std::ostream& os, const std::vector<TrialRecord>& records)
{
    os << "system,method,noise_var,trial,eig_index,re,im\n";
    for (const auto& r : records) {
        for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
            os << sim::name(r.system) << ',' << name(r.method) << ',' << num(r.noise_variance) << ','
               << r.trial << ',' << i << ',' << num(r.eigenvalues[i].real()) << ','
               << num(r.eigenvalues[i].imag()) << '\n';
        }
    }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows)
{
    os << "system,method,noise_var,successes,failures,E1_mean,E1_std,E2_mean,E2_std\n";
    for (const auto& r : rows) {
        os << sim::name(r.system) << ',' << name(r.method) << ',' << num(r.noise_variance) << ','
           << r.successes << ',' << r.failures << ',' << num(r.e1_mean) << ',' << num(r.e1_std) << ','
           << num(r.e2_mean) << ',' << num(r.e2_std) << '\n';
    }
}

std::string metadata_json(const ExperimentConfig& c, const WriteOptions& options)
{
    using nlohmann::json;
    const Eigen::Vector2d x0 = c.initial_condition.value_or(sim::default_initial_condition<double>(c.system));
    json methods = json::array();
    for (Method m : c.methods) methods.push_back(name(m));
    json j;
    j["tool"] = "kspec";
    j["tool_version"] = tool_version;
    j["config"] = {
        {"system", sim::name(c.system)},
        {"n", c.n_samples},
        {"ts", c.sample_period},
        {"m", c.block_length},
        {"observable", embed::name(c.observable)},
        {"noise_variances", c.noise_variances},
        {"trials", c.trials},
        {"methods", methods},
        {"seed", c.seed},
        {"initial_condition", {x0(0), x0(1)}},
        {"integrator", {{"scheme", "rk4"}, {"substeps", c.substeps}}},
        {"em",
         {{"max_iterations", c.em.max_iterations},
          {"likelihood_rel_tol", c.em.likelihood_rel_tol},
          {"diagonal_covariances", c.em.diagonal_covariances},
          {"cov_floor", c.em.cov_floor}}},
    };
    j["rng"] = {
        {"algorithm", NormalStream::algorithm},
        {"seed_derivation", "mix64(mix64(mix64(seed) ^ variance_index) ^ trial_index), mix64 = splitmix64 finalizer"},
    };
    j["conventions"] = {
        {"baseline_E2", "z_1 = y_1, z_{k+1} = A z_k, flattened and compared over Q*M samples"},
        {"kbk_E2", "flattened smoothed block means compared over Q*M samples"},
        {"E1_pairing", "minimum over all one-to-one pairings"},
        {"selected_modes", "largest-modulus eigenvalues, count = number of reference eigenvalues"},
        {"runtime_ms", options.include_timing ? "measured wall clock" : "omitted (written as 0)"},
    };
    return j.dump(2) + "\n";
}

void write_outputs(const ExperimentConfig& config, const std::vector<TrialRecord>& records,
                   const WriteOptions& options)
{
    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);
    auto open = [&](const char* file) {
        std::ofstream os(config.output_dir / file, std::ios::binary);
        if (!os) throw Error("cannot open " + (config.output_dir / file).string() + " for writing");
        return os;
    };
    {
        auto os = open("results.csv");
        write_results_csv(os, records, options);
    }
    {
        auto os = open("eigs.csv");
        write_eigs_csv(os, records);
    }
    {
        auto os = open("summary.csv");
        write_summary_csv(os, summarize(records));
    }
    {
        auto os = open("metadata.json");
        os << metadata_json(config, options);
    }
}

}  // namespace kspec::experiment
