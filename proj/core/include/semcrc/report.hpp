#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semcrc/calibrate.hpp"
#include "semcrc/synth.hpp"
#include "semcrc/tensor.hpp"

namespace semcrc {

struct ScenarioConfig {
    PhantomConfig phantom;
    std::vector<Method> methods{Method::CRC, Method::KCRC, Method::SemCRC, Method::SembarCRC};
    double epsilon = 0.10;
    double gamma = 0.1;
    int k_partition = 4;     // loss-quantile bins for K-CRC
    std::size_t d_opt = 50;  // fixed-partition subsample size
    std::size_t d_min = 2;   // semantic support floor
    std::size_t trials = 20;
    SplitPlan sizes{32, 100, 500, 0};
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0 = hardware concurrency
};

struct TrialMetrics {
    double risk = 0.0;
    double length = 0.0;
    std::vector<double> organ_risk;    // NaN where the organ never appears
    std::vector<double> organ_length;
    LambdaVector lambda_hat;
};

struct MethodReport {
    Method method = Method::CRC;
    std::vector<TrialMetrics> trials;
    double mean_risk = 0.0, std_risk = 0.0;
    double mean_length = 0.0, std_length = 0.0;
    std::vector<double> mean_organ_risk;
    std::vector<double> mean_organ_length;
};

struct ScenarioReport {
    ScenarioConfig config;
    std::vector<std::string> class_names;
    std::vector<MethodReport> methods;
};

/// Runs `trials` independent rounds of generate / split / anchor / calibrate /
/// evaluate for each method. Per-trial seeds derive from the scenario seed, so
/// results are bitwise reproducible regardless of thread count.
ScenarioReport run_scenario(const ScenarioConfig& config);

/// Per-organ stratified evaluation of a calibration result on a test set.
/// Rows: one per organ plus an "overall" row per the CSV schema
/// (method, organ, risk, mean_length, n_voxels).
struct EvalRow {
    std::string method;
    std::string organ;
    double risk = 0.0;
    double mean_length = 0.0;
    double n_voxels = 0.0;
};
std::vector<EvalRow> evaluate(const SampleSet& test, const CalibrationResult& result,
                              const PartitionSpec& part);

void write_eval_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path);

void write_scenario_csv(const ScenarioReport& report, const std::filesystem::path& path);
void save_scenario_report(const ScenarioReport& report, const std::filesystem::path& path);

ScenarioConfig load_scenario_config(const std::filesystem::path& path);
void save_scenario_config(const ScenarioConfig& config, const std::filesystem::path& path);

/// Deterministic per-trial seed stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

/// Writes content to path atomically (temp file + rename).
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace semcrc
