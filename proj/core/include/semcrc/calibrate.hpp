#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "semcrc/losses.hpp"
#include "semcrc/partition.hpp"
#include "semcrc/tensor.hpp"

namespace semcrc {

enum class Method { CRC, KCRC, SemCRC, SembarCRC };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct CalibrationResult {
    Method mode = Method::CRC;
    LambdaVector lambda_hat;
    double epsilon = 0.1;
    std::size_t n_cal = 0;
    double omega_hat = 0.0;          // backtracking offset (0 for scalar/sembar)
    double empirical_cal_risk = 0.0; // mean loss01 on the calibration split at lambda_hat
    // sembar only: per-organ calibration risk, effective sample counts, and
    // fallback flags for organs absent from every calibration sample.
    std::vector<double> per_organ_risk;
    std::vector<std::size_t> effective_n;
    std::vector<bool> uncalibrated;
    // (search parameter, adjusted empirical risk) pairs, subsampled to <= 256
    std::vector<std::pair<double, double>> trace;
};

/// Scalar CRC: the infimum lambda whose adjusted empirical risk
/// (n/(n+1)) l01 + 1/(n+1) is <= epsilon. Exact via order-statistic jump
/// enumeration over pooled residuals.
CalibrationResult calibrate_scalar(const SampleSet& cal, double epsilon);

/// K-group CRC: backtracks along clamp+(anchor + omega 1) over a fixed
/// partition; omega may be negative.
CalibrationResult calibrate_kcrc(const SampleSet& cal, const PartitionSpec& part,
                                 const LambdaVector& anchor, double epsilon);

/// Semantic CRC: same backtracking with instance-dependent memberships from
/// each sample's segmentation.
CalibrationResult calibrate_semcrc(const SampleSet& cal, const LambdaVector& anchor,
                                   double epsilon);

/// Per-organ CRC: independent infimum search along anchor + lambda e_k for
/// each organ. Samples lacking organ k are excluded from that organ's mean
/// and its effective n.
CalibrationResult calibrate_sembar(const SampleSet& cal, const LambdaVector& anchor,
                                   double epsilon);

/// Conformalized bounds: lo_j - lambda_{g(j)}, hi_j + lambda_{g(j)}.
QuantilePair apply(const CalibrationSample& sample, const CalibrationResult& result,
                   const PartitionSpec& part);

void save_result(const CalibrationResult& r, const std::filesystem::path& path,
                 const std::vector<std::string>& class_names = {});
CalibrationResult load_result(const std::filesystem::path& path);

}  // namespace semcrc
