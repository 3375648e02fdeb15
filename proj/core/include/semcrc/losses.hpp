#pragma once

#include <optional>
#include <vector>

#include "semcrc/partition.hpp"
#include "semcrc/tensor.hpp"

namespace semcrc {

/// K nonnegative group inflation parameters. K = 1 is the scalar case.
struct LambdaVector {
    std::vector<double> values;

    static LambdaVector scalar(double v) { return {{v}}; }
    static LambdaVector zeros(int k) { return {std::vector<double>(static_cast<std::size_t>(k), 0.0)}; }

    int k() const { return static_cast<int>(values.size()); }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Group weights for the anchor objective: exact pixel counts n_k for a fixed
/// partition, or the empirical mean of |S_k(Y)| in semantic mode.
struct GroupWeights {
    std::vector<double> counts;
};

/// Per-voxel residual r_j = max(q_lo_j - x_j, x_j - q_hi_j).
/// x_j lies in [q_lo_j - lambda, q_hi_j + lambda] iff r_j <= lambda.
std::vector<double> residuals(const CalibrationSample& sample);

/// Miscoverage: fraction of voxels with r_j > lambda_{g(j)} (closed interval,
/// equality covers).
double loss01(const CalibrationSample& sample, const LambdaVector& lam, const PartitionSpec& part);

/// Per-organ miscoverage under semantic memberships; nullopt for organs with
/// no voxels in the sample.
std::vector<std::optional<double>> loss01_per_organ(const CalibrationSample& sample,
                                                    const LambdaVector& lam);

/// Hinge surrogate: mean of max(0, 1 + (r_j - lambda_{g(j)}) / gamma).
/// Convex and non-increasing in each lambda_k; dominates loss01 pointwise.
double loss_gamma(const CalibrationSample& sample, const LambdaVector& lam,
                  const PartitionSpec& part, double gamma);

/// Mean conformalized interval length: per-voxel max(0, hi - lo + 2 lambda),
/// averaged over the sample.
double mean_interval_length(const CalibrationSample& sample, const LambdaVector& lam,
                            const PartitionSpec& part);

/// Anchor objective weights over a sample set (typically S_opt).
GroupWeights group_weights(const SampleSet& set, const PartitionSpec& part);

// Set-level means (per-sample losses averaged with equal sample weight).
double mean_loss01(const SampleSet& set, const LambdaVector& lam, const PartitionSpec& part);
double mean_length(const SampleSet& set, const LambdaVector& lam, const PartitionSpec& part);

}  // namespace semcrc
