#pragma once

#include <cstdint>
#include <vector>

#include "semcrc/losses.hpp"
#include "semcrc/partition.hpp"
#include "semcrc/tensor.hpp"

namespace semcrc {

struct AnchorRow {
    double residual;
    int group;
    double weight;  // contribution to the weighted-mean surrogate; weights sum to 1
};

/// Subsampled instance of the anchor problem:
///   minimize sum_k w_k lambda_k  s.t.  weighted mean hinge surrogate <= epsilon,
/// with lambda >= 0.
struct AnchorProblem {
    std::vector<AnchorRow> rows;
    GroupWeights weights;
    double epsilon = 0.1;
    double gamma = 0.1;
    int k = 1;
};

struct AnchorSolution {
    LambdaVector lambda_tilde;
    double achieved_surrogate = 0.0;
    int solver_iterations = 0;
    bool feasible = false;
};

/// Draws a per-sample stratified voxel subsample: d_opt voxels per sample with
/// group proportions matching the sample's membership histogram, at least
/// min(d_min, group size) voxels per present group. Row weights reproduce the
/// equal-sample-weight empirical mean. Deterministic given seed.
AnchorProblem subsample(const SampleSet& opt_set, const PartitionSpec& part, std::size_t d_opt,
                        std::size_t d_min, std::uint64_t seed, double epsilon, double gamma);

/// Semantic subsample sizing: d_opt = ceil(d_min / min_k E[|S_k|] / E[d])
/// over organs present in the set.
std::size_t semantic_d_opt(const SampleSet& opt_set, std::size_t d_min);

/// Weighted-mean hinge surrogate of the problem's rows at lambda.
double problem_surrogate(const AnchorProblem& p, const LambdaVector& lam);

/// Solves the anchor problem to within 1e-6 feasibility; the returned point is
/// always feasible (surrogate <= epsilon) and optimal up to the bisection
/// tolerance. Groups with zero objective weight or no rows stay at 0.
AnchorSolution solve_anchor(const AnchorProblem& problem);

}  // namespace semcrc
