#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace semcrc {

/// Error raised for invalid inputs (malformed manifests, shape mismatches,
/// out-of-range labels, infeasible configurations).
class validation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense real-valued tensor, row-major, float32 storage.
struct ImageTensor {
    std::vector<std::size_t> shape;
    std::vector<float> values;

    std::size_t size() const { return values.size(); }

    static std::size_t shape_product(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1},
                               [](std::size_t a, std::size_t b) { return a * b; });
    }

    bool shape_matches(const std::vector<std::size_t>& other) const { return shape == other; }
};

/// Heuristic per-voxel interval [lo_j, hi_j] from a quantile regressor.
/// Crossed pairs (lo_j > hi_j) are legal inputs.
struct QuantilePair {
    ImageTensor lo;
    ImageTensor hi;
    double alpha = 0.1;
};

/// Per-voxel integer class labels in {0, ..., k_classes-1}.
/// Class 0 is background/body by convention.
struct SegmentationMap {
    std::vector<std::size_t> shape;
    std::vector<std::uint16_t> labels;
    int k_classes = 1;
};

/// One observation: ground truth, its heuristic quantile pair, and the
/// segmentation of the prediction, all on one voxel grid.
struct CalibrationSample {
    std::string id;
    ImageTensor x;
    QuantilePair q;
    SegmentationMap seg;

    std::size_t voxel_count() const { return x.size(); }
};

struct SampleSet {
    std::vector<CalibrationSample> samples;
    int k_classes = 1;
    std::vector<std::string> class_names;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// Three-way split sizes for optimization / calibration / test.
struct SplitPlan {
    std::size_t n_opt = 0;
    std::size_t n_cal = 0;
    std::size_t n_test = 0;
    std::uint64_t seed = 0;
};

struct SplitResult {
    SampleSet opt;
    SampleSet cal;
    SampleSet test;
};

/// Validates all sample invariants; throws validation_error with the sample id
/// and offending voxel index on failure.
void validate_sample(const CalibrationSample& s, int k_classes);

/// Seeded, deterministic, disjoint split. Throws on infeasible counts.
SplitResult split(const SampleSet& set, const SplitPlan& plan);

}  // namespace semcrc
