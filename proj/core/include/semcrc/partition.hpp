#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semcrc/tensor.hpp"

namespace semcrc {

enum class PartitionKind { Scalar, Fixed, Semantic };

/// Group-membership rule for the inflation parameters.
///  - Scalar: one group for all voxels.
///  - Fixed: a stored voxel->group map on one canonical shape.
///  - Semantic: groups are read per-sample from seg.labels.
struct PartitionSpec {
    PartitionKind kind = PartitionKind::Scalar;
    int k = 1;
    std::vector<std::size_t> canonical_shape;  // Fixed only
    std::vector<std::uint16_t> map;            // Fixed only, flat row-major

    static PartitionSpec scalar() { return {}; }
    static PartitionSpec semantic(int k_classes) {
        PartitionSpec p;
        p.kind = PartitionKind::Semantic;
        p.k = k_classes;
        return p;
    }
    static PartitionSpec fixed(std::vector<std::size_t> shape, std::vector<std::uint16_t> map, int k);
};

/// Per-voxel group index for a sample under the given spec.
/// Scalar -> all zeros; Fixed -> the stored map (shape must match the
/// canonical shape); Semantic -> seg.labels verbatim.
std::vector<std::uint16_t> memberships(const CalibrationSample& sample, const PartitionSpec& part);

/// Returns the group index of voxel j without materializing the full map.
inline int group_of(const CalibrationSample& sample, const PartitionSpec& part, std::size_t j) {
    switch (part.kind) {
        case PartitionKind::Scalar: return 0;
        case PartitionKind::Fixed: return part.map[j];
        case PartitionKind::Semantic: return sample.seg.labels[j];
    }
    return 0;
}

/// Builds the fixed K-group partition by binning voxels into equal-mass
/// quantiles of the per-voxel mean miscoverage indicator at lambda =
/// base_lambda across opt_set. Requires all samples to share one shape.
/// Bin 0 holds the lowest-loss voxels; ties break by voxel index.
PartitionSpec build_loss_quantile_partition(const SampleSet& opt_set, int k,
                                            double base_lambda = 0.0);

/// JSON sidecar for reproducibility.
void save_partition(const PartitionSpec& part, const std::filesystem::path& path);
PartitionSpec load_partition(const std::filesystem::path& path);

}  // namespace semcrc
