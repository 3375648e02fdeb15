#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semcrc/tensor.hpp"

namespace semcrc {

/// One synthetic organ: an ellipse with jittered center/axes, its own noise
/// scale and quantile miscalibration factor. Organs are drawn in index order;
/// later organs win overlapping voxels.
struct OrganSpec {
    std::string name = "organ";
    double center_row_min = 0.3, center_row_max = 0.7;  // fractions of image height
    double center_col_min = 0.3, center_col_max = 0.7;
    double axis_row_min = 0.1, axis_row_max = 0.2;  // fractions of image height
    double axis_col_min = 0.1, axis_col_max = 0.2;
    double intensity_min = 0.3, intensity_max = 0.7;
    double sigma = 0.05;   // per-voxel Gaussian noise scale
    double miscal = 1.0;   // emitted quantile band = true band * miscal
};

struct PhantomConfig {
    std::size_t height = 64, width = 64;
    double background_intensity = 0.35;
    double background_sigma = 0.01;
    double background_miscal = 1.0;
    double alpha = 0.1;  // quantile level of the emitted bands
    std::vector<OrganSpec> organs;
    std::uint64_t seed = 0;

    int k_classes() const { return static_cast<int>(organs.size()) + 1; }
    std::vector<std::string> class_names() const;
};

/// The default heterogeneous scenario: 64x64, 3 organs + background, distinct
/// noise scales, positional jitter, mild miscalibration.
PhantomConfig default_phantom();

/// Deterministic phantom sampler. x = clean + clipped Gaussian noise in [0,1];
/// quantiles are the analytic pre-clipping bands scaled by miscal; seg is the
/// true organ label map.
SampleSet generate(const PhantomConfig& config, std::size_t n);

PhantomConfig load_phantom_config(const std::filesystem::path& path);
void save_phantom_config(const PhantomConfig& config, const std::filesystem::path& path);

// JSON conversion (nlohmann ADL hooks)
void to_json(nlohmann::json& j, const PhantomConfig& c);
void from_json(const nlohmann::json& j, PhantomConfig& c);

}  // namespace semcrc
