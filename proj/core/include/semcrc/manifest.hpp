#pragma once

#include <filesystem>

#include "semcrc/tensor.hpp"

namespace semcrc {

/// Loads a sample set from a JSON manifest. Paths in the manifest resolve
/// relative to the manifest's directory. All invariants are validated here;
/// throws validation_error with the sample id and voxel index on failure.
SampleSet load_sample_set(const std::filesystem::path& manifest_path);

/// Writes a set back out as tensors + manifest under `dir` (for inspection
/// and round-trip tests of synthetic data).
void save_sample_set(const SampleSet& set, const std::filesystem::path& dir,
                     const std::string& manifest_name = "manifest.json");

void save_tensor(const ImageTensor& t, const std::filesystem::path& path);
ImageTensor load_tensor(const std::filesystem::path& path);

}  // namespace semcrc
