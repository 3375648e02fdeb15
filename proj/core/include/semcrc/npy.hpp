#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace semcrc::npy {

// Minimal NPY v1.0 reader/writer: little-endian, C-order, dtypes <f4 and <u2.

void save_f32(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<float>& data);
void save_u16(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<std::uint16_t>& data);

void load_f32(const std::filesystem::path& path, std::vector<std::size_t>& shape,
              std::vector<float>& data);
void load_u16(const std::filesystem::path& path, std::vector<std::size_t>& shape,
              std::vector<std::uint16_t>& data);

}  // namespace semcrc::npy
