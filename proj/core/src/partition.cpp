#include "semcrc/partition.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace semcrc {

using nlohmann::json;

PartitionSpec PartitionSpec::fixed(std::vector<std::size_t> shape, std::vector<std::uint16_t> map,
                                   int k) {
    PartitionSpec p;
    p.kind = PartitionKind::Fixed;
    p.k = k;
    p.canonical_shape = std::move(shape);
    p.map = std::move(map);
    if (ImageTensor::shape_product(p.canonical_shape) != p.map.size())
        throw validation_error("fixed partition map size does not match canonical shape");
    for (auto g : p.map)
        if (static_cast<int>(g) >= k) throw validation_error("partition group index out of range");
    return p;
}

std::vector<std::uint16_t> memberships(const CalibrationSample& sample, const PartitionSpec& part) {
    switch (part.kind) {
        case PartitionKind::Scalar:
            return std::vector<std::uint16_t>(sample.voxel_count(), 0);
        case PartitionKind::Fixed:
            if (sample.x.shape != part.canonical_shape)
                throw validation_error("sample " + sample.id +
                                       " shape does not match the fixed partition's canonical shape");
            return part.map;
        case PartitionKind::Semantic:
            return sample.seg.labels;
    }
    return {};
}

PartitionSpec build_loss_quantile_partition(const SampleSet& opt_set, int k, double base_lambda) {
    if (opt_set.empty()) throw validation_error("empty optimization set");
    if (k < 1) throw validation_error("k must be >= 1");
    const auto& shape = opt_set.samples.front().x.shape;
    for (const auto& s : opt_set.samples)
        if (s.x.shape != shape)
            throw validation_error("fixed partition requires all samples to share one shape");
    std::size_t d = ImageTensor::shape_product(shape);
    if (static_cast<std::size_t>(k) > d) throw validation_error("k exceeds voxel count");

    // per-voxel mean miscoverage indicator at the base lambda
    std::vector<double> voxel_loss(d, 0.0);
    for (const auto& s : opt_set.samples) {
        for (std::size_t j = 0; j < d; ++j) {
            double x = s.x.values[j];
            double r = std::max(s.q.lo.values[j] - x, x - s.q.hi.values[j]);
            if (r > base_lambda) voxel_loss[j] += 1.0;
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return voxel_loss[a] < voxel_loss[b]; });

    // equal-mass bins; the first (d mod k) bins take one extra voxel
    std::vector<std::uint16_t> map(d);
    std::size_t base = d / static_cast<std::size_t>(k);
    std::size_t extra = d % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (int g = 0; g < k; ++g) {
        std::size_t sz = base + (static_cast<std::size_t>(g) < extra ? 1 : 0);
        for (std::size_t i = 0; i < sz; ++i) map[order[pos++]] = static_cast<std::uint16_t>(g);
    }
    return PartitionSpec::fixed(shape, std::move(map), k);
}

void save_partition(const PartitionSpec& part, const std::filesystem::path& path) {
    json j;
    switch (part.kind) {
        case PartitionKind::Scalar: j["kind"] = "scalar"; break;
        case PartitionKind::Fixed: j["kind"] = "fixed"; break;
        case PartitionKind::Semantic: j["kind"] = "semantic"; break;
    }
    j["k"] = part.k;
    if (part.kind == PartitionKind::Fixed) {
        j["canonical_shape"] = part.canonical_shape;
        j["map"] = part.map;
    }
    std::ofstream f(path);
    f << j.dump() << "\n";
}

PartitionSpec load_partition(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw validation_error("cannot open partition file: " + path.string());
    json j;
    f >> j;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "scalar") return PartitionSpec::scalar();
    if (kind == "semantic") return PartitionSpec::semantic(j.at("k").get<int>());
    return PartitionSpec::fixed(j.at("canonical_shape").get<std::vector<std::size_t>>(),
                                j.at("map").get<std::vector<std::uint16_t>>(), j.at("k").get<int>());
}

}  // namespace semcrc
