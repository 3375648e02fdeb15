#include "semcrc/manifest.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "semcrc/npy.hpp"

namespace semcrc {

using nlohmann::json;

namespace {

ImageTensor load_image(const std::filesystem::path& p) {
    ImageTensor t;
    npy::load_f32(p, t.shape, t.values);
    return t;
}

}  // namespace

void save_tensor(const ImageTensor& t, const std::filesystem::path& path) {
    npy::save_f32(path, t.shape, t.values);
}

ImageTensor load_tensor(const std::filesystem::path& path) { return load_image(path); }

void validate_sample(const CalibrationSample& s, int k_classes) {
    const auto& shape = s.x.shape;
    if (ImageTensor::shape_product(shape) != s.x.size())
        throw validation_error("sample " + s.id + ": shape/value count mismatch");
    if (!s.q.lo.shape_matches(shape) || !s.q.hi.shape_matches(shape))
        throw validation_error("sample " + s.id + ": quantile shape mismatch");
    if (s.seg.shape != shape)
        throw validation_error("sample " + s.id + ": segmentation shape mismatch");
    for (std::size_t j = 0; j < s.x.size(); ++j) {
        float v = s.x.values[j];
        if (!(v >= 0.0f && v <= 1.0f))
            throw validation_error("sample " + s.id + ": ground-truth value " + std::to_string(v) +
                                   " outside [0,1] at voxel " + std::to_string(j));
        if (!std::isfinite(s.q.lo.values[j]) || !std::isfinite(s.q.hi.values[j]))
            throw validation_error("sample " + s.id + ": non-finite quantile at voxel " +
                                   std::to_string(j));
        if (static_cast<int>(s.seg.labels[j]) >= k_classes)
            throw validation_error("sample " + s.id + ": label out of range (" +
                                   std::to_string(s.seg.labels[j]) + " >= " +
                                   std::to_string(k_classes) + ") at voxel " + std::to_string(j));
    }
}

SampleSet load_sample_set(const std::filesystem::path& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw validation_error("cannot open manifest: " + manifest_path.string());
    json m;
    try {
        f >> m;
    } catch (const json::parse_error& e) {
        throw validation_error("malformed manifest JSON: " + std::string(e.what()));
    }
    if (!m.contains("k_classes") || !m.contains("samples"))
        throw validation_error("manifest missing k_classes or samples");

    SampleSet set;
    set.k_classes = m.at("k_classes").get<int>();
    if (set.k_classes < 1) throw validation_error("k_classes must be >= 1");
    if (m.contains("class_names")) set.class_names = m.at("class_names").get<std::vector<std::string>>();
    if (!set.class_names.empty() && static_cast<int>(set.class_names.size()) != set.k_classes)
        throw validation_error("class_names length != k_classes");

    auto base = manifest_path.parent_path();
    for (const auto& entry : m.at("samples")) {
        CalibrationSample s;
        s.id = entry.at("id").get<std::string>();
        s.x = load_image(base / entry.at("x").get<std::string>());
        s.q.lo = load_image(base / entry.at("q_lo").get<std::string>());
        s.q.hi = load_image(base / entry.at("q_hi").get<std::string>());
        if (entry.contains("alpha")) s.q.alpha = entry.at("alpha").get<double>();
        npy::load_u16(base / entry.at("seg").get<std::string>(), s.seg.shape, s.seg.labels);
        s.seg.k_classes = set.k_classes;
        validate_sample(s, set.k_classes);
        set.samples.push_back(std::move(s));
    }
    return set;
}

void save_sample_set(const SampleSet& set, const std::filesystem::path& dir,
                     const std::string& manifest_name) {
    std::filesystem::create_directories(dir);
    json m;
    m["k_classes"] = set.k_classes;
    if (!set.class_names.empty()) m["class_names"] = set.class_names;
    m["samples"] = json::array();
    for (const auto& s : set.samples) {
        std::string stem = s.id;
        npy::save_f32(dir / (stem + "_x.npy"), s.x.shape, s.x.values);
        npy::save_f32(dir / (stem + "_qlo.npy"), s.q.lo.shape, s.q.lo.values);
        npy::save_f32(dir / (stem + "_qhi.npy"), s.q.hi.shape, s.q.hi.values);
        npy::save_u16(dir / (stem + "_seg.npy"), s.seg.shape, s.seg.labels);
        m["samples"].push_back({{"id", s.id},
                                {"x", stem + "_x.npy"},
                                {"q_lo", stem + "_qlo.npy"},
                                {"q_hi", stem + "_qhi.npy"},
                                {"seg", stem + "_seg.npy"},
                                {"alpha", s.q.alpha}});
    }
    std::ofstream out(dir / manifest_name);
    out << m.dump(2) << "\n";
}

}  // namespace semcrc
