#include "semcrc/losses.hpp"

#include <algorithm>
#include <cmath>

namespace semcrc {

namespace {

void check_groups(const LambdaVector& lam, const PartitionSpec& part) {
    if (lam.k() < part.k)
        throw validation_error("lambda vector has " + std::to_string(lam.k()) +
                               " entries for a partition with " + std::to_string(part.k) + " groups");
}

}  // namespace

std::vector<double> residuals(const CalibrationSample& sample) {
    std::size_t d = sample.voxel_count();
    std::vector<double> r(d);
    for (std::size_t j = 0; j < d; ++j) {
        double x = sample.x.values[j];
        double lo = sample.q.lo.values[j];
        double hi = sample.q.hi.values[j];
        r[j] = std::max(lo - x, x - hi);
    }
    return r;
}

double loss01(const CalibrationSample& sample, const LambdaVector& lam, const PartitionSpec& part) {
    check_groups(lam, part);
    std::size_t d = sample.voxel_count();
    std::size_t miss = 0;
    for (std::size_t j = 0; j < d; ++j) {
        double x = sample.x.values[j];
        double r = std::max(sample.q.lo.values[j] - x, x - sample.q.hi.values[j]);
        if (r > lam[static_cast<std::size_t>(group_of(sample, part, j))]) ++miss;
    }
    return static_cast<double>(miss) / static_cast<double>(d);
}

std::vector<std::optional<double>> loss01_per_organ(const CalibrationSample& sample,
                                                    const LambdaVector& lam) {
    int k_classes = sample.seg.k_classes;
    if (lam.k() < k_classes) throw validation_error("lambda vector shorter than k_classes");
    std::vector<std::size_t> miss(static_cast<std::size_t>(k_classes), 0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k_classes), 0);
    std::size_t d = sample.voxel_count();
    for (std::size_t j = 0; j < d; ++j) {
        std::size_t g = sample.seg.labels[j];
        double x = sample.x.values[j];
        double r = std::max(sample.q.lo.values[j] - x, x - sample.q.hi.values[j]);
        ++count[g];
        if (r > lam[g]) ++miss[g];
    }
    std::vector<std::optional<double>> out(static_cast<std::size_t>(k_classes));
    for (std::size_t g = 0; g < out.size(); ++g)
        if (count[g] > 0) out[g] = static_cast<double>(miss[g]) / static_cast<double>(count[g]);
    return out;
}

double loss_gamma(const CalibrationSample& sample, const LambdaVector& lam,
                  const PartitionSpec& part, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw validation_error("gamma must be in (0,1)");
    check_groups(lam, part);
    std::size_t d = sample.voxel_count();
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double x = sample.x.values[j];
        double r = std::max(sample.q.lo.values[j] - x, x - sample.q.hi.values[j]);
        double t = r - lam[static_cast<std::size_t>(group_of(sample, part, j))];
        acc += std::max(0.0, 1.0 + t / gamma);
    }
    return acc / static_cast<double>(d);
}

double mean_interval_length(const CalibrationSample& sample, const LambdaVector& lam,
                            const PartitionSpec& part) {
    check_groups(lam, part);
    std::size_t d = sample.voxel_count();
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double w = static_cast<double>(sample.q.hi.values[j]) - sample.q.lo.values[j];
        double l = lam[static_cast<std::size_t>(group_of(sample, part, j))];
        acc += std::max(0.0, w + 2.0 * l);
    }
    return acc / static_cast<double>(d);
}

GroupWeights group_weights(const SampleSet& set, const PartitionSpec& part) {
    if (set.empty()) throw validation_error("group_weights on empty set");
    std::size_t k = static_cast<std::size_t>(part.k);
    GroupWeights w;
    w.counts.assign(k, 0.0);
    if (part.kind == PartitionKind::Fixed) {
        for (auto g : part.map) w.counts[g] += 1.0;
        return w;
    }
    if (part.kind == PartitionKind::Scalar) {
        // scalar: weight is the mean voxel count
        double acc = 0.0;
        for (const auto& s : set.samples) acc += static_cast<double>(s.voxel_count());
        w.counts[0] = acc / static_cast<double>(set.size());
        return w;
    }
    for (const auto& s : set.samples)
        for (auto g : s.seg.labels) w.counts[g] += 1.0;
    for (auto& c : w.counts) c /= static_cast<double>(set.size());
    return w;
}

double mean_loss01(const SampleSet& set, const LambdaVector& lam, const PartitionSpec& part) {
    double acc = 0.0;
    for (const auto& s : set.samples) acc += loss01(s, lam, part);
    return acc / static_cast<double>(set.size());
}

double mean_length(const SampleSet& set, const LambdaVector& lam, const PartitionSpec& part) {
    double acc = 0.0;
    for (const auto& s : set.samples) acc += mean_interval_length(s, lam, part);
    return acc / static_cast<double>(set.size());
}

}  // namespace semcrc
