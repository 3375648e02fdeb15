#include "semcrc/tensor.hpp"

#include <algorithm>
#include <random>

namespace semcrc {

SplitResult split(const SampleSet& set, const SplitPlan& plan) {
    std::size_t need = plan.n_opt + plan.n_cal + plan.n_test;
    if (need > set.size())
        throw validation_error("split plan needs " + std::to_string(need) + " samples, set has " +
                               std::to_string(set.size()));

    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(plan.seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    SplitResult r;
    for (SampleSet* s : {&r.opt, &r.cal, &r.test}) {
        s->k_classes = set.k_classes;
        s->class_names = set.class_names;
    }
    std::size_t pos = 0;
    for (std::size_t i = 0; i < plan.n_opt; ++i) r.opt.samples.push_back(set.samples[idx[pos++]]);
    for (std::size_t i = 0; i < plan.n_cal; ++i) r.cal.samples.push_back(set.samples[idx[pos++]]);
    for (std::size_t i = 0; i < plan.n_test; ++i) r.test.samples.push_back(set.samples[idx[pos++]]);
    return r;
}

}  // namespace semcrc
