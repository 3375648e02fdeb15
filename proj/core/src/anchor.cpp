#include "semcrc/anchor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace semcrc {

namespace {

// Allocates per-group draw counts for one sample: proportional to the group
// histogram, floored at min(d_min, n_g) for present groups, summing to d_opt
// (or to the voxel count when the sample is smaller than d_opt).
std::vector<std::size_t> allocate_counts(const std::vector<std::size_t>& n_g, std::size_t d_opt,
                                         std::size_t d_min) {
    std::size_t k = n_g.size();
    std::size_t d = std::accumulate(n_g.begin(), n_g.end(), std::size_t{0});
    std::size_t total = std::min(d_opt, d);

    std::vector<std::size_t> c(k, 0), floor_g(k, 0);
    std::vector<double> frac(k, 0.0);
    for (std::size_t g = 0; g < k; ++g) {
        if (n_g[g] == 0) continue;
        floor_g[g] = std::min(d_min, n_g[g]);
        double ideal = static_cast<double>(total) * static_cast<double>(n_g[g]) / static_cast<double>(d);
        c[g] = static_cast<std::size_t>(ideal);
        frac[g] = ideal - static_cast<double>(c[g]);
    }
    std::size_t sum = std::accumulate(c.begin(), c.end(), std::size_t{0});
    // largest-remainder rounding
    while (sum < total) {
        std::size_t best = k;
        for (std::size_t g = 0; g < k; ++g)
            if (n_g[g] > 0 && c[g] < n_g[g] && (best == k || frac[g] > frac[best])) best = g;
        if (best == k) break;
        ++c[best];
        frac[best] = -1.0;
        ++sum;
    }
    // enforce floors
    for (std::size_t g = 0; g < k; ++g)
        if (c[g] < floor_g[g]) {
            sum += floor_g[g] - c[g];
            c[g] = floor_g[g];
        }
    while (sum > total) {
        std::size_t best = k;
        for (std::size_t g = 0; g < k; ++g)
            if (c[g] > floor_g[g] && (best == k || c[g] > c[best])) best = g;
        if (best == k) break;
        --c[best];
        --sum;
    }
    for (std::size_t g = 0; g < k; ++g) c[g] = std::min(c[g], n_g[g]);
    return c;
}

}  // namespace

std::size_t semantic_d_opt(const SampleSet& opt_set, std::size_t d_min) {
    auto w = group_weights(opt_set, PartitionSpec::semantic(opt_set.k_classes));
    double mean_d = 0.0;
    for (const auto& s : opt_set.samples) mean_d += static_cast<double>(s.voxel_count());
    mean_d /= static_cast<double>(opt_set.size());
    double min_frac = 1.0;
    for (double c : w.counts)
        if (c > 0.0) min_frac = std::min(min_frac, c / mean_d);
    return static_cast<std::size_t>(std::ceil(static_cast<double>(d_min) / min_frac));
}

AnchorProblem subsample(const SampleSet& opt_set, const PartitionSpec& part, std::size_t d_opt,
                        std::size_t d_min, std::uint64_t seed, double epsilon, double gamma) {
    if (opt_set.empty()) throw validation_error("subsample on empty set");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw validation_error("epsilon must be in (0,1)");
    if (!(gamma > 0.0 && gamma < 1.0)) throw validation_error("gamma must be in (0,1)");

    AnchorProblem p;
    p.k = part.k;
    p.epsilon = epsilon;
    p.gamma = gamma;
    p.weights = group_weights(opt_set, part);

    std::mt19937_64 rng(seed);
    std::size_t n_samples = opt_set.size();
    std::size_t k = static_cast<std::size_t>(part.k);

    for (const auto& s : opt_set.samples) {
        auto member = memberships(s, part);
        auto r = residuals(s);
        std::size_t d = s.voxel_count();

        std::vector<std::vector<std::size_t>> by_group(k);
        for (std::size_t j = 0; j < d; ++j) by_group[member[j]].push_back(j);
        std::vector<std::size_t> n_g(k);
        for (std::size_t g = 0; g < k; ++g) n_g[g] = by_group[g].size();

        auto counts = allocate_counts(n_g, d_opt, d_min);
        for (std::size_t g = 0; g < k; ++g) {
            if (counts[g] == 0) continue;
            auto& pool = by_group[g];
            // partial Fisher-Yates: draw counts[g] voxels without replacement
            for (std::size_t i = 0; i < counts[g]; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
                std::swap(pool[i], pool[pick(rng)]);
            }
            double w_row = static_cast<double>(n_g[g]) /
                           (static_cast<double>(d) * static_cast<double>(counts[g]) *
                            static_cast<double>(n_samples));
            for (std::size_t i = 0; i < counts[g]; ++i)
                p.rows.push_back({r[pool[i]], static_cast<int>(g), w_row});
        }
    }

    std::vector<std::size_t> row_count(k, 0);
    for (const auto& row : p.rows) ++row_count[static_cast<std::size_t>(row.group)];
    for (std::size_t g = 0; g < k; ++g)
        if (p.weights.counts[g] > 0.0 && row_count[g] == 0)
            throw validation_error("group " + std::to_string(g) +
                                   " has positive weight but no voxels in any sample");
    return p;
}

double problem_surrogate(const AnchorProblem& p, const LambdaVector& lam) {
    double acc = 0.0;
    for (const auto& row : p.rows) {
        double t = row.residual - lam[static_cast<std::size_t>(row.group)];
        acc += row.weight * std::max(0.0, 1.0 + t / p.gamma);
    }
    return acc;
}

namespace {

// One group's share of the surrogate as a piecewise-linear function of its
// lambda: breakpoints at residual + gamma, sorted ascending, with suffix
// weight sums.
struct GroupCurve {
    std::vector<double> breakpoints;   // sorted r_i + gamma
    std::vector<double> suffix_weight; // suffix_weight[i] = sum of weights with breakpoint > breakpoints[i]... see eval
    std::vector<double> row_weight;    // aligned with breakpoints
    double gamma = 0.1;

    // total weight of rows whose hinge is still active at lambda (breakpoint > lambda)
    double tail_weight(double lam) const {
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), lam);
        std::size_t idx = static_cast<std::size_t>(it - breakpoints.begin());
        return idx < breakpoints.size() ? suffix_weight[idx] : 0.0;
    }

};

}  // namespace

AnchorSolution solve_anchor(const AnchorProblem& p) {
    std::size_t k = static_cast<std::size_t>(p.k);
    if (static_cast<std::size_t>(p.weights.counts.size()) != k)
        throw validation_error("weights size mismatch");
    for (double w : p.weights.counts)
        if (w < 0.0) throw validation_error("negative group weight");
    if (!(p.epsilon > 0.0)) throw validation_error("epsilon must be positive");

    // Groups eligible for inflation: positive weight and at least one row.
    std::vector<GroupCurve> curve(k);
    std::vector<std::vector<double>> weighted_bp_suffix(k);
    std::vector<bool> active(k, false);
    double fixed_part = 0.0;  // surrogate contribution of rows in non-inflatable groups at lambda=0
    {
        std::vector<std::vector<std::pair<double, double>>> rows_by_group(k);
        for (const auto& row : p.rows)
            rows_by_group[static_cast<std::size_t>(row.group)].push_back({row.residual, row.weight});
        for (std::size_t g = 0; g < k; ++g) {
            bool inflatable = p.weights.counts[g] > 0.0 && !rows_by_group[g].empty();
            if (!inflatable) {
                for (auto [r, w] : rows_by_group[g]) fixed_part += w * std::max(0.0, 1.0 + r / p.gamma);
                continue;
            }
            active[g] = true;
            auto& rows = rows_by_group[g];
            std::sort(rows.begin(), rows.end());
            auto& c = curve[g];
            c.gamma = p.gamma;
            c.breakpoints.resize(rows.size());
            c.row_weight.resize(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                c.breakpoints[i] = rows[i].first + p.gamma;
                c.row_weight[i] = rows[i].second;
            }
            c.suffix_weight.assign(rows.size() + 1, 0.0);
            weighted_bp_suffix[g].assign(rows.size() + 1, 0.0);
            for (std::size_t i = rows.size(); i-- > 0;) {
                c.suffix_weight[i] = c.suffix_weight[i + 1] + c.row_weight[i];
                weighted_bp_suffix[g][i] = weighted_bp_suffix[g][i + 1] + c.row_weight[i] * c.breakpoints[i];
            }
            c.suffix_weight.pop_back();  // align with breakpoints; tail at end handled above
            weighted_bp_suffix[g].pop_back();
        }
    }

    auto group_value = [&](std::size_t g, double lam) -> double {
        const auto& c = curve[g];
        auto it = std::upper_bound(c.breakpoints.begin(), c.breakpoints.end(), lam);
        std::size_t idx = static_cast<std::size_t>(it - c.breakpoints.begin());
        if (idx >= c.breakpoints.size()) return 0.0;
        return (weighted_bp_suffix[g][idx] - lam * c.suffix_weight[idx]) / p.gamma;
    };
    auto total_value = [&](const std::vector<double>& lam) {
        double v = fixed_part;
        for (std::size_t g = 0; g < k; ++g)
            if (active[g]) v += group_value(g, lam[g]);
        return v;
    };

    AnchorSolution sol;
    sol.lambda_tilde.values.assign(k, 0.0);

    std::vector<double> zero(k, 0.0);
    double at_zero = total_value(zero);
    if (at_zero <= p.epsilon) {
        sol.achieved_surrogate = at_zero;
        sol.feasible = true;
        return sol;
    }

    // Lagrangian: for multiplier mu, each active group's best lambda is the
    // smallest point where mu/gamma * tail_weight(lambda) <= w_g.
    auto lambda_of_mu = [&](double mu, std::vector<double>& lam) {
        for (std::size_t g = 0; g < k; ++g) {
            if (!active[g]) {
                lam[g] = 0.0;
                continue;
            }
            const auto& c = curve[g];
            double budget = p.weights.counts[g] * p.gamma / mu;
            if (c.tail_weight(0.0) <= budget) {
                lam[g] = 0.0;
                continue;
            }
            // smallest breakpoint b with tail_weight(b) <= budget
            std::size_t lo = 0, hi = c.breakpoints.size() - 1;
            while (lo < hi) {
                std::size_t mid = (lo + hi) / 2;
                // tail weight just above breakpoints[mid]
                double tw = mid + 1 < c.breakpoints.size() ? c.suffix_weight[mid + 1] : 0.0;
                if (tw <= budget)
                    hi = mid;
                else
                    lo = mid + 1;
            }
            lam[g] = std::max(0.0, c.breakpoints[lo]);
        }
    };

    std::vector<double> lam_hi(k, 0.0), lam_lo(k, 0.0), lam_try(k, 0.0);
    double mu_lo = 0.0, mu_hi = 1.0;
    int iters = 0;
    lambda_of_mu(mu_hi, lam_hi);
    while (total_value(lam_hi) > p.epsilon && iters < 200) {
        mu_lo = mu_hi;
        mu_hi *= 4.0;
        lambda_of_mu(mu_hi, lam_hi);
        ++iters;
    }
    if (total_value(lam_hi) > p.epsilon)
        throw std::runtime_error("anchor solve: could not bracket the multiplier");

    for (int it = 0; it < 200; ++it) {
        double mu = 0.5 * (mu_lo + mu_hi);
        lambda_of_mu(mu, lam_try);
        if (total_value(lam_try) <= p.epsilon) {
            mu_hi = mu;
            lam_hi = lam_try;
        } else {
            mu_lo = mu;
            lam_lo = lam_try;
        }
        ++iters;
    }

    // Polish along the segment between the infeasible and feasible iterates:
    // largest step toward lam_lo that stays feasible. lam_lo starts at the
    // zero vector, which is infeasible here.
    {
        double t_lo = 0.0, t_hi = 1.0;  // t=0 -> lam_hi (feasible)
        for (int it = 0; it < 100; ++it) {
            double t = 0.5 * (t_lo + t_hi);
            for (std::size_t g = 0; g < k; ++g)
                lam_try[g] = (1.0 - t) * lam_hi[g] + t * lam_lo[g];
            if (total_value(lam_try) <= p.epsilon)
                t_lo = t;
            else
                t_hi = t;
            ++iters;
        }
        for (std::size_t g = 0; g < k; ++g) lam_hi[g] = (1.0 - t_lo) * lam_hi[g] + t_lo * lam_lo[g];
    }

    sol.lambda_tilde.values = lam_hi;
    sol.achieved_surrogate = total_value(lam_hi);
    sol.solver_iterations = iters;
    sol.feasible = sol.achieved_surrogate <= p.epsilon + 1e-6;
    return sol;
}

}  // namespace semcrc
