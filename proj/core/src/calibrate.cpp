#include "semcrc/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace semcrc {

using nlohmann::json;

std::string method_name(Method m) {
    switch (m) {
        case Method::CRC: return "crc";
        case Method::KCRC: return "kcrc";
        case Method::SemCRC: return "semcrc";
        case Method::SembarCRC: return "sembarcrc";
    }
    return "crc";
}

Method method_from_name(const std::string& name) {
    if (name == "crc") return Method::CRC;
    if (name == "kcrc") return Method::KCRC;
    if (name == "semcrc") return Method::SemCRC;
    if (name == "sembarcrc") return Method::SembarCRC;
    throw validation_error("unknown method: " + name);
}

namespace {

struct Event {
    double threshold;  // smallest search-parameter value covering this voxel
    double weight;
};

struct SearchOutcome {
    double param;           // infimum search parameter (>= floor)
    double risk_at_param;   // weighted miscoverage at param
    std::vector<std::pair<double, double>> trace;
};

double adjusted_threshold(double epsilon, std::size_t n) {
    // (n/(n+1)) l + 1/(n+1) <= eps  <=>  l <= (eps (n+1) - 1)/n
    double t = (epsilon * (static_cast<double>(n) + 1.0) - 1.0) / static_cast<double>(n);
    if (t < 0.0)
        throw validation_error("epsilon <= 1/(n_cal+1) unattainable (epsilon=" +
                               std::to_string(epsilon) + ", n=" + std::to_string(n) + ")");
    return t;
}

// Infimum search parameter w >= floor_param such that the total weight of
// events with threshold > w is <= max_risk. Risk is a right-continuous,
// non-increasing step function of w; the infimum sits at floor_param or at an
// event threshold.
SearchOutcome jump_search(std::vector<Event>& events, double max_risk, double floor_param,
                          std::size_t n_cal, double epsilon) {
    std::sort(events.begin(), events.end(),
              [](const Event& a, const Event& b) { return a.threshold < b.threshold; });
    std::size_t m = events.size();
    std::vector<double> suffix(m + 1, 0.0);
    for (std::size_t i = m; i-- > 0;) suffix[i] = suffix[i + 1] + events[i].weight;

    auto risk_at = [&](double w) {
        auto it = std::upper_bound(events.begin(), events.end(), w,
                                   [](double v, const Event& e) { return v < e.threshold; });
        return suffix[static_cast<std::size_t>(it - events.begin())];
    };

    SearchOutcome out;
    auto record = [&](double w, double risk) {
        double adj = (static_cast<double>(n_cal) / (n_cal + 1.0)) * risk + 1.0 / (n_cal + 1.0);
        out.trace.push_back({w, adj});
    };

    if (risk_at(floor_param) <= max_risk) {
        out.param = floor_param;
        out.risk_at_param = risk_at(floor_param);
        record(out.param, out.risk_at_param);
        (void)epsilon;
        return out;
    }

    // scan unique thresholds above the floor, ascending
    std::size_t start =
        static_cast<std::size_t>(std::upper_bound(events.begin(), events.end(), floor_param,
                                                  [](double v, const Event& e) {
                                                      return v < e.threshold;
                                                  }) -
                                 events.begin());
    std::size_t trace_stride = std::max<std::size_t>(1, (m - start) / 256);
    double param = events.back().threshold;
    double risk = 0.0;
    for (std::size_t i = start; i < m; ++i) {
        // last index of the tie group
        std::size_t j = i;
        while (j + 1 < m && events[j + 1].threshold == events[i].threshold) ++j;
        double r = suffix[j + 1];  // weight strictly above this threshold
        if ((i - start) % trace_stride == 0) record(events[i].threshold, r);
        if (r <= max_risk) {
            param = events[i].threshold;
            risk = r;
            break;
        }
        i = j;
    }
    out.param = param;
    out.risk_at_param = risk;
    record(param, risk);
    return out;
}

// Builds backtracking events for the family clamp+(anchor + omega 1):
// a voxel with r <= 0 is covered for every omega; otherwise it is covered
// iff omega >= r - anchor_g.
std::vector<Event> backtracking_events(const SampleSet& cal, const PartitionSpec& part,
                                       const LambdaVector& anchor) {
    std::vector<Event> events;
    std::size_t n = cal.size();
    for (const auto& s : cal.samples) {
        std::size_t d = s.voxel_count();
        double w = 1.0 / (static_cast<double>(n) * static_cast<double>(d));
        for (std::size_t j = 0; j < d; ++j) {
            double x = s.x.values[j];
            double r = std::max(s.q.lo.values[j] - x, x - s.q.hi.values[j]);
            if (r <= 0.0) continue;
            int g = group_of(s, part, j);
            events.push_back({r - anchor[static_cast<std::size_t>(g)], w});
        }
    }
    return events;
}

CalibrationResult backtrack(const SampleSet& cal, const PartitionSpec& part,
                            const LambdaVector& anchor, double epsilon, Method mode) {
    if (cal.empty()) throw validation_error("empty calibration set");
    if (anchor.k() != part.k && part.kind != PartitionKind::Scalar)
        throw validation_error("anchor length != partition group count");
    std::size_t n = cal.size();
    double max_risk = adjusted_threshold(epsilon, n);

    auto events = backtracking_events(cal, part, anchor);
    double floor_omega = 0.0;
    for (double v : anchor.values) floor_omega = std::min(floor_omega, -v);

    auto out = jump_search(events, max_risk, floor_omega, n, epsilon);

    CalibrationResult res;
    res.mode = mode;
    res.epsilon = epsilon;
    res.n_cal = n;
    res.omega_hat = out.param;
    res.lambda_hat.values.resize(static_cast<std::size_t>(anchor.k()));
    for (std::size_t g = 0; g < res.lambda_hat.values.size(); ++g)
        res.lambda_hat.values[g] = std::max(0.0, anchor[g] + out.param);
    res.empirical_cal_risk = mean_loss01(cal, res.lambda_hat, part);
    res.trace = std::move(out.trace);
    return res;
}

}  // namespace

CalibrationResult calibrate_scalar(const SampleSet& cal, double epsilon) {
    auto res = backtrack(cal, PartitionSpec::scalar(), LambdaVector::scalar(0.0), epsilon,
                         Method::CRC);
    res.omega_hat = 0.0;
    return res;
}

CalibrationResult calibrate_kcrc(const SampleSet& cal, const PartitionSpec& part,
                                 const LambdaVector& anchor, double epsilon) {
    if (part.kind != PartitionKind::Fixed)
        throw validation_error("calibrate_kcrc requires a fixed partition");
    return backtrack(cal, part, anchor, epsilon, Method::KCRC);
}

CalibrationResult calibrate_semcrc(const SampleSet& cal, const LambdaVector& anchor,
                                   double epsilon) {
    if (anchor.k() != cal.k_classes) throw validation_error("anchor length != k_classes");
    return backtrack(cal, PartitionSpec::semantic(cal.k_classes), anchor, epsilon, Method::SemCRC);
}

CalibrationResult calibrate_sembar(const SampleSet& cal, const LambdaVector& anchor,
                                   double epsilon) {
    if (cal.empty()) throw validation_error("empty calibration set");
    int K = cal.k_classes;
    if (anchor.k() != K) throw validation_error("anchor length != k_classes");

    CalibrationResult res;
    res.mode = Method::SembarCRC;
    res.epsilon = epsilon;
    res.n_cal = cal.size();
    res.lambda_hat.values.assign(static_cast<std::size_t>(K), 0.0);
    res.per_organ_risk.assign(static_cast<std::size_t>(K),
                              std::numeric_limits<double>::quiet_NaN());
    res.effective_n.assign(static_cast<std::size_t>(K), 0);
    res.uncalibrated.assign(static_cast<std::size_t>(K), false);

    double max_residual = 0.0;

    // per-organ voxel pools: (residual, organ size within its sample)
    std::vector<std::vector<std::pair<double, std::size_t>>> pools(static_cast<std::size_t>(K));
    std::vector<std::vector<std::size_t>> organ_sizes(static_cast<std::size_t>(K));
    for (const auto& s : cal.samples) {
        std::vector<std::size_t> count(static_cast<std::size_t>(K), 0);
        for (auto g : s.seg.labels) ++count[g];
        std::size_t d = s.voxel_count();
        for (std::size_t j = 0; j < d; ++j) {
            double x = s.x.values[j];
            double r = std::max(s.q.lo.values[j] - x, x - s.q.hi.values[j]);
            max_residual = std::max(max_residual, r);
            std::size_t g = s.seg.labels[j];
            pools[g].push_back({r, count[g]});
        }
        for (std::size_t g = 0; g < count.size(); ++g)
            if (count[g] > 0) organ_sizes[g].push_back(count[g]);
    }

    for (std::size_t g = 0; g < static_cast<std::size_t>(K); ++g) {
        std::size_t n_eff = organ_sizes[g].size();
        res.effective_n[g] = n_eff;
        if (n_eff == 0) {
            // organ never observed: conservative fallback, flagged
            res.uncalibrated[g] = true;
            res.lambda_hat.values[g] = std::max(0.0, max_residual);
            continue;
        }
        double max_risk = adjusted_threshold(epsilon, n_eff);
        std::vector<Event> events;
        events.reserve(pools[g].size());
        double base = anchor[g];
        for (auto [r, organ_d] : pools[g]) {
            double c = r - base;
            if (c <= 0.0) continue;  // covered at lambda = 0 already
            events.push_back({c, 1.0 / (static_cast<double>(n_eff) * static_cast<double>(organ_d))});
        }
        auto out = jump_search(events, max_risk, 0.0, n_eff, epsilon);
        res.lambda_hat.values[g] = base + out.param;
        res.per_organ_risk[g] = out.risk_at_param;
    }

    // overall cumulative risk at the per-organ lambda, for reporting
    res.empirical_cal_risk =
        mean_loss01(cal, res.lambda_hat, PartitionSpec::semantic(K));
    return res;
}

QuantilePair apply(const CalibrationSample& sample, const CalibrationResult& result,
                   const PartitionSpec& part) {
    QuantilePair out = sample.q;
    std::size_t d = sample.voxel_count();
    for (std::size_t j = 0; j < d; ++j) {
        double l = result.lambda_hat[static_cast<std::size_t>(group_of(sample, part, j))];
        out.lo.values[j] = static_cast<float>(out.lo.values[j] - l);
        out.hi.values[j] = static_cast<float>(out.hi.values[j] + l);
    }
    return out;
}

void save_result(const CalibrationResult& r, const std::filesystem::path& path,
                 const std::vector<std::string>& class_names) {
    json j;
    j["mode"] = method_name(r.mode);
    j["epsilon"] = r.epsilon;
    j["n_cal"] = r.n_cal;
    j["lambda_hat"] = r.lambda_hat.values;
    j["omega_hat"] = r.omega_hat;
    j["empirical_cal_risk"] = r.empirical_cal_risk;
    if (r.mode == Method::SembarCRC) {
        json risks = json::array();
        for (double v : r.per_organ_risk)
            risks.push_back(std::isnan(v) ? json(nullptr) : json(v));
        j["per_organ_risk"] = risks;
        j["effective_n"] = r.effective_n;
        j["uncalibrated"] = r.uncalibrated;
    }
    if (!class_names.empty()) {
        // lambda legend sorted by inflation, most uncertain structure first
        std::vector<std::size_t> order(r.lambda_hat.values.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return r.lambda_hat[a] > r.lambda_hat[b];
        });
        json legend = json::array();
        for (auto i : order)
            if (i < class_names.size())
                legend.push_back({{"class", class_names[i]}, {"lambda", r.lambda_hat[i]}});
        j["lambda_legend"] = legend;
    }
    json trace = json::array();
    for (auto [p, adj] : r.trace) trace.push_back({p, adj});
    j["trace"] = trace;
    std::ofstream f(path);
    f << j.dump(2) << "\n";
}

CalibrationResult load_result(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw validation_error("cannot open result file: " + path.string());
    json j;
    f >> j;
    CalibrationResult r;
    r.mode = method_from_name(j.at("mode").get<std::string>());
    r.epsilon = j.at("epsilon").get<double>();
    r.n_cal = j.at("n_cal").get<std::size_t>();
    r.lambda_hat.values = j.at("lambda_hat").get<std::vector<double>>();
    r.omega_hat = j.at("omega_hat").get<double>();
    r.empirical_cal_risk = j.at("empirical_cal_risk").get<double>();
    if (j.contains("per_organ_risk")) {
        for (const auto& v : j.at("per_organ_risk"))
            r.per_organ_risk.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                   : v.get<double>());
        r.effective_n = j.at("effective_n").get<std::vector<std::size_t>>();
        r.uncalibrated = j.at("uncalibrated").get<std::vector<bool>>();
    }
    return r;
}

}  // namespace semcrc
