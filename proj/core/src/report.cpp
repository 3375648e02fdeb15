#include "semcrc/report.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "semcrc/anchor.hpp"
#include "semcrc/partition.hpp"

namespace semcrc {

using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    // splitmix64 over a combined key
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream * 0x100000001b3ULL + index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for write: " + tmp.string());
        f << content;
    }
    std::filesystem::rename(tmp, path);
}

namespace {

struct StratifiedStats {
    double risk = 0.0;
    double length = 0.0;
    std::vector<double> organ_risk;
    std::vector<double> organ_length;
    std::vector<double> organ_voxels;
};

StratifiedStats stratified_eval(const SampleSet& test, const LambdaVector& lam,
                                const PartitionSpec& part) {
    std::size_t K = static_cast<std::size_t>(test.k_classes);
    StratifiedStats out;
    out.organ_risk.assign(K, 0.0);
    out.organ_length.assign(K, 0.0);
    out.organ_voxels.assign(K, 0.0);
    std::vector<std::size_t> organ_samples(K, 0);

    for (const auto& s : test.samples) {
        std::size_t d = s.voxel_count();
        std::vector<double> miss(K, 0.0), len(K, 0.0);
        std::vector<std::size_t> count(K, 0);
        double sample_miss = 0.0, sample_len = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double x = s.x.values[j];
            double r = std::max(s.q.lo.values[j] - x, x - s.q.hi.values[j]);
            double l = lam[static_cast<std::size_t>(group_of(s, part, j))];
            double width =
                std::max(0.0, static_cast<double>(s.q.hi.values[j]) - s.q.lo.values[j] + 2.0 * l);
            std::size_t organ = s.seg.labels[j];
            bool missed = r > l;
            ++count[organ];
            if (missed) miss[organ] += 1.0;
            len[organ] += width;
            if (missed) sample_miss += 1.0;
            sample_len += width;
        }
        out.risk += sample_miss / static_cast<double>(d);
        out.length += sample_len / static_cast<double>(d);
        for (std::size_t g = 0; g < K; ++g) {
            if (count[g] == 0) continue;
            out.organ_risk[g] += miss[g] / static_cast<double>(count[g]);
            out.organ_length[g] += len[g] / static_cast<double>(count[g]);
            out.organ_voxels[g] += static_cast<double>(count[g]);
            ++organ_samples[g];
        }
    }
    double n = static_cast<double>(test.size());
    out.risk /= n;
    out.length /= n;
    for (std::size_t g = 0; g < K; ++g) {
        if (organ_samples[g] == 0) {
            out.organ_risk[g] = std::numeric_limits<double>::quiet_NaN();
            out.organ_length[g] = std::numeric_limits<double>::quiet_NaN();
        } else {
            out.organ_risk[g] /= static_cast<double>(organ_samples[g]);
            out.organ_length[g] /= static_cast<double>(organ_samples[g]);
        }
    }
    return out;
}

struct TrialOutput {
    std::vector<TrialMetrics> per_method;
};

TrialOutput run_trial(const ScenarioConfig& config, std::size_t trial) {
    PhantomConfig pc = config.phantom;
    pc.seed = derive_seed(config.seed, 1, trial);
    std::size_t n_total = config.sizes.n_opt + config.sizes.n_cal + config.sizes.n_test;
    SampleSet set = generate(pc, n_total);

    SplitPlan plan = config.sizes;
    plan.seed = derive_seed(config.seed, 2, trial);
    auto sp = split(set, plan);

    std::uint64_t sub_seed = derive_seed(config.seed, 3, trial);

    // shared anchors, computed lazily
    PartitionSpec fixed_part;
    LambdaVector kcrc_anchor, sem_anchor;
    bool have_fixed = false, have_sem = false;
    auto ensure_fixed = [&]() {
        if (have_fixed) return;
        fixed_part = build_loss_quantile_partition(sp.opt, config.k_partition);
        auto prob = subsample(sp.opt, fixed_part, config.d_opt, config.d_min, sub_seed,
                              config.epsilon, config.gamma);
        kcrc_anchor = solve_anchor(prob).lambda_tilde;
        have_fixed = true;
    };
    auto ensure_sem = [&]() {
        if (have_sem) return;
        auto part = PartitionSpec::semantic(set.k_classes);
        std::size_t d_opt_sem = semantic_d_opt(sp.opt, config.d_min);
        auto prob = subsample(sp.opt, part, d_opt_sem, config.d_min, sub_seed + 1, config.epsilon,
                              config.gamma);
        sem_anchor = solve_anchor(prob).lambda_tilde;
        have_sem = true;
    };

    TrialOutput out;
    for (Method m : config.methods) {
        CalibrationResult res;
        PartitionSpec part;
        switch (m) {
            case Method::CRC:
                part = PartitionSpec::scalar();
                res = calibrate_scalar(sp.cal, config.epsilon);
                break;
            case Method::KCRC:
                ensure_fixed();
                part = fixed_part;
                res = calibrate_kcrc(sp.cal, part, kcrc_anchor, config.epsilon);
                break;
            case Method::SemCRC:
                ensure_sem();
                part = PartitionSpec::semantic(set.k_classes);
                res = calibrate_semcrc(sp.cal, sem_anchor, config.epsilon);
                break;
            case Method::SembarCRC:
                ensure_sem();
                part = PartitionSpec::semantic(set.k_classes);
                res = calibrate_sembar(sp.cal, sem_anchor, config.epsilon);
                break;
        }
        auto stats = stratified_eval(sp.test, res.lambda_hat, part);
        TrialMetrics tm;
        tm.risk = stats.risk;
        tm.length = stats.length;
        tm.organ_risk = stats.organ_risk;
        tm.organ_length = stats.organ_length;
        tm.lambda_hat = res.lambda_hat;
        out.per_method.push_back(std::move(tm));
    }
    return out;
}

void aggregate(MethodReport& mr, std::size_t k_classes) {
    std::size_t n = mr.trials.size();
    double sr = 0.0, sl = 0.0, sr2 = 0.0, sl2 = 0.0;
    mr.mean_organ_risk.assign(k_classes, 0.0);
    mr.mean_organ_length.assign(k_classes, 0.0);
    std::vector<std::size_t> organ_n(k_classes, 0);
    for (const auto& t : mr.trials) {
        sr += t.risk;
        sl += t.length;
        sr2 += t.risk * t.risk;
        sl2 += t.length * t.length;
        for (std::size_t g = 0; g < k_classes; ++g) {
            if (std::isnan(t.organ_risk[g])) continue;
            mr.mean_organ_risk[g] += t.organ_risk[g];
            mr.mean_organ_length[g] += t.organ_length[g];
            ++organ_n[g];
        }
    }
    double dn = static_cast<double>(n);
    mr.mean_risk = sr / dn;
    mr.mean_length = sl / dn;
    mr.std_risk = n > 1 ? std::sqrt(std::max(0.0, (sr2 - sr * sr / dn) / (dn - 1.0))) : 0.0;
    mr.std_length = n > 1 ? std::sqrt(std::max(0.0, (sl2 - sl * sl / dn) / (dn - 1.0))) : 0.0;
    for (std::size_t g = 0; g < k_classes; ++g) {
        if (organ_n[g] == 0) {
            mr.mean_organ_risk[g] = std::numeric_limits<double>::quiet_NaN();
            mr.mean_organ_length[g] = std::numeric_limits<double>::quiet_NaN();
        } else {
            mr.mean_organ_risk[g] /= static_cast<double>(organ_n[g]);
            mr.mean_organ_length[g] /= static_cast<double>(organ_n[g]);
        }
    }
}

}  // namespace

ScenarioReport run_scenario(const ScenarioConfig& config) {
    if (config.trials < 1) throw validation_error("trials must be >= 1");
    ScenarioReport report;
    report.config = config;
    report.class_names = config.phantom.class_names();

    std::vector<TrialOutput> outputs(config.trials);
    unsigned threads = config.threads ? config.threads : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(config.trials)));

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (std::size_t i = next.fetch_add(1); i < config.trials; i = next.fetch_add(1))
                    outputs[i] = run_trial(config, i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::size_t k_classes = static_cast<std::size_t>(config.phantom.k_classes());
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        MethodReport mr;
        mr.method = config.methods[mi];
        for (auto& o : outputs) mr.trials.push_back(std::move(o.per_method[mi]));
        aggregate(mr, k_classes);
        report.methods.push_back(std::move(mr));
    }
    return report;
}

std::vector<EvalRow> evaluate(const SampleSet& test, const CalibrationResult& result,
                              const PartitionSpec& part) {
    if (test.empty()) throw validation_error("empty test set");
    auto stats = stratified_eval(test, result.lambda_hat, part);
    std::vector<EvalRow> rows;
    std::string method = method_name(result.mode);
    double total_voxels = 0.0;
    for (double v : stats.organ_voxels) total_voxels += v;
    rows.push_back({method, "overall", stats.risk, stats.length, total_voxels});
    for (std::size_t g = 0; g < stats.organ_risk.size(); ++g) {
        std::string organ = g < test.class_names.size() ? test.class_names[g]
                                                        : "class_" + std::to_string(g);
        rows.push_back({method, organ, stats.organ_risk[g], stats.organ_length[g],
                        stats.organ_voxels[g]});
    }
    return rows;
}

void write_eval_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "method,organ,risk,mean_length,n_voxels\n";
    os.precision(10);
    for (const auto& r : rows)
        os << r.method << "," << r.organ << "," << r.risk << "," << r.mean_length << ","
           << r.n_voxels << "\n";
    atomic_write(path, os.str());
}

void write_scenario_csv(const ScenarioReport& report, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "method,trial,risk,length\n";
    os.precision(10);
    for (const auto& mr : report.methods) {
        for (std::size_t t = 0; t < mr.trials.size(); ++t)
            os << method_name(mr.method) << "," << t << "," << mr.trials[t].risk << ","
               << mr.trials[t].length << "\n";
        os << method_name(mr.method) << ",mean," << mr.mean_risk << "," << mr.mean_length << "\n";
        os << method_name(mr.method) << ",std," << mr.std_risk << "," << mr.std_length << "\n";
    }
    atomic_write(path, os.str());
}

namespace {

json nan_safe(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

json nan_safe_vec(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(nan_safe(x));
    return a;
}

}  // namespace

void save_scenario_report(const ScenarioReport& report, const std::filesystem::path& path) {
    json j;
    j["epsilon"] = report.config.epsilon;
    j["trials"] = report.config.trials;
    j["seed"] = report.config.seed;
    j["class_names"] = report.class_names;
    j["methods"] = json::array();
    for (const auto& mr : report.methods) {
        json m;
        m["method"] = method_name(mr.method);
        m["mean_risk"] = mr.mean_risk;
        m["std_risk"] = mr.std_risk;
        m["mean_length"] = mr.mean_length;
        m["std_length"] = mr.std_length;
        m["mean_organ_risk"] = nan_safe_vec(mr.mean_organ_risk);
        m["mean_organ_length"] = nan_safe_vec(mr.mean_organ_length);
        json trials = json::array();
        for (const auto& t : mr.trials) {
            trials.push_back({{"risk", t.risk},
                              {"length", t.length},
                              {"organ_risk", nan_safe_vec(t.organ_risk)},
                              {"organ_length", nan_safe_vec(t.organ_length)},
                              {"lambda_hat", t.lambda_hat.values}});
        }
        m["trials"] = trials;
        j["methods"].push_back(m);
    }
    atomic_write(path, j.dump(2) + "\n");
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw validation_error("cannot open scenario config: " + path.string());
    json j;
    f >> j;
    ScenarioConfig c;
    if (j.contains("phantom")) c.phantom = j.at("phantom").get<PhantomConfig>();
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j.at("methods")) c.methods.push_back(method_from_name(m.get<std::string>()));
    }
    c.epsilon = j.value("epsilon", c.epsilon);
    c.gamma = j.value("gamma", c.gamma);
    c.k_partition = j.value("k_partition", c.k_partition);
    c.d_opt = j.value("d_opt", c.d_opt);
    c.d_min = j.value("d_min", c.d_min);
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("sizes")) {
        c.sizes.n_opt = j.at("sizes").value("n_opt", c.sizes.n_opt);
        c.sizes.n_cal = j.at("sizes").value("n_cal", c.sizes.n_cal);
        c.sizes.n_test = j.at("sizes").value("n_test", c.sizes.n_test);
    }
    return c;
}

void save_scenario_config(const ScenarioConfig& c, const std::filesystem::path& path) {
    json j;
    j["phantom"] = c.phantom;
    j["methods"] = json::array();
    for (auto m : c.methods) j["methods"].push_back(method_name(m));
    j["epsilon"] = c.epsilon;
    j["gamma"] = c.gamma;
    j["k_partition"] = c.k_partition;
    j["d_opt"] = c.d_opt;
    j["d_min"] = c.d_min;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["sizes"] = {{"n_opt", c.sizes.n_opt}, {"n_cal", c.sizes.n_cal}, {"n_test", c.sizes.n_test}};
    atomic_write(path, j.dump(2) + "\n");
}

}  // namespace semcrc
