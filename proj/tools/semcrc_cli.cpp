// Command-line front end: calibrate quantile maps, evaluate results,
// run synthetic scenarios, and export conformalized uncertainty maps.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "semcrc/anchor.hpp"
#include "semcrc/calibrate.hpp"
#include "semcrc/manifest.hpp"
#include "semcrc/npy.hpp"
#include "semcrc/report.hpp"
#include "semcrc/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace semcrc;

namespace {

struct CommonOpts {
    std::string manifest;
    std::string method = "crc";
    double epsilon = 0.10;
    double gamma = 0.1;
    int k = 4;
    std::size_t d_opt = 50;
    std::size_t d_min = 2;
    std::size_t n_opt = 32;
    std::uint64_t seed = 0;
    std::string out = ".";
};

void write_run_record(const fs::path& dir, const json& config) {
    json rec;
    rec["config"] = config;
    rec["defaults"] = {{"epsilon", 0.10}, {"gamma", 0.1}, {"k", 4}, {"d_opt", 50}, {"d_min", 2}};
    atomic_write(dir / "run-record.json", rec.dump(2) + "\n");
}

json opts_to_json(const CommonOpts& o) {
    return {{"manifest", o.manifest}, {"method", o.method}, {"epsilon", o.epsilon},
            {"gamma", o.gamma},       {"k", o.k},           {"d_opt", o.d_opt},
            {"d_min", o.d_min},       {"n_opt", o.n_opt},   {"seed", o.seed},
            {"out", o.out}};
}

int cmd_calibrate(const CommonOpts& o) {
    Method method = method_from_name(o.method);
    SampleSet all = load_sample_set(o.manifest);
    fs::path out_dir(o.out);
    fs::create_directories(out_dir);

    SampleSet opt, cal;
    if (method == Method::CRC) {
        cal = all;
    } else {
        if (o.n_opt >= all.size())
            throw validation_error("n_opt (" + std::to_string(o.n_opt) +
                                   ") must leave at least one calibration sample");
        SplitPlan plan{o.n_opt, all.size() - o.n_opt, 0, o.seed};
        auto sp = split(all, plan);
        opt = std::move(sp.opt);
        cal = std::move(sp.cal);
    }

    CalibrationResult res;
    PartitionSpec part = PartitionSpec::scalar();
    switch (method) {
        case Method::CRC:
            res = calibrate_scalar(cal, o.epsilon);
            break;
        case Method::KCRC: {
            part = build_loss_quantile_partition(opt, o.k);
            auto prob = subsample(opt, part, o.d_opt, o.d_min, o.seed, o.epsilon, o.gamma);
            auto anchor = solve_anchor(prob);
            res = calibrate_kcrc(cal, part, anchor.lambda_tilde, o.epsilon);
            save_partition(part, out_dir / "partition.json");
            break;
        }
        case Method::SemCRC:
        case Method::SembarCRC: {
            part = PartitionSpec::semantic(all.k_classes);
            std::size_t d_opt_sem = semantic_d_opt(opt, o.d_min);
            auto prob = subsample(opt, part, d_opt_sem, o.d_min, o.seed, o.epsilon, o.gamma);
            auto anchor = solve_anchor(prob);
            res = method == Method::SemCRC ? calibrate_semcrc(cal, anchor.lambda_tilde, o.epsilon)
                                           : calibrate_sembar(cal, anchor.lambda_tilde, o.epsilon);
            break;
        }
    }
    save_result(res, out_dir / "result.json", all.class_names);
    write_run_record(out_dir, opts_to_json(o));
    std::cout << "wrote " << (out_dir / "result.json").string() << "\n";
    return 0;
}

PartitionSpec partition_for(const CalibrationResult& res, const SampleSet& set,
                            const std::string& partition_path) {
    switch (res.mode) {
        case Method::CRC: return PartitionSpec::scalar();
        case Method::KCRC:
            if (partition_path.empty())
                throw validation_error("kcrc results need --partition (the sidecar from calibrate)");
            return load_partition(partition_path);
        case Method::SemCRC:
        case Method::SembarCRC: return PartitionSpec::semantic(set.k_classes);
    }
    return PartitionSpec::scalar();
}

int cmd_evaluate(const CommonOpts& o, const std::string& result_path,
                 const std::string& partition_path) {
    SampleSet test = load_sample_set(o.manifest);
    CalibrationResult res = load_result(result_path);
    PartitionSpec part = partition_for(res, test, partition_path);
    auto rows = evaluate(test, res, part);
    fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    write_eval_csv(rows, out_dir / "report.csv");
    json cfg = opts_to_json(o);
    cfg["result"] = result_path;
    write_run_record(out_dir, cfg);
    std::cout << "wrote " << (out_dir / "report.csv").string() << "\n";
    return 0;
}

int cmd_export_maps(const CommonOpts& o, const std::string& result_path,
                    const std::string& partition_path) {
    SampleSet set = load_sample_set(o.manifest);
    CalibrationResult res = load_result(result_path);
    PartitionSpec part = partition_for(res, set, partition_path);
    fs::path maps_dir = fs::path(o.out) / "maps";
    fs::create_directories(maps_dir);
    for (const auto& s : set.samples) {
        ImageTensor map;
        map.shape = s.x.shape;
        map.values.resize(s.voxel_count());
        for (std::size_t j = 0; j < map.values.size(); ++j) {
            double l = res.lambda_hat[static_cast<std::size_t>(group_of(s, part, j))];
            double width =
                static_cast<double>(s.q.hi.values[j]) - s.q.lo.values[j] + 2.0 * l;
            map.values[j] = static_cast<float>(std::max(0.0, width));
        }
        save_tensor(map, maps_dir / (s.id + "_length.npy"));
    }
    json lam;
    lam["lambda_hat"] = res.lambda_hat.values;
    lam["mode"] = method_name(res.mode);
    atomic_write(fs::path(o.out) / "lambda.json", lam.dump(2) + "\n");
    json cfg = opts_to_json(o);
    cfg["result"] = result_path;
    write_run_record(o.out, cfg);
    std::cout << "wrote " << set.size() << " maps to " << maps_dir.string() << "\n";
    return 0;
}

int cmd_scenario(const std::string& config_path, const CommonOpts& o, bool have_epsilon,
                 bool have_seed) {
    ScenarioConfig cfg;
    if (!config_path.empty()) cfg = load_scenario_config(config_path);
    else cfg.phantom = default_phantom();
    if (have_epsilon) cfg.epsilon = o.epsilon;
    if (have_seed) cfg.seed = o.seed;

    auto report = run_scenario(cfg);
    fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    write_scenario_csv(report, out_dir / "report.csv");
    save_scenario_report(report, out_dir / "result.json");
    save_scenario_config(cfg, out_dir / "run-record.json");

    std::cout.precision(4);
    for (const auto& mr : report.methods)
        std::cout << method_name(mr.method) << ": risk " << mr.mean_risk << " +- " << mr.std_risk
                  << ", length " << mr.mean_length << " +- " << mr.std_length << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conformal risk control calibration for per-voxel uncertainty intervals"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string result_path, partition_path, config_path;

    auto add_common = [&](CLI::App* sub, bool with_method) {
        sub->add_option("--manifest", o.manifest, "dataset manifest JSON");
        if (with_method)
            sub->add_option("--method", o.method, "crc | kcrc | semcrc | sembarcrc");
        sub->add_option("--epsilon", o.epsilon, "risk tolerance");
        sub->add_option("--gamma", o.gamma, "surrogate scale");
        sub->add_option("--k", o.k, "fixed-partition group count");
        sub->add_option("--d-opt", o.d_opt, "subsampled voxels per sample (fixed mode)");
        sub->add_option("--d-min", o.d_min, "minimum per-group support");
        sub->add_option("--n-opt", o.n_opt, "samples reserved for anchor optimization");
        sub->add_option("--seed", o.seed, "top-level seed");
        sub->add_option("--out", o.out, "output directory");
    };

    auto* cal = app.add_subcommand("calibrate", "calibrate a lambda vector on a manifest");
    add_common(cal, true);
    cal->get_option("--manifest")->required();

    auto* ev = app.add_subcommand("evaluate", "stratified evaluation of a result on a manifest");
    add_common(ev, false);
    ev->get_option("--manifest")->required();
    ev->add_option("--result", result_path, "result.json from calibrate")->required();
    ev->add_option("--partition", partition_path, "partition sidecar (kcrc)");

    auto* ex = app.add_subcommand("export-maps", "write conformalized interval-length maps");
    add_common(ex, false);
    ex->get_option("--manifest")->required();
    ex->add_option("--result", result_path, "result.json from calibrate")->required();
    ex->add_option("--partition", partition_path, "partition sidecar (kcrc)");

    auto* sc = app.add_subcommand("scenario", "run a synthetic Monte Carlo scenario");
    add_common(sc, false);
    sc->add_option("--config", config_path, "scenario config JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(cal)) return cmd_calibrate(o);
        if (app.got_subcommand(ev)) return cmd_evaluate(o, result_path, partition_path);
        if (app.got_subcommand(ex)) return cmd_export_maps(o, result_path, partition_path);
        if (app.got_subcommand(sc))
            return cmd_scenario(config_path, o, sc->count("--epsilon") > 0, sc->count("--seed") > 0);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
