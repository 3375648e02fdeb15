#include "semcrc/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

namespace semcrc {

using nlohmann::json;

namespace {

// one-sided standard normal quantile, Acklam's rational approximation
double normal_quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

}  // namespace

std::vector<std::string> PhantomConfig::class_names() const {
    std::vector<std::string> names{"body"};
    for (const auto& o : organs) names.push_back(o.name);
    return names;
}

PhantomConfig default_phantom() {
    PhantomConfig c;
    c.organs = {
        {"clean_organ", 0.20, 0.45, 0.20, 0.45, 0.12, 0.20, 0.12, 0.20, 0.55, 0.70, 0.02, 0.9},
        {"noisy_organ", 0.50, 0.80, 0.45, 0.80, 0.10, 0.18, 0.10, 0.18, 0.40, 0.60, 0.10, 0.8},
        {"mid_organ", 0.15, 0.50, 0.55, 0.85, 0.08, 0.14, 0.08, 0.14, 0.60, 0.75, 0.05, 0.85},
    };
    c.background_miscal = 0.9;
    return c;
}

SampleSet generate(const PhantomConfig& config, std::size_t n) {
    SampleSet set;
    set.k_classes = config.k_classes();
    set.class_names = config.class_names();

    std::size_t h = config.height, w = config.width;
    std::size_t d = h * w;
    double z = normal_quantile(1.0 - config.alpha);

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (std::size_t i = 0; i < n; ++i) {
        CalibrationSample s;
        s.id = "phantom_" + std::to_string(i);
        s.x.shape = {h, w};
        s.x.values.resize(d);
        s.q.lo = s.x;
        s.q.hi = s.x;
        s.q.alpha = config.alpha;
        s.seg.shape = {h, w};
        s.seg.labels.assign(d, 0);
        s.seg.k_classes = set.k_classes;

        std::vector<float> clean(d, static_cast<float>(config.background_intensity));

        for (std::size_t o = 0; o < config.organs.size(); ++o) {
            const auto& os = config.organs[o];
            bool placed = false;
            for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                double cr = (os.center_row_min + uni(rng) * (os.center_row_max - os.center_row_min)) *
                            static_cast<double>(h);
                double cc = (os.center_col_min + uni(rng) * (os.center_col_max - os.center_col_min)) *
                            static_cast<double>(w);
                double ar = (os.axis_row_min + uni(rng) * (os.axis_row_max - os.axis_row_min)) *
                            static_cast<double>(h);
                double ac = (os.axis_col_min + uni(rng) * (os.axis_col_max - os.axis_col_min)) *
                            static_cast<double>(w);
                double intensity = os.intensity_min + uni(rng) * (os.intensity_max - os.intensity_min);
                if (ar < 0.5 || ac < 0.5) continue;
                std::size_t area = 0;
                for (std::size_t row = 0; row < h; ++row) {
                    for (std::size_t col = 0; col < w; ++col) {
                        double dr = (static_cast<double>(row) - cr) / ar;
                        double dc = (static_cast<double>(col) - cc) / ac;
                        if (dr * dr + dc * dc <= 1.0) {
                            std::size_t j = row * w + col;
                            clean[j] = static_cast<float>(intensity);
                            s.seg.labels[j] = static_cast<std::uint16_t>(o + 1);
                            ++area;
                        }
                    }
                }
                placed = area > 0;
            }
            if (!placed)
                throw validation_error("degenerate organ geometry: " + os.name +
                                       " produced no voxels in 100 attempts");
        }

        for (std::size_t j = 0; j < d; ++j) {
            std::uint16_t label = s.seg.labels[j];
            double sigma = label == 0 ? config.background_sigma : config.organs[label - 1].sigma;
            double miscal = label == 0 ? config.background_miscal : config.organs[label - 1].miscal;
            double noisy = clean[j] + sigma * gauss(rng);
            s.x.values[j] = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
            double band = z * sigma * miscal;
            s.q.lo.values[j] = static_cast<float>(clean[j] - band);
            s.q.hi.values[j] = static_cast<float>(clean[j] + band);
        }
        set.samples.push_back(std::move(s));
    }
    return set;
}

namespace {

void organ_to_json(const OrganSpec& o, json& j) {
    j = {{"name", o.name},
         {"center_row", {o.center_row_min, o.center_row_max}},
         {"center_col", {o.center_col_min, o.center_col_max}},
         {"axis_row", {o.axis_row_min, o.axis_row_max}},
         {"axis_col", {o.axis_col_min, o.axis_col_max}},
         {"intensity", {o.intensity_min, o.intensity_max}},
         {"sigma", o.sigma},
         {"miscal", o.miscal}};
}

OrganSpec organ_from_json(const json& j) {
    OrganSpec o;
    o.name = j.at("name").get<std::string>();
    auto pair = [&](const char* key, double& lo, double& hi) {
        auto v = j.at(key);
        lo = v[0].get<double>();
        hi = v[1].get<double>();
    };
    pair("center_row", o.center_row_min, o.center_row_max);
    pair("center_col", o.center_col_min, o.center_col_max);
    pair("axis_row", o.axis_row_min, o.axis_row_max);
    pair("axis_col", o.axis_col_min, o.axis_col_max);
    pair("intensity", o.intensity_min, o.intensity_max);
    o.sigma = j.at("sigma").get<double>();
    o.miscal = j.at("miscal").get<double>();
    return o;
}

}  // namespace

void to_json(json& j, const PhantomConfig& config) {
    j["height"] = config.height;
    j["width"] = config.width;
    j["background_intensity"] = config.background_intensity;
    j["background_sigma"] = config.background_sigma;
    j["background_miscal"] = config.background_miscal;
    j["alpha"] = config.alpha;
    j["seed"] = config.seed;
    j["organs"] = json::array();
    for (const auto& o : config.organs) {
        json oj;
        organ_to_json(o, oj);
        j["organs"].push_back(oj);
    }
}

void from_json(const json& j, PhantomConfig& c) {
    c = PhantomConfig{};
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.background_intensity = j.value("background_intensity", c.background_intensity);
    c.background_sigma = j.value("background_sigma", c.background_sigma);
    c.background_miscal = j.value("background_miscal", c.background_miscal);
    c.alpha = j.value("alpha", c.alpha);
    c.seed = j.value("seed", c.seed);
    if (j.contains("organs"))
        for (const auto& oj : j.at("organs")) c.organs.push_back(organ_from_json(oj));
}

void save_phantom_config(const PhantomConfig& config, const std::filesystem::path& path) {
    json j = config;
    std::ofstream f(path);
    f << j.dump(2) << "\n";
}

PhantomConfig load_phantom_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw validation_error("cannot open phantom config: " + path.string());
    json j;
    f >> j;
    return j.get<PhantomConfig>();
}

}  // namespace semcrc
