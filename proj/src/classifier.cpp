#include "securetag/classifier.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "securetag/errors.hpp"

namespace securetag {

namespace {

constexpr const char* kProfileFields[] = {
    "mean_std_large_on", "mean_std_small_on", "mean_std_large_off", "mean_std_small_off",
    "alpha", "beta", "threshold",
};

double* profile_field(CalibrationProfile& p, const std::string& name) {
    if (name == "mean_std_large_on") return &p.mean_std_large_on;
    if (name == "mean_std_small_on") return &p.mean_std_small_on;
    if (name == "mean_std_large_off") return &p.mean_std_large_off;
    if (name == "mean_std_small_off") return &p.mean_std_small_off;
    if (name == "alpha") return &p.alpha;
    if (name == "beta") return &p.beta;
    if (name == "threshold") return &p.threshold;
    return nullptr;
}

struct ClassStats {
    double mean_sigma_large = 0.0;
    double mean_sigma_small = 0.0;
    std::size_t n_segments = 0;
};

ClassStats class_stats(const std::vector<RssTrace>& traces, const PipelineConfig& config,
                       const char* label) {
    std::vector<double> sigma_l;
    std::vector<double> sigma_s;
    for (const auto& trace : traces) {
        for (const auto& segment : segment_trace(trace, config.segment_interval_s)) {
            const SegmentFeatures f = segment_features(segment, config);
            if (f.silent) continue;
            sigma_l.push_back(f.sigma_large);
            sigma_s.push_back(f.sigma_small);
        }
    }
    if (sigma_l.size() < 5)
        throw config_error(std::string(label) +
                           " calibration class needs at least 5 usable segments, got " +
                           std::to_string(sigma_l.size()));
    return {mean(sigma_l), mean(sigma_s), sigma_l.size()};
}

}  // namespace

CalibrationProfile read_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open profile: " + path.string());
    CalibrationProfile profile;
    std::map<std::string, bool> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw io_error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        const auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
        };
        trim(key);
        trim(val);
        double* field = profile_field(profile, key);
        if (!field)
            throw io_error(path.string() + ":" + std::to_string(lineno) + ": unknown field '" + key + "'");
        char* end = nullptr;
        *field = std::strtod(val.c_str(), &end);
        if (end == val.c_str() || *end != '\0')
            throw io_error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + val + "'");
        seen[key] = true;
    }
    for (const char* name : kProfileFields)
        if (!seen[name]) throw io_error(path.string() + ": missing field '" + std::string(name) + "'");
    return profile;
}

void write_profile(const CalibrationProfile& profile, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write profile: " + path.string());
    CalibrationProfile copy = profile;
    char buf[96];
    for (const char* name : kProfileFields) {
        std::snprintf(buf, sizeof(buf), "%s = %.17g\n", name, *profile_field(copy, name));
        out << buf;
    }
    if (!out) throw io_error("short write: " + path.string());
}

LowpassResult remove_motion(std::span<const double> large_scale, double f_s, double cutoff) {
    LowpassResult res;
    const std::size_t n = large_scale.size();
    if (n < 4) {
        res.series.assign(large_scale.begin(), large_scale.end());
        res.degenerate = true;
        return res;
    }
    if (!(cutoff < f_s / 2.0)) throw config_error("low-pass cutoff must be below Nyquist");

    Eigen::FFT<double> fft;
    std::vector<double> copy(large_scale.begin(), large_scale.end());
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, copy);
    const double hi = cutoff * (1.0 + 1e-12) + 1e-15;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = (k <= n / 2 ? static_cast<double>(k)
                                     : static_cast<double>(k) - static_cast<double>(n)) *
                         f_s / static_cast<double>(n);
        if (std::fabs(f) > hi) spectrum[k] = 0.0;
    }
    fft.inv(res.series, spectrum);
    return res;
}

SegmentFeatures segment_features(const Segment& segment, const PipelineConfig& config) {
    SegmentFeatures features;
    ComponentSet components;
    try {
        components = scica(segment, config.f_low_hz, config.ica_seed);
    } catch (const silent_segment&) {
        features.silent = true;
        return features;
    }
    const ClusterTree tree = cluster_components(components);
    const VariationSplit split = select_variations(tree, components, config.energy_ratio,
                                                   segment.sample_rate_hz, config.band_lo_hz,
                                                   config.band_hi_hz);
    const LowpassResult residual =
        remove_motion(split.large_scale, segment.sample_rate_hz, config.cutoff_hz);
    features.sigma_large = stdev(residual.series);
    features.sigma_small = stdev(split.small_scale);
    return features;
}

CalibrationProfile profile_from_stats(double mean_std_large_on, double mean_std_small_on,
                                      double mean_std_large_off, double mean_std_small_off) {
    const double diff_large = std::fabs(mean_std_large_on - mean_std_large_off);
    const double diff_small = std::fabs(mean_std_small_on - mean_std_small_off);
    if (diff_large < 1e-9 && diff_small < 1e-9)
        throw calibration_degenerate("on/off classes are indistinguishable");

    CalibrationProfile profile;
    profile.mean_std_large_on = mean_std_large_on;
    profile.mean_std_small_on = mean_std_small_on;
    profile.mean_std_large_off = mean_std_large_off;
    profile.mean_std_small_off = mean_std_small_off;
    profile.alpha = diff_large / (diff_large + diff_small);
    profile.beta = diff_small / (diff_large + diff_small);
    profile.threshold =
        profile.alpha * (profile.mean_std_large_on + profile.mean_std_large_off) / 2.0 +
        profile.beta * (profile.mean_std_small_on + profile.mean_std_small_off) / 2.0;
    return profile;
}

CalibrationProfile calibrate(const std::vector<RssTrace>& on_traces,
                             const std::vector<RssTrace>& off_traces,
                             const PipelineConfig& config) {
    if (on_traces.empty() || off_traces.empty())
        throw config_error("calibration needs at least one trace per class");

    const ClassStats on = class_stats(on_traces, config, "on-body");
    const ClassStats off = class_stats(off_traces, config, "off-body");
    return profile_from_stats(on.mean_sigma_large, on.mean_sigma_small, off.mean_sigma_large,
                              off.mean_sigma_small);
}

double utility(double sigma_large, double sigma_small, const CalibrationProfile& profile) {
    return profile.alpha * sigma_large + profile.beta * sigma_small;
}

Decision decide(const SegmentFeatures& features, const CalibrationProfile& profile) {
    Decision d;
    if (features.silent) {
        // A perfectly flat burst is the extreme of the static on-body pattern.
        d.label = BodyLabel::OnBody;
        d.degenerate = true;
        return d;
    }
    d.sigma_large = features.sigma_large;
    d.sigma_small = features.sigma_small;
    d.utility = utility(d.sigma_large, d.sigma_small, profile);
    d.label = d.utility >= profile.threshold ? BodyLabel::OffBody : BodyLabel::OnBody;
    return d;
}

Decision classify_segment(const Segment& segment, const CalibrationProfile& profile,
                          const PipelineConfig& config) {
    return decide(segment_features(segment, config), profile);
}

std::vector<Decision> classify_trace(const RssTrace& trace, const CalibrationProfile& profile,
                                     const PipelineConfig& config, Execution policy) {
    const std::vector<Segment> segments = segment_trace(trace, config.segment_interval_s);
    std::vector<Decision> decisions(segments.size());

    if (policy == Execution::Serial) {
        for (std::size_t i = 0; i < segments.size(); ++i)
            decisions[i] = classify_segment(segments[i], profile, config);
        return decisions;
    }

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(segments.size()); ++i)
        decisions[static_cast<std::size_t>(i)] =
            classify_segment(segments[static_cast<std::size_t>(i)], profile, config);
    return decisions;
}

}  // namespace securetag
