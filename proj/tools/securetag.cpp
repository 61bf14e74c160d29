// Command-line front end: trace synthesis, calibration, per-segment
// classification, attack simulation and metric export.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "securetag/channel.hpp"
#include "securetag/classifier.hpp"
#include "securetag/config.hpp"
#include "securetag/errors.hpp"
#include "securetag/harness.hpp"
#include "securetag/protocol.hpp"
#include "securetag/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace securetag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDegenerate = 4;

struct CommonOpts {
    std::string config_path;
    std::string out;
    bool as_json = false;
    std::optional<std::uint64_t> seed;
    std::optional<double> sample_period;
    std::optional<double> segment_interval;
};

ScenarioConfig load_config_with_overrides(const CommonOpts& opts) {
    if (opts.config_path.empty()) throw config_error("--config is required");
    ScenarioConfig cfg = load_scenario_config(opts.config_path);
    if (opts.seed) cfg.seeds = {*opts.seed};
    if (opts.sample_period) cfg.sample_period_s = *opts.sample_period;
    if (opts.segment_interval) cfg.segment_interval_s = *opts.segment_interval;
    return cfg;
}

std::string seed_suffix(std::uint64_t seed) { return std::to_string(seed); }

int cmd_simulate(const CommonOpts& opts) {
    const ScenarioConfig cfg = load_config_with_overrides(opts);
    const fs::path out_dir = opts.out.empty() ? fs::path(".") : fs::path(opts.out);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create output dir: " + out_dir.string());

    if (cfg.seeds.empty()) {
        std::cerr << "warning: no seeds configured, nothing to simulate\n";
        return kExitOk;
    }
    for (const std::uint64_t seed : cfg.seeds) {
        for (const auto& link : cfg.links) {
            const RssTrace trace = generate_trace(cfg.materialize(link, seed));
            const fs::path path =
                out_dir / (cfg.name + "_" + link.id + "_" + seed_suffix(seed) + ".csv");
            write_trace_csv(trace, path);
            std::cout << path.string() << " (" << trace.size() << " samples)\n";
        }
    }
    return kExitOk;
}

PipelineConfig pipeline_from_opts(const CommonOpts& opts) {
    PipelineConfig cfg;
    if (opts.segment_interval) cfg.segment_interval_s = *opts.segment_interval;
    return cfg;
}

int cmd_calibrate(const CommonOpts& opts, const std::vector<std::string>& on_files,
                  const std::vector<std::string>& off_files) {
    std::vector<RssTrace> on, off;
    for (const auto& f : on_files) on.push_back(read_trace_csv(f));
    for (const auto& f : off_files) off.push_back(read_trace_csv(f));

    const PipelineConfig pipeline = pipeline_from_opts(opts);
    const CalibrationProfile profile = calibrate(on, off, pipeline);

    std::printf("%-22s %12s %12s\n", "", "on-body", "off-body");
    std::printf("%-22s %12.4f %12.4f\n", "mean sigma_large (dB)", profile.mean_std_large_on,
                profile.mean_std_large_off);
    std::printf("%-22s %12.4f %12.4f\n", "mean sigma_small (dB)", profile.mean_std_small_on,
                profile.mean_std_small_off);
    std::printf("alpha = %.6f  beta = %.6f  threshold = %.6f\n", profile.alpha, profile.beta,
                profile.threshold);

    if (!opts.out.empty()) {
        write_profile(profile, opts.out);
        std::cout << "profile written to " << opts.out << "\n";
    }
    return kExitOk;
}

const char* label_name(BodyLabel label) {
    return label == BodyLabel::OnBody ? "onbody" : "offbody";
}

int cmd_classify(const CommonOpts& opts, const std::string& trace_file,
                 const std::string& profile_file) {
    const RssTrace trace = read_trace_csv(trace_file);
    const CalibrationProfile profile = read_profile(profile_file);
    const PipelineConfig pipeline = pipeline_from_opts(opts);
    const std::vector<Decision> decisions = classify_trace(trace, profile, pipeline);

    if (opts.as_json) {
        json out = json::array();
        for (std::size_t i = 0; i < decisions.size(); ++i) {
            const Decision& d = decisions[i];
            out.push_back({{"segment", i},
                           {"sigma_large", d.sigma_large},
                           {"sigma_small", d.sigma_small},
                           {"utility", d.utility},
                           {"threshold", profile.threshold},
                           {"label", label_name(d.label)},
                           {"degenerate", d.degenerate}});
        }
        std::cout << out.dump(2) << "\n";
        return kExitOk;
    }

    std::printf("%-8s %10s %10s %10s %10s %-8s %s\n", "segment", "sigma_l", "sigma_s", "u",
                "threshold", "label", "degenerate");
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const Decision& d = decisions[i];
        std::printf("%-8zu %10.4f %10.4f %10.4f %10.4f %-8s %d\n", i, d.sigma_large,
                    d.sigma_small, d.utility, profile.threshold, label_name(d.label),
                    d.degenerate ? 1 : 0);
    }
    return kExitOk;
}

json metrics_to_json(const Metrics& metrics, const ScenarioConfig& cfg) {
    json params{{"scenario", cfg.name},
                {"sample_period", cfg.sample_period_s},
                {"segment_interval", cfg.segment_interval_s},
                {"n_seeds", cfg.seeds.size()}};
    json out{{"mitigation_rate",
              metrics.mitigation_rate ? json(*metrics.mitigation_rate) : json(nullptr)},
             {"false_alarm_rate",
              metrics.false_alarm_rate ? json(*metrics.false_alarm_rate) : json(nullptr)},
             {"n_attempts", metrics.n_attempts},
             {"n_segments", metrics.n_segments},
             {"params", params}};
    return out;
}

int run_attack_config(const ScenarioConfig& cfg, const fs::path& out_dir,
                      const std::string& tag, bool serial) {
    CalibrationProfile profile;
    if (!cfg.profile_path.empty()) {
        profile = read_profile(cfg.profile_path);
    } else {
        const NamedLink* device = cfg.find_link("device");
        if (!device) throw config_error(cfg.name + ": scenario needs a link with id 'device'");
        profile = auto_calibrate(device->spec, cfg.sample_period_s, cfg.pipeline());
    }

    const std::vector<ScenarioOutcome> outcomes =
        run_scenario_sweep(cfg, profile, serial ? Execution::Serial : Execution::Parallel);
    const Metrics metrics = compute_metrics(outcomes);

    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const fs::path log_path =
            out_dir / (cfg.name + tag + "_events_" + seed_suffix(cfg.seeds[i]) + ".csv");
        write_event_log(outcomes[i], log_path);
    }

    const fs::path metrics_path = out_dir / (cfg.name + tag + "_metrics.json");
    std::ofstream out(metrics_path, std::ios::binary);
    if (!out) throw io_error("cannot write metrics: " + metrics_path.string());
    out << metrics_to_json(metrics, cfg).dump(2) << "\n";

    int violations = 0;
    for (const auto& o : outcomes)
        if (o.safety_violated) ++violations;

    std::printf("%s%s: attempts=%d mitigation=%s segments=%d false_alarms=%s safety_violations=%d\n",
                cfg.name.c_str(), tag.c_str(), metrics.n_attempts,
                metrics.mitigation_rate ? std::to_string(*metrics.mitigation_rate).c_str() : "n/a",
                metrics.n_segments,
                metrics.false_alarm_rate ? std::to_string(*metrics.false_alarm_rate).c_str() : "n/a",
                violations);
    return kExitOk;
}

int cmd_attack_sim(const CommonOpts& opts, const std::vector<double>& sweep_periods,
                   bool serial) {
    ScenarioConfig cfg = load_config_with_overrides(opts);
    const fs::path out_dir = opts.out.empty() ? fs::path(".") : fs::path(opts.out);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create output dir: " + out_dir.string());

    // Topology problems must surface before any run.
    make_scenario_spec(cfg, cfg.seeds.empty() ? 1 : cfg.seeds.front(), CalibrationProfile{});

    if (sweep_periods.empty()) return run_attack_config(cfg, out_dir, "", serial);

    for (const double period : sweep_periods) {
        ScenarioConfig swept = cfg;
        swept.sample_period_s = period;
        const std::string tag = "_p" + std::to_string(static_cast<int>(period * 1000.0)) + "ms";
        run_attack_config(swept, out_dir, tag, serial);
    }
    return kExitOk;
}

int cmd_report(const CommonOpts& opts, const std::vector<std::string>& metric_files) {
    if (metric_files.empty()) throw config_error("report needs at least one metrics file");

    std::ostringstream csv;
    csv << "scenario,parameter,rate_type,value\n";
    for (const auto& file : metric_files) {
        std::ifstream in(file);
        if (!in) throw io_error("cannot open metrics file: " + file);
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw io_error(file + ": not valid JSON: " + e.what());
        }
        if (!doc.contains("params") || !doc["params"].contains("scenario") ||
            !doc["params"].contains("sample_period") || !doc.contains("mitigation_rate") ||
            !doc.contains("false_alarm_rate"))
            throw io_error(file + ": metrics schema mismatch");

        const std::string scenario = doc["params"]["scenario"].get<std::string>();
        const double parameter = doc["params"]["sample_period"].get<double>();
        for (const char* key : {"mitigation_rate", "false_alarm_rate"}) {
            if (doc[key].is_null()) continue;
            const double value = doc[key].get<double>();
            if (value < 0.0 || value > 1.0)
                throw io_error(file + ": rate out of range for " + key);
            char row[160];
            std::snprintf(row, sizeof(row), "%s,%.9g,%s,%.9g\n", scenario.c_str(), parameter,
                          key, value);
            csv << row;
        }
    }

    if (opts.out.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(opts.out, std::ios::binary);
        if (!out) throw io_error("cannot write report: " + opts.out);
        out << csv.str();
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"On-body link authentication toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    double seed_raw = -1.0;
    double sample_period_raw = -1.0;
    double segment_interval_raw = -1.0;
    app.add_option("--config", opts.config_path, "Scenario config file")->expected(1);
    app.add_option("--out", opts.out, "Output directory or file");
    app.add_flag("--json", opts.as_json, "Machine-readable output");
    app.add_option("--seed", seed_raw, "Override the configured seed list with one seed");
    app.add_option("--sample-period", sample_period_raw, "Override the RSS sample period (s)");
    app.add_option("--segment-interval", segment_interval_raw, "Override the segment interval (s)");

    auto* simulate = app.add_subcommand("simulate", "Write RSS trace CSVs for each link/seed");

    std::vector<std::string> on_files, off_files;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit a profile from labeled traces");
    calibrate_cmd->add_option("--on", on_files, "On-body trace CSVs")->required();
    calibrate_cmd->add_option("--off", off_files, "Off-body trace CSVs")->required();

    std::string trace_file, profile_file;
    auto* classify_cmd = app.add_subcommand("classify", "Per-segment decisions for one trace");
    classify_cmd->add_option("trace", trace_file, "Trace CSV")->required();
    classify_cmd->add_option("--profile", profile_file, "Calibration profile")->required();

    std::vector<double> sweep_periods;
    bool serial = false;
    auto* attack = app.add_subcommand("attack-sim", "Run attack/benign scenarios over seeds");
    attack->add_option("--sweep-sample-periods", sweep_periods,
                       "Run once per sample period (s) instead of the configured one");
    attack->add_flag("--serial", serial, "Disable the seed worker pool");

    std::vector<std::string> metric_files;
    auto* report = app.add_subcommand("report", "Tidy CSV from metrics JSON files");
    report->add_option("metrics", metric_files, "Metrics JSON files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
    }

    if (seed_raw >= 0.0) opts.seed = static_cast<std::uint64_t>(seed_raw);
    if (sample_period_raw > 0.0) opts.sample_period = sample_period_raw;
    if (segment_interval_raw > 0.0) opts.segment_interval = segment_interval_raw;

    try {
        if (simulate->parsed()) return cmd_simulate(opts);
        if (calibrate_cmd->parsed()) return cmd_calibrate(opts, on_files, off_files);
        if (classify_cmd->parsed()) return cmd_classify(opts, trace_file, profile_file);
        if (attack->parsed()) return cmd_attack_sim(opts, sweep_periods, serial);
        if (report->parsed()) return cmd_report(opts, metric_files);
    } catch (const calibration_degenerate& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
