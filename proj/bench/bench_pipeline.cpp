// Compares the serial reference path against the OpenMP path for the two
// data-parallel kernels: per-segment trace classification and per-seed
// scenario execution. Also checks that both paths agree exactly.

#include <chrono>
#include <cstdio>
#include <string>

#include "securetag/channel.hpp"
#include "securetag/classifier.hpp"
#include "securetag/config.hpp"
#include "securetag/harness.hpp"
#include "securetag/protocol.hpp"

using namespace securetag;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

bool same_decisions(const std::vector<Decision>& a, const std::vector<Decision>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].label != b[i].label || a[i].utility != b[i].utility ||
            a[i].sigma_large != b[i].sigma_large || a[i].sigma_small != b[i].sigma_small)
            return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    double trace_minutes = 30.0;
    int n_seeds = 24;
    if (argc > 1) trace_minutes = std::stod(argv[1]);
    if (argc > 2) n_seeds = std::stoi(argv[2]);

    LinkSpec link;
    link.kind = LinkKind::OnBody;
    link.motion = default_motion(MotionState::Walking);
    link.duration_s = trace_minutes * 60.0;
    link.rng_seed = 11;
    const RssTrace trace = generate_trace(link);

    PipelineConfig pipeline;
    const CalibrationProfile profile = auto_calibrate(link, link.sample_period_s, pipeline);

    std::printf("trace classification: %.0f min trace, %zu samples\n", trace_minutes,
                trace.size());

    auto t0 = clock_type::now();
    const auto serial = classify_trace(trace, profile, pipeline, Execution::Serial);
    const double t_serial = seconds_since(t0);

    t0 = clock_type::now();
    const auto parallel = classify_trace(trace, profile, pipeline, Execution::Parallel);
    const double t_parallel = seconds_since(t0);

    std::printf("  serial   %8.3f s  (%zu segments)\n", t_serial, serial.size());
    std::printf("  openmp   %8.3f s  (speedup %.2fx)\n", t_parallel, t_serial / t_parallel);
    std::printf("  results identical: %s\n", same_decisions(serial, parallel) ? "yes" : "NO");

    ScenarioConfig cfg;
    cfg.name = "bench";
    cfg.duration_s = 90.0;
    cfg.links.push_back({"device", link});
    cfg.seeds.clear();
    for (int s = 1; s <= n_seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));

    std::printf("scenario sweep: %d seeds, %.0f s each\n", n_seeds, cfg.duration_s);

    t0 = clock_type::now();
    const auto sweep_serial = run_scenario_sweep(cfg, profile, Execution::Serial);
    const double t_sweep_serial = seconds_since(t0);

    t0 = clock_type::now();
    const auto sweep_parallel = run_scenario_sweep(cfg, profile, Execution::Parallel);
    const double t_sweep_parallel = seconds_since(t0);

    bool identical = sweep_serial.size() == sweep_parallel.size();
    for (std::size_t i = 0; identical && i < sweep_serial.size(); ++i) {
        identical = sweep_serial[i].events.size() == sweep_parallel[i].events.size() &&
                    sweep_serial[i].legit_segments == sweep_parallel[i].legit_segments &&
                    sweep_serial[i].legit_false_alarms == sweep_parallel[i].legit_false_alarms;
    }

    std::printf("  serial   %8.3f s\n", t_sweep_serial);
    std::printf("  openmp   %8.3f s  (speedup %.2fx)\n", t_sweep_parallel,
                t_sweep_serial / t_sweep_parallel);
    std::printf("  results identical: %s\n", identical ? "yes" : "NO");

    const bool ok = same_decisions(serial, parallel) && identical;
    return ok ? 0 : 1;
}
