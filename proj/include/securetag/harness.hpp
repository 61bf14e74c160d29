#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "securetag/channel.hpp"
#include "securetag/classifier.hpp"
#include "securetag/config.hpp"
#include "securetag/protocol.hpp"

namespace securetag {

// Labeled calibration corpus: per class, half static and half moving traces
// collected over a short period.
struct CalibrationPlan {
    double seconds_per_class = 900.0;
    double off_body_distance_m = 2.0;
    std::uint64_t seed = 0xCA11B;
};

std::pair<std::vector<RssTrace>, std::vector<RssTrace>> make_calibration_traces(
    const LinkSpec& on_template, double sample_period_s, const CalibrationPlan& plan = {});

CalibrationProfile auto_calibrate(const LinkSpec& on_template, double sample_period_s,
                                  const PipelineConfig& pipeline,
                                  const CalibrationPlan& plan = {});

// Resolves a scenario config into one runnable spec. The config must name an
// on-body link `device`; an attack script uses its own link from the config.
ScenarioSpec make_scenario_spec(const ScenarioConfig& config, std::uint64_t seed,
                                const CalibrationProfile& profile);

// One outcome per configured seed. Seeds are independent and dispatched to an
// OpenMP worker pool; outcome order follows the seed list either way.
std::vector<ScenarioOutcome> run_scenario_sweep(const ScenarioConfig& config,
                                                const CalibrationProfile& profile,
                                                Execution policy = Execution::Parallel);

}  // namespace securetag
