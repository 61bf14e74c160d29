#include "securetag/harness.hpp"

#include "securetag/errors.hpp"

namespace securetag {

std::pair<std::vector<RssTrace>, std::vector<RssTrace>> make_calibration_traces(
    const LinkSpec& on_template, double sample_period_s, const CalibrationPlan& plan) {
    const double half = plan.seconds_per_class / 2.0;

    LinkSpec on_static = on_template;
    on_static.kind = LinkKind::OnBody;
    on_static.sample_period_s = sample_period_s;
    on_static.duration_s = half;
    on_static.motion = default_motion(MotionState::Static);
    on_static.rng_seed = plan.seed + 1;
    on_static.link_id = "calib_on_static";

    LinkSpec on_walking = on_static;
    on_walking.motion = default_motion(MotionState::Walking);
    on_walking.rng_seed = plan.seed + 2;
    on_walking.link_id = "calib_on_walking";

    LinkSpec off_calm;
    off_calm.kind = LinkKind::OffBody;
    off_calm.radio = on_template.radio;
    off_calm.noise_std_db = on_template.noise_std_db;
    off_calm.distance.base_m = plan.off_body_distance_m;
    off_calm.env = EnvDynamics::Calm;
    off_calm.motion = default_motion(MotionState::Static);
    off_calm.sample_period_s = sample_period_s;
    off_calm.duration_s = half;
    off_calm.rng_seed = plan.seed + 3;
    off_calm.link_id = "calib_off_calm";

    LinkSpec off_busy = off_calm;
    off_busy.env = EnvDynamics::Busy;
    off_busy.rng_seed = plan.seed + 4;
    off_busy.link_id = "calib_off_busy";

    std::vector<RssTrace> on{generate_trace(on_static), generate_trace(on_walking)};
    std::vector<RssTrace> off{generate_trace(off_calm), generate_trace(off_busy)};
    return {std::move(on), std::move(off)};
}

CalibrationProfile auto_calibrate(const LinkSpec& on_template, double sample_period_s,
                                  const PipelineConfig& pipeline, const CalibrationPlan& plan) {
    const auto [on, off] = make_calibration_traces(on_template, sample_period_s, plan);
    return calibrate(on, off, pipeline);
}

ScenarioSpec make_scenario_spec(const ScenarioConfig& config, std::uint64_t seed,
                                const CalibrationProfile& profile) {
    const NamedLink* device = config.find_link("device");
    if (!device) throw config_error(config.name + ": scenario needs a link with id 'device'");
    if (device->spec.kind != LinkKind::OnBody)
        throw config_error(config.name + ": the 'device' link must be on-body");

    ScenarioSpec spec;
    spec.device_link = config.materialize(*device, seed);
    spec.pipeline = config.pipeline();
    spec.profile = profile;
    spec.duration_s = config.duration_s;
    spec.frame_loss_prob = config.frame_loss_prob;
    spec.rng_seed = seed;
    if (config.attack) {
        AttackScript script = *config.attack;
        script.attacker_link.sample_period_s = config.sample_period_s;
        script.attacker_link.duration_s = config.duration_s;
        if (script.attacker_link.kind != LinkKind::OffBody)
            throw config_error(config.name + ": attacker link must be off-body");
        spec.attack = script;
    }
    return spec;
}

std::vector<ScenarioOutcome> run_scenario_sweep(const ScenarioConfig& config,
                                                const CalibrationProfile& profile,
                                                Execution policy) {
    std::vector<ScenarioOutcome> outcomes(config.seeds.size());
    if (policy == Execution::Serial) {
        for (std::size_t i = 0; i < config.seeds.size(); ++i)
            outcomes[i] = run_scenario(make_scenario_spec(config, config.seeds[i], profile));
        return outcomes;
    }

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(config.seeds.size()); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        outcomes[idx] = run_scenario(make_scenario_spec(config, config.seeds[idx], profile));
    }
    return outcomes;
}

}  // namespace securetag
