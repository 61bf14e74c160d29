#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "securetag/channel.hpp"
#include "securetag/classifier.hpp"
#include "securetag/protocol.hpp"

namespace securetag {

struct NamedLink {
    std::string id;
    LinkSpec spec;
};

// One experiment description: links, optional attack script, pipeline knobs,
// seed sweep. Parsed from flat `key = value` text with repeated [link]
// sections.
struct ScenarioConfig {
    std::string name = "scenario";
    std::vector<NamedLink> links;
    std::optional<AttackScript> attack;
    double sample_period_s = 0.2;
    double segment_interval_s = 20.0;
    double energy_ratio = 0.5;
    double cutoff_hz = 0.5;
    double duration_s = 120.0;
    double frame_loss_prob = 0.01;
    std::vector<std::uint64_t> seeds{1};
    std::filesystem::path profile_path;  // empty: calibrate on the fly

    PipelineConfig pipeline() const;
    const NamedLink* find_link(const std::string& id) const;
    // Link spec stamped with the scenario-wide sampling parameters and seed.
    LinkSpec materialize(const NamedLink& link, std::uint64_t seed) const;
};

ScenarioConfig parse_scenario_config(const std::string& text, const std::string& source);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

}  // namespace securetag
