#include "securetag/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "securetag/errors.hpp"

namespace securetag {

namespace {

std::string trim(std::string s) {
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    return s;
}

double parse_number(const std::string& value, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw config_error(where + ": bad number '" + value + "'");
    return v;
}

// "1 2 3" or "1..100", mixed freely.
std::vector<std::uint64_t> parse_seed_list(const std::string& value, const std::string& where) {
    std::vector<std::uint64_t> seeds;
    std::istringstream iss(value);
    std::string token;
    while (iss >> token) {
        const auto dots = token.find("..");
        if (dots != std::string::npos) {
            const auto lo = static_cast<std::uint64_t>(
                parse_number(token.substr(0, dots), where));
            const auto hi = static_cast<std::uint64_t>(
                parse_number(token.substr(dots + 2), where));
            if (hi < lo) throw config_error(where + ": empty seed range '" + token + "'");
            if (hi - lo > 100000) throw config_error(where + ": seed range too large");
            for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        } else {
            seeds.push_back(static_cast<std::uint64_t>(parse_number(token, where)));
        }
    }
    return seeds;
}

std::vector<double> parse_time_list(const std::string& value, const std::string& where) {
    std::vector<double> times;
    std::istringstream iss(value);
    std::string token;
    while (iss >> token) times.push_back(parse_number(token, where));
    return times;
}

void apply_link_key(LinkSpec& link, std::string& id, const std::string& key,
                    const std::string& value, const std::string& where) {
    if (key == "id") {
        id = value;
    } else if (key == "kind") {
        if (value == "onbody") link.kind = LinkKind::OnBody;
        else if (value == "offbody") link.kind = LinkKind::OffBody;
        else throw config_error(where + ": link kind must be onbody or offbody");
    } else if (key == "motion") {
        if (value == "static") link.motion = default_motion(MotionState::Static);
        else if (value == "walking") link.motion = default_motion(MotionState::Walking);
        else if (value == "gesturing") link.motion = default_motion(MotionState::Gesturing);
        else throw config_error(where + ": motion must be static, walking or gesturing");
    } else if (key == "env") {
        if (value == "calm") link.env = EnvDynamics::Calm;
        else if (value == "moderate") link.env = EnvDynamics::Moderate;
        else if (value == "busy") link.env = EnvDynamics::Busy;
        else throw config_error(where + ": env must be calm, moderate or busy");
    } else if (key == "seed") {
        link.rng_seed = static_cast<std::uint64_t>(parse_number(value, where));
    } else if (key == "tx_power_w") {
        link.radio.transmit_power_w = parse_number(value, where);
    } else if (key == "antenna_gain") {
        link.radio.antenna_gain = parse_number(value, where);
    } else if (key == "frequency") {
        link.radio.frequency_hz = parse_number(value, where);
    } else if (key == "body_radius") {
        link.geometry.body_radius_m = parse_number(value, where);
    } else if (key == "arc_distance") {
        link.geometry.arc_distance_m = parse_number(value, where);
    } else if (key == "antenna_height_tx") {
        link.geometry.antenna_height_tx_m = parse_number(value, where);
    } else if (key == "antenna_height_rx") {
        link.geometry.antenna_height_rx_m = parse_number(value, where);
    } else if (key == "permittivity_re") {
        link.geometry.tissue_permittivity.real(parse_number(value, where));
    } else if (key == "permittivity_im") {
        link.geometry.tissue_permittivity.imag(parse_number(value, where));
    } else if (key == "distance") {
        link.distance.base_m = parse_number(value, where);
    } else if (key == "distance_amplitude") {
        link.distance.amplitude_m = parse_number(value, where);
    } else if (key == "distance_period") {
        link.distance.period_s = parse_number(value, where);
    } else if (key == "noise_std") {
        link.noise_std_db = parse_number(value, where);
    } else if (key == "modulation_depth") {
        link.motion.modulation_depth_db = parse_number(value, where);
    } else if (key == "band_low") {
        link.motion.band_low_hz = parse_number(value, where);
    } else if (key == "band_high") {
        link.motion.band_high_hz = parse_number(value, where);
    } else if (key == "rebase_offset") {
        link.rebase_offset_db = parse_number(value, where);
    } else {
        throw config_error(where + ": unknown link key '" + key + "'");
    }
}

}  // namespace

PipelineConfig ScenarioConfig::pipeline() const {
    PipelineConfig cfg;
    cfg.segment_interval_s = segment_interval_s;
    cfg.cutoff_hz = cutoff_hz;
    cfg.energy_ratio = energy_ratio;
    return cfg;
}

const NamedLink* ScenarioConfig::find_link(const std::string& id) const {
    for (const auto& link : links)
        if (link.id == id) return &link;
    return nullptr;
}

LinkSpec ScenarioConfig::materialize(const NamedLink& link, std::uint64_t seed) const {
    LinkSpec spec = link.spec;
    spec.sample_period_s = sample_period_s;
    spec.duration_s = duration_s;
    spec.rng_seed = seed;
    spec.link_id = link.id;
    return spec;
}

ScenarioConfig parse_scenario_config(const std::string& text, const std::string& source) {
    ScenarioConfig cfg;
    enum class Section { Top, Link, Attack };
    Section section = Section::Top;
    NamedLink current_link;
    std::string attack_kind;
    std::string attack_link_id = "attacker";
    std::vector<double> attack_times;
    FrameKind injection = FrameKind::DeauthNotification;
    bool have_link = false;
    bool have_attack = false;

    const auto flush_link = [&]() {
        if (!have_link) return;
        if (current_link.id.empty())
            throw config_error(source + ": [link] section missing id");
        cfg.links.push_back(current_link);
        current_link = NamedLink{};
        have_link = false;
    };

    std::istringstream iss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(iss, line)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line == "[link]") {
            flush_link();
            section = Section::Link;
            have_link = true;
            continue;
        }
        if (line == "[attack]") {
            flush_link();
            section = Section::Attack;
            have_attack = true;
            continue;
        }
        if (line.front() == '[') throw config_error(where + ": unknown section " + line);

        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        switch (section) {
            case Section::Top:
                if (key == "name") cfg.name = value;
                else if (key == "sample_period") cfg.sample_period_s = parse_number(value, where);
                else if (key == "segment_interval") cfg.segment_interval_s = parse_number(value, where);
                else if (key == "energy_ratio") cfg.energy_ratio = parse_number(value, where);
                else if (key == "cutoff") cfg.cutoff_hz = parse_number(value, where);
                else if (key == "duration") cfg.duration_s = parse_number(value, where);
                else if (key == "loss_prob") cfg.frame_loss_prob = parse_number(value, where);
                else if (key == "seeds") cfg.seeds = parse_seed_list(value, where);
                else if (key == "profile") cfg.profile_path = value;
                else throw config_error(where + ": unknown key '" + key + "'");
                break;
            case Section::Link:
                apply_link_key(current_link.spec, current_link.id, key, value, where);
                break;
            case Section::Attack:
                if (key == "kind") attack_kind = value;
                else if (key == "times") attack_times = parse_time_list(value, where);
                else if (key == "link") attack_link_id = value;
                else if (key == "injection") {
                    if (value == "deauth") injection = FrameKind::DeauthNotification;
                    else if (value == "auth") injection = FrameKind::AuthRequest;
                    else throw config_error(where + ": injection must be deauth or auth");
                } else {
                    throw config_error(where + ": unknown attack key '" + key + "'");
                }
                break;
        }
    }
    flush_link();

    if (cfg.sample_period_s <= 0.0) throw config_error(source + ": sample_period must be > 0");
    if (cfg.segment_interval_s <= 0.0)
        throw config_error(source + ": segment_interval must be > 0");
    if (cfg.duration_s < cfg.segment_interval_s)
        throw config_error(source + ": duration must cover at least one segment interval");

    if (have_attack) {
        AttackScript script;
        if (attack_kind == "spoofing") script.kind = AttackKind::AuthenticatedSpoofing;
        else if (attack_kind == "jamming_replay") script.kind = AttackKind::JammingReplay;
        else if (attack_kind == "deadlock") script.kind = AttackKind::DeadlockInjection;
        else throw config_error(source + ": attack kind must be spoofing, jamming_replay or deadlock");
        const NamedLink* link = cfg.find_link(attack_link_id);
        if (!link)
            throw config_error(source + ": attack references unknown link '" + attack_link_id + "'");
        script.attacker_link = link->spec;
        script.times = attack_times.empty() ? std::vector<double>{30.0} : attack_times;
        script.injection_kind = injection;
        cfg.attack = script;
    }
    return cfg;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    ScenarioConfig cfg = parse_scenario_config(buffer.str(), path.string());
    if (!cfg.profile_path.empty()) {
        std::filesystem::path p = cfg.profile_path;
        if (p.is_relative()) p = path.parent_path() / p;
        if (!std::filesystem::exists(p))
            throw config_error(path.string() + ": profile file does not exist: " + p.string());
        cfg.profile_path = p;
    }
    return cfg;
}

}  // namespace securetag
