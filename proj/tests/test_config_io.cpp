#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "securetag/channel.hpp"
#include "securetag/config.hpp"
#include "securetag/errors.hpp"
#include "securetag/protocol.hpp"
#include "securetag/trace.hpp"

using namespace securetag;
namespace fs = std::filesystem;

namespace {

const char* kSampleConfig = R"(# two co-located users, one wearing the device
name = s1_side_by_side
sample_period = 0.2
segment_interval = 20
energy_ratio = 0.5
cutoff = 0.5
duration = 120
loss_prob = 0.01
seeds = 1..3 9

[link]
id = device
kind = onbody
motion = static
body_radius = 0.12
arc_distance = 0.25

[link]
id = attacker
kind = offbody
env = busy
distance = 2.0

[attack]
kind = spoofing
link = attacker
times = 30 60
)";

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

}  // namespace

TEST_CASE("scenario configs parse sections, seeds and attack scripts") {
    const ScenarioConfig cfg = parse_scenario_config(kSampleConfig, "sample");
    CHECK(cfg.name == "s1_side_by_side");
    CHECK(cfg.sample_period_s == 0.2);
    CHECK(cfg.segment_interval_s == 20.0);
    CHECK(cfg.duration_s == 120.0);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 9});

    REQUIRE(cfg.links.size() == 2);
    CHECK(cfg.links[0].id == "device");
    CHECK(cfg.links[0].spec.kind == LinkKind::OnBody);
    CHECK(cfg.links[0].spec.geometry.body_radius_m == 0.12);
    CHECK(cfg.links[1].spec.kind == LinkKind::OffBody);
    CHECK(cfg.links[1].spec.env == EnvDynamics::Busy);
    CHECK(cfg.links[1].spec.distance.base_m == 2.0);

    REQUIRE(cfg.attack.has_value());
    CHECK(cfg.attack->kind == AttackKind::AuthenticatedSpoofing);
    CHECK(cfg.attack->times == std::vector<double>{30.0, 60.0});
    CHECK(cfg.attack->attacker_link.kind == LinkKind::OffBody);

    const LinkSpec device = cfg.materialize(cfg.links[0], 42);
    CHECK(device.sample_period_s == 0.2);
    CHECK(device.duration_s == 120.0);
    CHECK(device.rng_seed == 42);
    CHECK(device.link_id == "device");
}

TEST_CASE("config errors carry file and line") {
    CHECK_THROWS_WITH_AS(parse_scenario_config("bogus_key = 1\n", "cfg"),
                         doctest::Contains("cfg:1"), config_error);
    CHECK_THROWS_AS(parse_scenario_config("[link]\nkind = onbody\n", "cfg"), config_error);
    CHECK_THROWS_AS(parse_scenario_config("sample_period = fast\n", "cfg"), config_error);
    CHECK_THROWS_AS(
        parse_scenario_config("[attack]\nkind = spoofing\nlink = nonexistent\n", "cfg"),
        config_error);
    CHECK_THROWS_AS(parse_scenario_config("[link]\nid = a\nwat = 1\n", "cfg"), config_error);
}

TEST_CASE("referenced profile paths must exist at load time") {
    const fs::path cfg_path = temp_file("securetag_cfg_missing_profile.cfg");
    {
        std::ofstream out(cfg_path);
        out << "name = x\nprofile = does_not_exist.profile\n";
    }
    CHECK_THROWS_AS(load_scenario_config(cfg_path), config_error);
    fs::remove(cfg_path);
}

TEST_CASE("trace CSV round-trips exactly and is byte-stable") {
    LinkSpec link;
    link.kind = LinkKind::OffBody;
    link.env = EnvDynamics::Moderate;
    link.duration_s = 30.0;
    link.rng_seed = 31;
    const RssTrace trace = generate_trace(link);

    const fs::path a = temp_file("securetag_trace_a.csv");
    const fs::path b = temp_file("securetag_trace_b.csv");
    write_trace_csv(trace, a);
    write_trace_csv(trace, b);

    const RssTrace back = read_trace_csv(a);
    REQUIRE(back.size() == trace.size());
    CHECK(back.values == trace.values);
    CHECK(back.timestamps == trace.timestamps);

    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().starts_with("t_s,rss_dbm\n"));
    CHECK(sa.str().find('\r') == std::string::npos);

    fs::remove(a);
    fs::remove(b);
}

TEST_CASE("malformed CSV rows name the line") {
    const fs::path path = temp_file("securetag_trace_bad.csv");
    {
        std::ofstream out(path);
        out << "t_s,rss_dbm\n0.0,-50\n0.2,oops\n";
    }
    CHECK_THROWS_WITH_AS(read_trace_csv(path), doctest::Contains(":3"), io_error);
    fs::remove(path);
}

TEST_CASE("missing trace files raise io errors") {
    CHECK_THROWS_AS(read_trace_csv(temp_file("securetag_not_there.csv")), io_error);
}

TEST_CASE("event logs use the documented column layout") {
    ScenarioSpec spec;
    spec.device_link.kind = LinkKind::OnBody;
    spec.duration_s = 40.0;
    spec.rng_seed = 3;
    spec.profile = profile_from_stats(0.5, 1.0, 3.2, 3.4);
    const ScenarioOutcome outcome = run_scenario(spec);

    const fs::path path = temp_file("securetag_events.csv");
    write_event_log(outcome, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t_s,origin,receiver,kind,claimed_id,rss_dbm,session_state");
    std::string first;
    std::getline(in, first);
    CHECK(std::count(first.begin(), first.end(), ',') == 6);
    fs::remove(path);
}
