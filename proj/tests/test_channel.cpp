#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "securetag/channel.hpp"
#include "securetag/errors.hpp"
#include "securetag/trace.hpp"

using namespace securetag;
namespace mp = boost::multiprecision;
using big = mp::cpp_bin_float_50;

namespace {

// Term-by-term re-evaluation of the two-path field sum at 50 decimal digits.
double field_magnitude_oracle(const RadioConfig& radio, const BodyGeometry& g) {
    const big pi = mp::default_ops::get_constant_pi<big::backend_type>();
    const big c("299792458");
    const big k = 2 * pi * big(radio.frequency_hz) / c;
    const big amp = sqrt(big(radio.wave_impedance_ohm) / (2 * pi)) *
                    sqrt(big(radio.transmit_power_w) * big(radio.antenna_gain));
    const big eps_mag = sqrt(big(g.tissue_permittivity.real()) * big(g.tissue_permittivity.real()) +
                             big(g.tissue_permittivity.imag()) * big(g.tissue_permittivity.imag()));
    const big gamma = big(g.creeping_loss_coeff) * sqrt(eps_mag) / big(g.body_radius_m);
    const big heights = big(g.antenna_height_tx_m) + big(g.antenna_height_rx_m);

    const auto term = [&](const big& path) {
        const big w = exp(-gamma * path - big(g.height_loss_per_m) * heights);
        const big mag = amp / path * w;
        const big phase = -k * path;
        return std::pair<big, big>{mag * cos(phase), mag * sin(phase)};
    };

    const big d = big(g.arc_distance_m);
    const big d2 = 2 * pi * big(g.body_radius_m) - d;
    const auto [re1, im1] = term(d);
    const auto [re2, im2] = term(d2);
    const big re = re1 + re2;
    const big im = im1 + im2;
    return sqrt(re * re + im * im).convert_to<double>();
}

}  // namespace

TEST_CASE("creeping field matches the high-precision two-term oracle") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        RadioConfig radio;
        radio.transmit_power_w = 1e-4 + uni(rng) * 0.1;
        radio.antenna_gain = 0.5 + uni(rng) * 4.5;
        radio.frequency_hz = 2.0e9 + uni(rng) * 4.0e9;

        BodyGeometry g;
        g.body_radius_m = 0.05 + uni(rng) * 0.45;
        g.arc_distance_m = (0.1 + 0.8 * uni(rng)) * 2.0 * std::numbers::pi * g.body_radius_m;
        g.antenna_height_tx_m = uni(rng) * 0.05;
        g.antenna_height_rx_m = uni(rng) * 0.05;
        g.tissue_permittivity = {20.0 + uni(rng) * 40.0, -25.0 + uni(rng) * 20.0};
        g.creeping_loss_coeff = 0.1 + uni(rng) * 0.5;

        const double got = std::abs(creeping_field(radio, g));
        const double want = field_magnitude_oracle(radio, g);
        CHECK(std::fabs(got - want) <= 1e-12 * want);
    }
}

TEST_CASE("antipodal placement doubles the single-term magnitude") {
    RadioConfig radio;
    BodyGeometry g;
    g.body_radius_m = 0.15;
    g.arc_distance_m = std::numbers::pi * g.body_radius_m;

    const double path = g.arc_distance_m;
    const double amp = std::sqrt(radio.wave_impedance_ohm / (2.0 * std::numbers::pi)) *
                       std::sqrt(radio.transmit_power_w * radio.antenna_gain);
    const double single = amp / path * std::abs(attenuation_w(path, g));
    CHECK(std::abs(creeping_field(radio, g)) == doctest::Approx(2.0 * single).epsilon(1e-12));
}

TEST_CASE("doubling transmit power scales the field by sqrt(2)") {
    RadioConfig radio;
    BodyGeometry g;
    const double base = std::abs(creeping_field(radio, g));
    radio.transmit_power_w *= 2.0;
    CHECK(std::abs(creeping_field(radio, g)) ==
          doctest::Approx(std::sqrt(2.0) * base).epsilon(1e-12));
}

TEST_CASE("attenuation limits and identities") {
    BodyGeometry g;
    g.antenna_height_tx_m = 0.0;
    g.antenna_height_rx_m = 0.0;

    CHECK(std::abs(attenuation_w(1e-12, g)) == doctest::Approx(1.0).epsilon(1e-9));

    const double d = 0.2;
    CHECK(std::abs(attenuation_w(2.0 * d, g)) <=
          std::abs(attenuation_w(d, g)) * std::abs(attenuation_w(d, g)) + 1e-15);

    // gamma = c_w * sqrt(|eps|) / r = 0.3 * 5 / 0.15 = 10 Np/m
    g.tissue_permittivity = {25.0, 0.0};
    g.body_radius_m = 0.15;
    g.creeping_loss_coeff = 0.3;
    CHECK(g.loss_rate() == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(std::abs(attenuation_w(0.1, g)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    CHECK_THROWS_AS(attenuation_w(0.0, g), std::domain_error);
}

TEST_CASE("arc distance outside (0, 2*pi*r) is a domain error") {
    RadioConfig radio;
    BodyGeometry g;
    g.arc_distance_m = 0.0;
    CHECK_THROWS_AS(creeping_field(radio, g), std::domain_error);
    g.arc_distance_m = 2.0 * std::numbers::pi * g.body_radius_m;
    CHECK_THROWS_AS(creeping_field(radio, g), std::domain_error);
}

TEST_CASE("static on-body trace: 600 quantized samples, std under 4 dB") {
    LinkSpec link;
    link.kind = LinkKind::OnBody;
    link.sample_period_s = 0.2;
    link.duration_s = 120.0;
    link.rng_seed = 7;

    const RssTrace trace = generate_trace(link);
    REQUIRE(trace.size() == 600);
    CHECK(trace.uniform());
    CHECK(stdev(trace.values) < 4.0);
    for (double v : trace.values) CHECK(v == std::round(v));
}

TEST_CASE("same spec and seed give identical traces") {
    LinkSpec link;
    link.kind = LinkKind::OffBody;
    link.env = EnvDynamics::Moderate;
    link.rng_seed = 123;
    const RssTrace a = generate_trace(link);
    const RssTrace b = generate_trace(link);
    REQUIRE(a.size() == b.size());
    CHECK(a.values == b.values);
    CHECK(a.timestamps == b.timestamps);
}

TEST_CASE("walking variation is 2-3x the static variation") {
    LinkSpec link;
    link.kind = LinkKind::OnBody;
    link.duration_s = 120.0;
    link.rng_seed = 5;
    const double static_std = stdev(generate_trace(link).values);
    link.motion = default_motion(MotionState::Walking);
    const double walking_std = stdev(generate_trace(link).values);
    const double ratio = walking_std / static_std;
    CHECK(ratio >= 2.0);
    CHECK(ratio <= 3.0);
}

TEST_CASE("busy environments fluctuate more than calm ones, seed by seed") {
    int busier = 0;
    const int n = 50;
    for (int seed = 1; seed <= n; ++seed) {
        LinkSpec link;
        link.kind = LinkKind::OffBody;
        link.duration_s = 60.0;
        link.rng_seed = static_cast<std::uint64_t>(seed);
        link.env = EnvDynamics::Calm;
        const double calm = stdev(generate_trace(link).values);
        link.env = EnvDynamics::Busy;
        const double busy = stdev(generate_trace(link).values);
        if (busy > calm) ++busier;
    }
    // Sign test: 33+ of 50 rejects the coin-flip null at p < 0.01.
    CHECK(busier >= 33);
}

TEST_CASE("degenerate durations") {
    LinkSpec link;
    link.duration_s = 0.1;
    link.sample_period_s = 0.2;
    CHECK_THROWS_AS(generate_trace(link), config_error);
}

TEST_CASE("motion band validation") {
    MotionProcess m = default_motion(MotionState::Walking);
    m.band_high_hz = 5.0;
    CHECK_THROWS_AS(m.validate(), config_error);
    m = default_motion(MotionState::Static);
    CHECK_NOTHROW(m.validate());
}

TEST_CASE("radio and link validation") {
    RadioConfig radio;
    radio.frequency_hz = 1.0e9;
    CHECK_THROWS_AS(radio.validate(), config_error);

    LinkSpec link;
    link.sample_period_s = 2.0;
    CHECK_THROWS_AS(link.validate(), config_error);
}
