#include "securetag/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "securetag/errors.hpp"

namespace securetag {

namespace {

constexpr double kSpeedOfLight = 299792458.0;

// Off-body large-scale model: log-distance path loss around a 1 m anchor.
constexpr double kOffBodyRssAt1mDbm = -45.0;
constexpr double kPathLossExponent = 2.2;

// Environment dynamics table: lognormal shadowing level/coherence plus the
// weight and rate of the small-scale (multipath) fading in dB.
struct EnvParams {
    double shadow_std_db;
    double shadow_coherence_s;
    double fading_scale;
    double fading_doppler_hz;
};

EnvParams env_params(EnvDynamics env) {
    switch (env) {
        case EnvDynamics::Calm: return {4.0, 5.0, 0.7, 0.45};
        case EnvDynamics::Moderate: return {5.5, 4.5, 0.85, 0.9};
        case EnvDynamics::Busy: return {7.0, 4.0, 1.0, 1.3};
    }
    return {4.0, 5.0, 0.7, 0.45};
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent deterministic stream per (seed, purpose). Keeping streams
// separate means a parameter change in one additive term never shifts the
// draws of another.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ tag));
}

constexpr std::uint64_t kTagMotion = 0x6d6f74696f6eULL;
constexpr std::uint64_t kTagNoise = 0x6e6f697365ULL;
constexpr std::uint64_t kTagShadow = 0x736861646fULL;
constexpr std::uint64_t kTagFading = 0x66616465ULL;

// Band-limited modulation as a random sum of sinusoids, scaled to
// depth_db/8 RMS and clipped to +-depth_db/2.
std::vector<double> motion_modulation(const MotionProcess& motion, std::uint64_t seed,
                                      std::size_t n, double sample_period) {
    std::vector<double> out(n, 0.0);
    if (motion.state == MotionState::Static || motion.modulation_depth_db <= 0.0) return out;

    constexpr int kTones = 16;
    std::mt19937_64 rng = stream(seed ^ splitmix64(motion.rng_seed), kTagMotion);
    std::uniform_real_distribution<double> freq(motion.band_low_hz, motion.band_high_hz);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    double freqs[kTones];
    double phases[kTones];
    for (int k = 0; k < kTones; ++k) {
        freqs[k] = freq(rng);
        phases[k] = phase(rng);
    }

    const double sigma = motion.modulation_depth_db / 8.0;
    const double amp = sigma * std::sqrt(2.0 / kTones);
    const double clip = motion.modulation_depth_db / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * sample_period;
        double v = 0.0;
        for (int k = 0; k < kTones; ++k)
            v += amp * std::sin(2.0 * std::numbers::pi * freqs[k] * t + phases[k]);
        out[i] = std::clamp(v, -clip, clip);
    }
    return out;
}

// First-order Gauss-Markov shadowing, stationary start.
std::vector<double> shadowing(std::uint64_t seed, std::size_t n, double sample_period,
                              double sigma, double coherence_s) {
    std::vector<double> out(n, 0.0);
    std::mt19937_64 rng = stream(seed, kTagShadow);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double rho = std::exp(-sample_period / coherence_s);
    const double innov = std::sqrt(1.0 - rho * rho);
    double s = normal(rng);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = sigma * s;
        s = rho * s + innov * normal(rng);
    }
    return out;
}

// Clarke-style multipath fading: magnitude of a sum of unit phasors with
// Doppler-spread frequencies, expressed in dB and floored at -30 dB.
std::vector<double> multipath_fading(std::uint64_t seed, std::size_t n, double sample_period,
                                     double scale, double doppler_hz) {
    std::vector<double> out(n, 0.0);
    if (scale <= 0.0) return out;

    constexpr int kPaths = 16;
    std::mt19937_64 rng = stream(seed, kTagFading);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
    double omega[kPaths];
    double phi[kPaths];
    for (int k = 0; k < kPaths; ++k) {
        omega[k] = 2.0 * std::numbers::pi * doppler_hz * std::cos(uni(rng));
        phi[k] = uni(rng);
    }

    const double norm = 1.0 / std::sqrt(static_cast<double>(kPaths));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * sample_period;
        std::complex<double> h{0.0, 0.0};
        for (int k = 0; k < kPaths; ++k)
            h += std::polar(norm, omega[k] * t + phi[k]);
        const double mag = std::max(std::abs(h), 1e-6);
        out[i] = scale * std::max(20.0 * std::log10(mag), -30.0);
    }
    return out;
}

}  // namespace

double RadioConfig::wavenumber() const {
    return 2.0 * std::numbers::pi * frequency_hz / kSpeedOfLight;
}

void RadioConfig::validate() const {
    if (transmit_power_w <= 0.0) throw config_error("transmit_power must be > 0");
    if (antenna_gain <= 0.0) throw config_error("antenna_gain must be > 0");
    if (frequency_hz < 2.0e9 || frequency_hz > 6.0e9)
        throw config_error("frequency must lie in [2 GHz, 6 GHz]");
    if (wave_impedance_ohm <= 0.0) throw config_error("wave_impedance must be > 0");
}

double BodyGeometry::loss_rate() const {
    return creeping_loss_coeff * std::sqrt(std::abs(tissue_permittivity)) / body_radius_m;
}

void BodyGeometry::validate() const {
    if (body_radius_m < 0.05 || body_radius_m > 0.5)
        throw config_error("body_radius must lie in [0.05, 0.5] m");
    const double circumference = 2.0 * std::numbers::pi * body_radius_m;
    if (arc_distance_m <= 0.0 || arc_distance_m >= circumference)
        throw std::domain_error("arc_distance must lie in (0, 2*pi*r)");
    if (antenna_height_tx_m < 0.0 || antenna_height_rx_m < 0.0)
        throw config_error("antenna heights must be >= 0");
}

void MotionProcess::validate() const {
    if (state == MotionState::Static) return;
    if (band_low_hz < 0.3 || band_high_hz > 4.5 || band_low_hz >= band_high_hz)
        throw config_error("motion band must be a sub-interval of [0.3, 4.5] Hz");
    if (modulation_depth_db < 0.0) throw config_error("modulation_depth must be >= 0");
}

MotionProcess default_motion(MotionState state) {
    MotionProcess m;
    m.state = state;
    switch (state) {
        case MotionState::Static:
            break;
        case MotionState::Walking:
            m.band_low_hz = 0.5;
            m.band_high_hz = 2.0;
            break;
        case MotionState::Gesturing:
            m.band_low_hz = 0.3;
            m.band_high_hz = 4.5;
            break;
    }
    return m;
}

double DistanceTrack::at(double t) const {
    double d = base_m;
    if (amplitude_m != 0.0 && period_s > 0.0)
        d += amplitude_m * std::sin(2.0 * std::numbers::pi * t / period_s);
    return std::max(d, 0.1);
}

void LinkSpec::validate() const {
    radio.validate();
    motion.validate();
    if (kind == LinkKind::OnBody) geometry.validate();
    if (kind == LinkKind::OffBody && distance.base_m <= 0.0)
        throw config_error("off-body distance must be > 0");
    if (sample_period_s < 0.05 || sample_period_s > 1.0)
        throw config_error("sample_period must lie in [0.05, 1.0] s");
    if (duration_s <= 0.0) throw config_error("duration must be > 0");
    if (noise_std_db < 0.0) throw config_error("noise_std must be >= 0");
}

std::complex<double> attenuation_w(double path_m, const BodyGeometry& geometry) {
    if (path_m <= 0.0) throw std::domain_error("attenuation path must be > 0");
    const double gamma = geometry.loss_rate();
    const double heights = geometry.antenna_height_tx_m + geometry.antenna_height_rx_m;
    return {std::exp(-gamma * path_m - geometry.height_loss_per_m * heights), 0.0};
}

std::complex<double> creeping_field(const RadioConfig& radio, const BodyGeometry& geometry,
                                    const AttenuationModel& w) {
    geometry.validate();
    const double circumference = 2.0 * std::numbers::pi * geometry.body_radius_m;
    const double k = radio.wavenumber();
    const double amp = std::sqrt(radio.wave_impedance_ohm / (2.0 * std::numbers::pi)) *
                       std::sqrt(radio.transmit_power_w * radio.antenna_gain);

    const auto term = [&](double path) {
        return (amp / path) * std::polar(1.0, -k * path) * w(path, geometry);
    };
    const double d = geometry.arc_distance_m;
    return term(d) + term(circumference - d);
}

RssTrace generate_trace(const LinkSpec& link) {
    link.validate();

    const std::size_t n =
        static_cast<std::size_t>(std::floor(link.duration_s / link.sample_period_s + 1e-9));
    if (n < 1) throw config_error("duration shorter than one sample: empty trace");

    RssTrace trace;
    trace.link_id = link.link_id;
    trace.timestamps.resize(n);
    trace.values.resize(n);

    std::mt19937_64 noise_rng = stream(link.rng_seed, kTagNoise);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<double> motion =
        motion_modulation(link.motion, link.rng_seed, n, link.sample_period_s);

    if (link.kind == LinkKind::OnBody) {
        const double baseline =
            20.0 * std::log10(std::abs(creeping_field(link.radio, link.geometry))) +
            link.rebase_offset_db;
        for (std::size_t i = 0; i < n; ++i) {
            trace.timestamps[i] = static_cast<double>(i) * link.sample_period_s;
            const double v = baseline + motion[i] + link.noise_std_db * noise(noise_rng);
            trace.values[i] = std::round(v);
        }
        return trace;
    }

    const EnvParams env = env_params(link.env);
    std::vector<double> shadow =
        shadowing(link.rng_seed, n, link.sample_period_s, env.shadow_std_db, env.shadow_coherence_s);
    std::vector<double> fading = multipath_fading(link.rng_seed, n, link.sample_period_s,
                                                  env.fading_scale, env.fading_doppler_hz);

    // Off-body links react only weakly to the wearer's own motion.
    constexpr double kOffBodyMotionScale = 0.3;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * link.sample_period_s;
        trace.timestamps[i] = t;
        const double path_loss =
            10.0 * kPathLossExponent * std::log10(link.distance.at(t) / 1.0);
        const double v = kOffBodyRssAt1mDbm - path_loss + shadow[i] + fading[i] +
                         kOffBodyMotionScale * motion[i] + link.rebase_offset_db +
                         link.noise_std_db * noise(noise_rng);
        trace.values[i] = std::round(v);
    }
    return trace;
}

}  // namespace securetag
