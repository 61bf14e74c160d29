#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>

#include "securetag/trace.hpp"

namespace securetag {

// Transmitter-side radio parameters.
struct RadioConfig {
    double transmit_power_w = 1e-3;      // P_t
    double antenna_gain = 1.0;           // G_t, linear
    double frequency_hz = 2.4e9;
    double wave_impedance_ohm = 376.73;  // vacuum wave impedance

    double wavenumber() const;  // 2*pi*f / c
    void validate() const;
};

// Geometry of a body-surface link plus the loss-model knobs read by the
// default attenuation function.
struct BodyGeometry {
    double body_radius_m = 0.15;                       // r
    double arc_distance_m = 0.3;                       // d, along-surface Tx-Rx distance
    double antenna_height_tx_m = 0.01;                 // h_t
    double antenna_height_rx_m = 0.01;                 // h_r
    std::complex<double> tissue_permittivity{53.0, -18.0};

    // Default loss model: |W| = exp(-gamma*path) * exp(-mu*(h_t+h_r)) with
    // gamma = creeping_loss_coeff * sqrt(|permittivity|) / body_radius.
    double creeping_loss_coeff = 0.3;  // dimensionless
    double height_loss_per_m = 5.0;    // mu, Np/m

    double loss_rate() const;  // gamma, Np/m
    void validate() const;
};

enum class MotionState { Static, Walking, Gesturing };

// Body-motion model: band-limited dB modulation added to the on-body baseline
// (and, attenuated, to off-body links).
struct MotionProcess {
    MotionState state = MotionState::Static;
    double band_low_hz = 0.5;
    double band_high_hz = 2.0;
    double modulation_depth_db = 30.0;  // peak-to-peak cap
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// Returns a MotionProcess with the observed per-state frequency band.
MotionProcess default_motion(MotionState state);

enum class EnvDynamics { Calm, Moderate, Busy };

// Tx-Rx separation over time for an off-body link.
struct DistanceTrack {
    double base_m = 2.0;
    double amplitude_m = 0.0;
    double period_s = 10.0;

    double at(double t) const;
};

enum class LinkKind { OnBody, OffBody };

struct LinkSpec {
    LinkKind kind = LinkKind::OnBody;
    RadioConfig radio;
    BodyGeometry geometry;   // OnBody only
    DistanceTrack distance;  // OffBody only
    EnvDynamics env = EnvDynamics::Calm;
    MotionProcess motion;
    double sample_period_s = 0.2;
    double duration_s = 120.0;
    double noise_std_db = 1.5;
    double rebase_offset_db = 0.0;  // maps field strength to receiver dBm
    std::uint64_t rng_seed = 1;
    std::string link_id = "link";

    void validate() const;
};

using AttenuationModel =
    std::function<std::complex<double>(double path_m, const BodyGeometry&)>;

// Creeping-wave loss factor for one propagation path.
std::complex<double> attenuation_w(double path_m, const BodyGeometry& geometry);

// Total electric field at the receiver: sum of the clockwise (path d) and
// anti-clockwise (path 2*pi*r - d) surface waves, each attenuated by `w`.
std::complex<double> creeping_field(const RadioConfig& radio, const BodyGeometry& geometry,
                                    const AttenuationModel& w = attenuation_w);

// Synthesizes the RSS trace a receiver would log for this link. Deterministic
// for a fixed spec (including seed); output quantized to whole dBm.
RssTrace generate_trace(const LinkSpec& link);

}  // namespace securetag
