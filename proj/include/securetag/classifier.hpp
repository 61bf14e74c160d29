#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "securetag/scica.hpp"
#include "securetag/trace.hpp"

namespace securetag {

// Calibrated classifier weights and decision threshold.
struct CalibrationProfile {
    double mean_std_large_on = 0.0;
    double mean_std_small_on = 0.0;
    double mean_std_large_off = 0.0;
    double mean_std_small_off = 0.0;
    double alpha = 0.5;
    double beta = 0.5;
    double threshold = 0.0;
};

CalibrationProfile read_profile(const std::filesystem::path& path);
void write_profile(const CalibrationProfile& profile, const std::filesystem::path& path);

// Knobs shared by calibration and classification.
struct PipelineConfig {
    double segment_interval_s = 20.0;
    double f_low_hz = 0.5;    // lowest frequency of interest (embedding dimension)
    double cutoff_hz = 0.5;   // motion-removal low-pass cutoff
    double energy_ratio = 0.5;
    double band_lo_hz = 0.0;  // low-frequency energy band for cluster selection
    double band_hi_hz = 1.0;
    std::uint64_t ica_seed = 7;
};

struct LowpassResult {
    std::vector<double> series;
    bool degenerate = false;  // input too short to filter, passed through
};

// Ideal FFT low-pass: bins with |f| > cutoff are zeroed. Projection, hence
// idempotent. Series shorter than 4 samples pass through flagged.
LowpassResult remove_motion(std::span<const double> large_scale, double f_s, double cutoff);

enum class BodyLabel { OnBody, OffBody };

struct Decision {
    BodyLabel label = BodyLabel::OnBody;
    double utility = 0.0;
    double sigma_large = 0.0;  // after motion removal
    double sigma_small = 0.0;
    bool degenerate = false;   // silent-segment fallback
};

// Per-segment variation features: std of the motion-removed large-scale
// series and std of the raw small-scale series.
struct SegmentFeatures {
    double sigma_large = 0.0;
    double sigma_small = 0.0;
    bool silent = false;
};

SegmentFeatures segment_features(const Segment& segment, const PipelineConfig& config);

// Weights from per-class mean feature stds: alpha/beta follows the ratio of
// absolute class differences, normalized to alpha + beta = 1; the threshold
// sits at the weighted midpoint of the class means. Throws
// calibration_degenerate when both differences vanish.
CalibrationProfile profile_from_stats(double mean_std_large_on, double mean_std_small_on,
                                      double mean_std_large_off, double mean_std_small_off);

// Runs the decomposition pipeline over labeled traces and fits the profile
// from the per-class mean feature stds.
CalibrationProfile calibrate(const std::vector<RssTrace>& on_traces,
                             const std::vector<RssTrace>& off_traces,
                             const PipelineConfig& config);

double utility(double sigma_large, double sigma_small, const CalibrationProfile& profile);

// OffBody iff utility >= threshold. Silent segments fall back to OnBody with
// the degenerate flag set.
Decision classify_segment(const Segment& segment, const CalibrationProfile& profile,
                          const PipelineConfig& config);
Decision decide(const SegmentFeatures& features, const CalibrationProfile& profile);

enum class Execution { Serial, Parallel };

// Segment-wise classification of a whole trace. Segments are independent;
// the Parallel policy fans them out with OpenMP and produces bit-identical
// results to Serial.
std::vector<Decision> classify_trace(const RssTrace& trace, const CalibrationProfile& profile,
                                     const PipelineConfig& config,
                                     Execution policy = Execution::Parallel);

}  // namespace securetag
