#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "securetag/trace.hpp"

namespace securetag {

// One classification unit: a fixed-interval window of an RSS trace.
struct Segment {
    std::vector<double> values;
    double sample_rate_hz = 5.0;
    std::string origin;  // link id + start index
};

// Consecutive non-overlapping windows of `interval_seconds`; a trailing
// partial window is discarded. Shorter-than-one-interval traces yield an
// empty sequence.
std::vector<Segment> segment_trace(const RssTrace& trace, double interval_seconds);

// Delay-embedding dimension ceil(1.5 * f_s / f_l). Throws config_error when
// f_s <= 2*f_l (the band of interest would sit above Nyquist).
int embedding_dimension(double f_s, double f_l);

// L x K Hankel trajectory matrix, V(i,j) = x[i+j].
Eigen::MatrixXd embed(std::span<const double> x, int L);

// Anti-diagonal averaging, the inverse of `embed`: output t is the mean of
// all entries with i+j == t. Means are computed as first-entry plus mean
// deviation so a constant anti-diagonal is recovered bit-exactly.
std::vector<double> diagonal_average(const Eigen::MatrixXd& m);

struct IcaResult {
    Eigen::MatrixXd mixing;     // columns a_i, in the input row space
    Eigen::MatrixXd unmixed;    // rows u_i
    Eigen::VectorXd row_means;  // removed before whitening
    int iterations = 0;
    bool converged = false;
};

// FastICA with a log-cosh contrast and symmetric orthogonalization.
// Whitening drops eigenvalues below 1e-10 * max. Deterministic per seed.
// mixing * unmixed + row_means * 1^T reconstructs the input up to the
// dropped directions. Throws silent_segment on zero-variance input.
IcaResult fast_ica(const Eigen::MatrixXd& matrix, std::uint64_t seed, double tol = 1e-4,
                   int max_iter = 200);

// Independent per-sample time series recovered from one segment, ordered by
// descending variance. Their sum plus `segment_mean` reconstructs the
// segment.
struct ComponentSet {
    std::vector<std::vector<double>> components;  // s_i
    Eigen::MatrixXd mixing;                       // a_i per component
    Eigen::MatrixXd unmixed;                      // u_i per component
    double segment_mean = 0.0;
    int embedding_rows = 0;
};

// Single-channel ICA: embed -> fast_ica -> per-component rank-one recovery ->
// diagonal averaging. f_l is the lowest frequency of interest.
ComponentSet scica(const Segment& segment, double f_l, std::uint64_t seed);

// Classic dynamic time warping with |a_i - b_j| local cost, no window
// constraint, boundary-to-boundary path.
double dtw_distance(std::span<const double> a, std::span<const double> b);

struct ClusterMerge {
    int left = 0;
    int right = 0;
    double distance = 0.0;
};

// Agglomerative merge history. Leaves are component indices 0..n_leaves-1;
// merge k creates cluster id n_leaves + k.
struct ClusterTree {
    int n_leaves = 0;
    std::vector<ClusterMerge> merges;
    std::vector<int> leaf_components;  // component index per leaf

    std::vector<int> members(int cluster_id) const;
};

// Average-linkage clustering over pairwise DTW distances of z-normalized
// components. Components with variance below 1e-10 of the total are left out
// of the tree. Equal-distance merges are broken by lowest leaf index.
ClusterTree cluster_components(const ComponentSet& components);

// Sum of FFT magnitudes over bins with frequency in (band_lo, band_hi],
// excluding DC.
double low_freq_energy(std::span<const double> series, double f_s, double band_lo,
                       double band_hi);

struct VariationSplit {
    std::vector<double> large_scale;
    std::vector<double> small_scale;
    std::vector<int> large_members;  // component indices in the large cluster
    bool root_fallback = false;      // selection fell through to the full set
};

// Picks the earliest cluster (singletons in index order, then merges in
// order) whose summed series holds at least energy_ratio of the full
// reconstruction's low-frequency energy; that cluster becomes large_scale and
// everything else small_scale.
VariationSplit select_variations(const ClusterTree& tree, const ComponentSet& components,
                                 double energy_ratio, double f_s, double band_lo = 0.0,
                                 double band_hi = 1.0);

}  // namespace securetag
