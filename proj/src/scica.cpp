#include "securetag/scica.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "securetag/errors.hpp"

namespace securetag {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double population_variance(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / xs.size();
}

// B <- B * (B^T B)^(-1/2), the symmetric orthogonalization step.
void symmetric_decorrelate(Eigen::MatrixXd& B) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B.transpose() * B);
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(1e-300);
    B = B * es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
}

}  // namespace

std::vector<Segment> segment_trace(const RssTrace& trace, double interval_seconds) {
    if (interval_seconds <= 0.0) throw config_error("segment interval must be > 0");
    std::vector<Segment> segments;
    if (trace.size() < 2) return segments;
    if (!trace.uniform()) throw config_error("trace must be uniformly sampled");

    const double fs = 1.0 / trace.sample_period();
    const auto per_segment = static_cast<std::size_t>(std::llround(interval_seconds * fs));
    if (per_segment == 0 || trace.size() < per_segment) return segments;

    const std::size_t count = trace.size() / per_segment;
    segments.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        Segment seg;
        seg.sample_rate_hz = fs;
        seg.origin = trace.link_id + ":" + std::to_string(s * per_segment);
        seg.values.assign(trace.values.begin() + static_cast<std::ptrdiff_t>(s * per_segment),
                          trace.values.begin() + static_cast<std::ptrdiff_t>((s + 1) * per_segment));
        segments.push_back(std::move(seg));
    }
    return segments;
}

int embedding_dimension(double f_s, double f_l) {
    if (f_l <= 0.0) throw config_error("f_l must be > 0");
    if (f_s <= 2.0 * f_l)
        throw config_error("sample rate too low for the band of interest (f_s <= 2*f_l)");
    return static_cast<int>(std::ceil(1.5 * f_s / f_l));
}

Eigen::MatrixXd embed(std::span<const double> x, int L) {
    const int T = static_cast<int>(x.size());
    if (L < 1) throw std::domain_error("embedding dimension must be >= 1");
    if (L >= T) throw std::domain_error("embedding dimension must be < segment length");
    const int K = T - L + 1;
    Eigen::MatrixXd V(L, K);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < K; ++j) V(i, j) = x[static_cast<std::size_t>(i + j)];
    return V;
}

std::vector<double> diagonal_average(const Eigen::MatrixXd& m) {
    const int L = static_cast<int>(m.rows());
    const int K = static_cast<int>(m.cols());
    std::vector<double> out(static_cast<std::size_t>(L + K - 1), 0.0);
    for (int t = 0; t < L + K - 1; ++t) {
        const int i_lo = std::max(0, t - K + 1);
        const int i_hi = std::min(L - 1, t);
        const double anchor = m(i_lo, t - i_lo);
        double dev = 0.0;
        for (int i = i_lo; i <= i_hi; ++i) dev += m(i, t - i) - anchor;
        out[static_cast<std::size_t>(t)] = anchor + dev / (i_hi - i_lo + 1);
    }
    return out;
}

IcaResult fast_ica(const Eigen::MatrixXd& matrix, std::uint64_t seed, double tol, int max_iter) {
    const auto L = matrix.rows();
    const auto K = matrix.cols();
    if (L < 1 || K < 2) throw std::domain_error("ica input needs at least 1x2 entries");

    IcaResult res;
    res.row_means = matrix.rowwise().mean();
    const Eigen::MatrixXd centered = matrix.colwise() - res.row_means;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered * centered.transpose() /
                                                      static_cast<double>(K));
    const Eigen::VectorXd lam = es.eigenvalues();
    const double lam_max = lam(L - 1);
    if (!(lam_max > 0.0)) throw silent_segment("ica input has zero variance");

    std::vector<int> kept;
    for (int i = 0; i < L; ++i)
        if (lam(i) > 1e-10 * lam_max) kept.push_back(i);
    const int d = static_cast<int>(kept.size());

    Eigen::MatrixXd E(L, d);
    Eigen::VectorXd D(d);
    for (int i = 0; i < d; ++i) {
        E.col(i) = es.eigenvectors().col(kept[static_cast<std::size_t>(i)]);
        D(i) = lam(kept[static_cast<std::size_t>(i)]);
    }

    const Eigen::MatrixXd whitened =
        D.cwiseSqrt().cwiseInverse().asDiagonal() * E.transpose() * centered;  // d x K

    std::mt19937_64 rng(splitmix64(seed));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd B(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) B(i, j) = normal(rng);
    symmetric_decorrelate(B);

    // Fixed-point iteration, g = tanh.
    for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
        const Eigen::MatrixXd proj = B.transpose() * whitened;          // d x K
        const Eigen::MatrixXd g = proj.array().tanh().matrix();        // g(w^T z)
        const Eigen::VectorXd g_prime_mean =
            (1.0 - g.array().square()).rowwise().mean().matrix();
        Eigen::MatrixXd B_next = whitened * g.transpose() / static_cast<double>(K) -
                                 B * g_prime_mean.asDiagonal();
        symmetric_decorrelate(B_next);

        double delta = 0.0;
        for (int i = 0; i < d; ++i)
            delta = std::max(delta, std::abs(1.0 - std::abs(B_next.col(i).dot(B.col(i)))));
        B = B_next;
        if (delta < tol) {
            res.converged = true;
            break;
        }
    }

    res.unmixed = B.transpose() * whitened;                       // rows u_i
    res.mixing = E * D.cwiseSqrt().asDiagonal() * B;              // columns a_i
    return res;
}

ComponentSet scica(const Segment& segment, double f_l, std::uint64_t seed) {
    const int T = static_cast<int>(segment.values.size());
    if (population_variance(segment.values) < 1e-24)
        throw silent_segment("segment has zero variance: " + segment.origin);

    const int L = embedding_dimension(segment.sample_rate_hz, f_l);
    if (T < 2 * L)
        throw config_error("segment too short for embedding (" + std::to_string(T) +
                           " samples, need >= " + std::to_string(2 * L) + ")");

    ComponentSet set;
    set.segment_mean = mean(segment.values);
    set.embedding_rows = L;

    std::vector<double> centered(segment.values.size());
    for (std::size_t i = 0; i < centered.size(); ++i)
        centered[i] = segment.values[i] - set.segment_mean;

    const Eigen::MatrixXd V = embed(centered, L);
    const IcaResult ica = fast_ica(V, seed);
    const int K = static_cast<int>(V.cols());
    const int n_ica = static_cast<int>(ica.mixing.cols());

    // Last rank-one term restores the row means removed during whitening, so
    // the component sum still adds up to the centered segment.
    const bool mean_term = ica.row_means.cwiseAbs().maxCoeff() > 0.0;
    const int n = n_ica + (mean_term ? 1 : 0);

    Eigen::MatrixXd mixing(L, n);
    Eigen::MatrixXd unmixed(n, K);
    mixing.leftCols(n_ica) = ica.mixing;
    unmixed.topRows(n_ica) = ica.unmixed;
    if (mean_term) {
        mixing.col(n_ica) = ica.row_means;
        unmixed.row(n_ica).setOnes();
    }

    std::vector<std::vector<double>> series(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Eigen::MatrixXd rank_one = mixing.col(i) * unmixed.row(i);
        series[static_cast<std::size_t>(i)] = diagonal_average(rank_one);
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> variances(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        variances[static_cast<std::size_t>(i)] = population_variance(series[static_cast<std::size_t>(i)]);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return variances[static_cast<std::size_t>(a)] >
                                                variances[static_cast<std::size_t>(b)]; });

    set.components.resize(static_cast<std::size_t>(n));
    set.mixing.resize(L, n);
    set.unmixed.resize(n, K);
    for (int i = 0; i < n; ++i) {
        const int src = order[static_cast<std::size_t>(i)];
        set.components[static_cast<std::size_t>(i)] = std::move(series[static_cast<std::size_t>(src)]);
        set.mixing.col(i) = mixing.col(src);
        set.unmixed.row(i) = unmixed.row(src);
    }
    return set;
}

double dtw_distance(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0 || m == 0) throw std::domain_error("dtw requires non-empty series");

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf);
    std::vector<double> cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double cost = std::fabs(a[i - 1] - b[j - 1]);
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

std::vector<int> ClusterTree::members(int cluster_id) const {
    std::vector<int> out;
    std::vector<int> stack{cluster_id};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        if (id < n_leaves) {
            out.push_back(leaf_components[static_cast<std::size_t>(id)]);
        } else {
            const auto& merge = merges[static_cast<std::size_t>(id - n_leaves)];
            stack.push_back(merge.left);
            stack.push_back(merge.right);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

ClusterTree cluster_components(const ComponentSet& components) {
    const int n_total = static_cast<int>(components.components.size());
    double total_var = 0.0;
    std::vector<double> vars(static_cast<std::size_t>(n_total));
    for (int i = 0; i < n_total; ++i) {
        vars[static_cast<std::size_t>(i)] = population_variance(components.components[static_cast<std::size_t>(i)]);
        total_var += vars[static_cast<std::size_t>(i)];
    }

    ClusterTree tree;
    for (int i = 0; i < n_total; ++i)
        if (vars[static_cast<std::size_t>(i)] >= 1e-10 * total_var) tree.leaf_components.push_back(i);
    if (tree.leaf_components.empty())
        for (int i = 0; i < n_total; ++i) tree.leaf_components.push_back(i);
    tree.n_leaves = static_cast<int>(tree.leaf_components.size());
    if (tree.n_leaves < 2) return tree;

    // DTW over z-normalized copies groups by shape rather than amplitude.
    std::vector<std::vector<double>> shapes(static_cast<std::size_t>(tree.n_leaves));
    for (int i = 0; i < tree.n_leaves; ++i) {
        const auto& src = components.components[static_cast<std::size_t>(tree.leaf_components[static_cast<std::size_t>(i)])];
        std::vector<double> z = src;
        const double m = mean(src);
        const double sd = stdev(src);
        if (sd > 1e-12)
            for (double& v : z) v = (v - m) / sd;
        shapes[static_cast<std::size_t>(i)] = std::move(z);
    }

    struct Active {
        int id;        // tree cluster id
        int size;
        int min_leaf;  // lowest leaf index, for tie-breaking
    };
    std::vector<Active> active;
    for (int i = 0; i < tree.n_leaves; ++i) active.push_back({i, 1, i});

    // Pairwise distances among active clusters, indexed by position in `active`.
    std::vector<std::vector<double>> dist(active.size(), std::vector<double>(active.size(), 0.0));
    for (std::size_t i = 0; i < active.size(); ++i)
        for (std::size_t j = i + 1; j < active.size(); ++j)
            dist[i][j] = dist[j][i] = dtw_distance(shapes[i], shapes[j]);

    while (active.size() > 1) {
        std::size_t best_i = 0, best_j = 1;
        for (std::size_t i = 0; i < active.size(); ++i) {
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                const double d = dist[i][j];
                const double best = dist[best_i][best_j];
                if (d < best) {
                    best_i = i;
                    best_j = j;
                } else if (d == best && (i != best_i || j != best_j)) {
                    const auto key = std::minmax(active[i].min_leaf, active[j].min_leaf);
                    const auto best_key = std::minmax(active[best_i].min_leaf, active[best_j].min_leaf);
                    if (key < best_key) {
                        best_i = i;
                        best_j = j;
                    }
                }
            }
        }

        const Active a = active[best_i];
        const Active b = active[best_j];
        const double merge_dist = dist[best_i][best_j];
        tree.merges.push_back({a.id, b.id, merge_dist});
        const int new_id = tree.n_leaves + static_cast<int>(tree.merges.size()) - 1;

        // Unweighted average linkage via the Lance-Williams update.
        std::vector<double> new_row(active.size(), 0.0);
        for (std::size_t c = 0; c < active.size(); ++c) {
            if (c == best_i || c == best_j) continue;
            new_row[c] = (a.size * dist[best_i][c] + b.size * dist[best_j][c]) /
                         static_cast<double>(a.size + b.size);
        }

        active[best_i] = {new_id, a.size + b.size, std::min(a.min_leaf, b.min_leaf)};
        for (std::size_t c = 0; c < active.size(); ++c)
            dist[best_i][c] = dist[c][best_i] = new_row[c];
        dist[best_i][best_i] = 0.0;

        active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_j));
        for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(best_j));
        dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(best_j));
    }
    return tree;
}

double low_freq_energy(std::span<const double> series, double f_s, double band_lo,
                       double band_hi) {
    const std::size_t n = series.size();
    if (n < 2) return 0.0;

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum;
    std::vector<double> copy(series.begin(), series.end());
    fft.fwd(spectrum, copy);

    double energy = 0.0;
    const double hi = band_hi * (1.0 + 1e-12) + 1e-15;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        const double f = static_cast<double>(k) * f_s / static_cast<double>(n);
        if (f > band_lo && f <= hi) energy += std::abs(spectrum[k]);
    }
    return energy;
}

VariationSplit select_variations(const ClusterTree& tree, const ComponentSet& components,
                                 double energy_ratio, double f_s, double band_lo,
                                 double band_hi) {
    if (!(energy_ratio > 0.0 && energy_ratio < 1.0))
        throw std::domain_error("energy_ratio must lie in (0, 1)");
    const std::size_t n_comp = components.components.size();
    if (n_comp == 0) throw std::domain_error("empty component set");
    const std::size_t len = components.components[0].size();

    std::vector<double> full(len, 0.0);
    for (const auto& c : components.components)
        for (std::size_t t = 0; t < len; ++t) full[t] += c[t];
    const double total = low_freq_energy(full, f_s, band_lo, band_hi);

    const auto cluster_sum = [&](const std::vector<int>& members) {
        std::vector<double> sum(len, 0.0);
        for (int idx : members)
            for (std::size_t t = 0; t < len; ++t)
                sum[t] += components.components[static_cast<std::size_t>(idx)][t];
        return sum;
    };

    // Candidate order: singletons by leaf index, then merges as they happened.
    const int n_candidates = tree.n_leaves + static_cast<int>(tree.merges.size());
    int selected = n_candidates - 1;
    bool found = false;
    for (int id = 0; id < n_candidates && !found; ++id) {
        const auto members = tree.members(id);
        const double e = low_freq_energy(cluster_sum(members), f_s, band_lo, band_hi);
        if (e >= energy_ratio * total) {
            selected = id;
            found = true;
        }
    }

    VariationSplit split;
    split.large_members = tree.members(selected);
    split.root_fallback =
        !found || split.large_members.size() == static_cast<std::size_t>(tree.n_leaves);
    split.large_scale = cluster_sum(split.large_members);

    std::vector<bool> in_large(n_comp, false);
    for (int idx : split.large_members) in_large[static_cast<std::size_t>(idx)] = true;
    split.small_scale.assign(len, 0.0);
    for (std::size_t i = 0; i < n_comp; ++i) {
        if (in_large[i]) continue;
        for (std::size_t t = 0; t < len; ++t) split.small_scale[t] += components.components[i][t];
    }
    return split;
}

}  // namespace securetag
