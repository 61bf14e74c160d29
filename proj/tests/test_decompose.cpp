#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "securetag/errors.hpp"
#include "securetag/scica.hpp"
#include "securetag/trace.hpp"

using namespace securetag;

namespace {

RssTrace make_trace(std::size_t n, double sample_period, std::uint64_t seed) {
    RssTrace trace;
    trace.link_id = "t";
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 2.0);
    for (std::size_t i = 0; i < n; ++i) {
        trace.timestamps.push_back(static_cast<double>(i) * sample_period);
        trace.values.push_back(std::round(-50.0 + noise(rng)));
    }
    return trace;
}

Segment make_segment(std::vector<double> values, double fs) {
    Segment seg;
    seg.values = std::move(values);
    seg.sample_rate_hz = fs;
    seg.origin = "test";
    return seg;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = std::min(a.size(), b.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// All monotone boundary-to-boundary warping paths, by brute force.
double dtw_enumerated(std::span<const double> a, std::span<const double> b, std::size_t i,
                      std::size_t j) {
    const double cost = std::fabs(a[i] - b[j]);
    if (i == 0 && j == 0) return cost;
    double best = std::numeric_limits<double>::infinity();
    if (i > 0) best = std::min(best, dtw_enumerated(a, b, i - 1, j));
    if (j > 0) best = std::min(best, dtw_enumerated(a, b, i, j - 1));
    if (i > 0 && j > 0) best = std::min(best, dtw_enumerated(a, b, i - 1, j - 1));
    return cost + best;
}

// Direct average-linkage reference: recompute cluster distances from the
// leaf-level DTW matrix at every step instead of updating incrementally.
std::vector<ClusterMerge> reference_merges(const std::vector<std::vector<double>>& leaf_dist) {
    const int n = static_cast<int>(leaf_dist.size());
    struct Cl {
        int id;
        std::vector<int> leaves;
    };
    std::vector<Cl> active;
    for (int i = 0; i < n; ++i) active.push_back({i, {i}});
    std::vector<ClusterMerge> merges;
    int next_id = n;
    while (active.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < active.size(); ++i) {
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                double sum = 0.0;
                for (int x : active[i].leaves)
                    for (int y : active[j].leaves) sum += leaf_dist[x][y];
                const double d =
                    sum / (active[i].leaves.size() * active[j].leaves.size());
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        merges.push_back({active[bi].id, active[bj].id, best});
        Cl merged{next_id++, active[bi].leaves};
        merged.leaves.insert(merged.leaves.end(), active[bj].leaves.begin(),
                             active[bj].leaves.end());
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
        active[bi] = merged;
    }
    return merges;
}

}  // namespace

TEST_CASE("segment_trace splits into whole intervals") {
    const RssTrace t120 = make_trace(600, 0.2, 1);
    auto segs = segment_trace(t120, 20.0);
    REQUIRE(segs.size() == 6);
    for (const auto& s : segs) CHECK(s.values.size() == 100);
    CHECK(segs[0].sample_rate_hz == doctest::Approx(5.0));

    const RssTrace t119 = make_trace(595, 0.2, 2);
    CHECK(segment_trace(t119, 20.0).size() == 5);

    const RssTrace t10 = make_trace(50, 0.2, 3);
    CHECK(segment_trace(t10, 20.0).empty());
}

TEST_CASE("embedding dimension formula") {
    CHECK(embedding_dimension(5.0, 0.5) == 15);
    CHECK(embedding_dimension(10.0, 0.5) == 30);
    CHECK(embedding_dimension(3.34, 0.5) == 11);
    CHECK_THROWS_AS(embedding_dimension(1.0, 0.5), config_error);
}

TEST_CASE("embed builds the Hankel trajectory matrix") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const Eigen::MatrixXd v = embed(x, 2);
    REQUIRE(v.rows() == 2);
    REQUIRE(v.cols() == 4);
    CHECK(v(0, 0) == 1);
    CHECK(v(0, 3) == 4);
    CHECK(v(1, 0) == 2);
    CHECK(v(1, 3) == 5);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise;
    std::vector<double> r(40);
    for (double& e : r) e = noise(rng);
    const Eigen::MatrixXd m = embed(r, 13);
    for (int i = 0; i + 1 < m.rows(); ++i)
        for (int j = 1; j < m.cols(); ++j) CHECK(m(i + 1, j - 1) == m(i, j));

    CHECK_THROWS_AS(embed(x, 5), std::domain_error);
}

TEST_CASE("diagonal averaging") {
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 3, 4;
    const auto out = diagonal_average(m);
    REQUIRE(out.size() == 3);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 2.5);
    CHECK(out[2] == 4.0);
}

TEST_CASE("diagonal averaging inverts embedding exactly") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 8 + static_cast<std::size_t>(rng() % 60);
        std::vector<double> x(n);
        for (double& e : x) e = noise(rng);
        const int L = 1 + static_cast<int>(rng() % (n - 1));
        const auto back = diagonal_average(embed(x, L));
        REQUIRE(back.size() == x.size());
        for (std::size_t i = 0; i < n; ++i) CHECK(back[i] == x[i]);
    }
}

TEST_CASE("diagonal averaging is linear") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> noise;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd a(5, 9), b(5, 9);
        for (int i = 0; i < a.size(); ++i) {
            a.data()[i] = noise(rng);
            b.data()[i] = noise(rng);
        }
        const auto sum = diagonal_average(a + b);
        const auto da = diagonal_average(a);
        const auto db = diagonal_average(b);
        for (std::size_t t = 0; t < sum.size(); ++t)
            CHECK(sum[t] == doctest::Approx(da[t] + db[t]).epsilon(1e-12));
    }
}

TEST_CASE("fast_ica separates a two-row mixture and reconstructs it") {
    const std::size_t n = 400;
    std::vector<double> sine(n), ramp(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / 100.0;
        sine[i] = std::sin(2.0 * std::numbers::pi * 3.0 * t);
        ramp[i] = (static_cast<double>(i) - n / 2.0) / n;
    }
    Eigen::MatrixXd mixed(2, n);
    for (std::size_t i = 0; i < n; ++i) {
        mixed(0, i) = 0.7 * sine[i] + 0.9 * ramp[i];
        mixed(1, i) = -0.4 * sine[i] + 1.1 * ramp[i];
    }

    const IcaResult ica = fast_ica(mixed, 17);
    REQUIRE(ica.unmixed.rows() == 2);

    double best_sine = 0.0, best_ramp = 0.0;
    for (int i = 0; i < 2; ++i) {
        std::vector<double> u(ica.unmixed.row(i).begin(), ica.unmixed.row(i).end());
        best_sine = std::max(best_sine, std::fabs(pearson(u, sine)));
        best_ramp = std::max(best_ramp, std::fabs(pearson(u, ramp)));
    }
    CHECK(best_sine >= 0.95);
    CHECK(best_ramp >= 0.95);

    const Eigen::MatrixXd rebuilt =
        ica.mixing * ica.unmixed + ica.row_means * Eigen::RowVectorXd::Ones(n);
    CHECK((rebuilt - mixed).norm() <= 1e-6 * mixed.norm());
}

TEST_CASE("fast_ica is deterministic per seed") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise;
    Eigen::MatrixXd m(6, 80);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = noise(rng);
    const IcaResult a = fast_ica(m, 11);
    const IcaResult b = fast_ica(m, 11);
    CHECK(a.unmixed == b.unmixed);
    CHECK(a.mixing == b.mixing);
}

TEST_CASE("fast_ica rejects zero-variance input") {
    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(4, 30);
    CHECK_THROWS_AS(fast_ica(zeros, 1), silent_segment);
}

TEST_CASE("scica reconstructs the segment") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 2.5);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> values(100);
        for (double& v : values) v = std::round(-48.0 + noise(rng));
        const Segment seg = make_segment(values, 5.0);
        const ComponentSet set = scica(seg, 0.5, 7);

        std::vector<double> sum(values.size(), 0.0);
        for (const auto& c : set.components)
            for (std::size_t t = 0; t < sum.size(); ++t) sum[t] += c[t];
        for (std::size_t t = 0; t < sum.size(); ++t)
            CHECK(std::fabs(sum[t] + set.segment_mean - values[t]) <= 1e-8);

        // descending variance ordering
        for (std::size_t i = 0; i + 1 < set.components.size(); ++i) {
            const double vi = stdev(set.components[i]);
            const double vj = stdev(set.components[i + 1]);
            CHECK(vi * vi + 1e-12 >= vj * vj);
        }
    }
}

TEST_CASE("scica on an embedded two-source mixture recovers both sources") {
    // One scalar channel: sine + slow ramp, delay-embedded. A sinusoid spans a
    // two-dimensional subspace, so components are grouped per source before
    // correlating.
    const std::size_t n = 100;
    std::vector<double> sine(n), ramp(n), mix(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / 5.0;
        sine[i] = 2.0 * std::sin(2.0 * std::numbers::pi * 1.0 * t);
        ramp[i] = 0.4 * (t - 10.0);
        mix[i] = sine[i] + ramp[i];
    }
    const ComponentSet set = scica(make_segment(mix, 5.0), 0.5, 21);
    REQUIRE(set.components.size() >= 2);

    std::vector<double> sine_group(n, 0.0), ramp_group(n, 0.0);
    for (const auto& c : set.components) {
        const double to_sine = std::fabs(pearson(c, sine));
        const double to_ramp = std::fabs(pearson(c, ramp));
        auto& group = to_sine >= to_ramp ? sine_group : ramp_group;
        for (std::size_t t = 0; t < n; ++t) group[t] += c[t];
    }
    CHECK(std::fabs(pearson(sine_group, sine)) >= 0.95);
    CHECK(std::fabs(pearson(ramp_group, ramp)) >= 0.95);
}

TEST_CASE("scica variance concentrates for a pure sinusoid") {
    const std::size_t n = 100;
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i)
        values[i] = 3.0 * std::sin(2.0 * std::numbers::pi * 0.75 * static_cast<double>(i) / 5.0);
    const ComponentSet set = scica(make_segment(values, 5.0), 0.5, 5);

    std::vector<double> vars;
    double total = 0.0;
    for (const auto& c : set.components) {
        const double s = stdev(c);
        vars.push_back(s * s);
        total += s * s;
    }
    std::sort(vars.rbegin(), vars.rend());
    const double top2 = vars[0] + (vars.size() > 1 ? vars[1] : 0.0);
    CHECK(top2 >= 0.9 * total);
}

TEST_CASE("scica rejects constant segments") {
    const Segment seg = make_segment(std::vector<double>(100, -50.0), 5.0);
    CHECK_THROWS_AS(scica(seg, 0.5, 1), silent_segment);
}

TEST_CASE("dtw identities") {
    const std::vector<double> x{3, 1, 4, 1, 5};
    CHECK(dtw_distance(x, x) == 0.0);
    CHECK(dtw_distance(std::vector<double>{0, 0, 0}, std::vector<double>{1, 1, 1}) == 3.0);
    CHECK_THROWS_AS(dtw_distance(std::vector<double>{}, x), std::domain_error);
}

TEST_CASE("dtw equals exhaustive path enumeration") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> len(1, 6);
    std::uniform_int_distribution<int> val(-90, -30);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(static_cast<std::size_t>(len(rng)));
        std::vector<double> b(static_cast<std::size_t>(len(rng)));
        for (double& v : a) v = val(rng);
        for (double& v : b) v = val(rng);
        const double got = dtw_distance(a, b);
        const double want = dtw_enumerated(a, b, a.size() - 1, b.size() - 1);
        CHECK(got == want);
        CHECK(dtw_distance(b, a) == got);  // symmetry
        CHECK(got >= 0.0);
    }
}

TEST_CASE("clustering merges the closest pair first") {
    ComponentSet set;
    std::vector<double> c0(60), c1(60), c2(60);
    for (std::size_t i = 0; i < 60; ++i) {
        const double t = static_cast<double>(i) / 5.0;
        c0[i] = std::sin(2.0 * std::numbers::pi * 0.4 * t);
        c1[i] = std::sin(2.0 * std::numbers::pi * 0.4 * t + 0.05);
        c2[i] = std::sin(2.0 * std::numbers::pi * 2.3 * t);
    }
    set.components = {c0, c1, c2};
    const ClusterTree tree = cluster_components(set);
    REQUIRE(tree.n_leaves == 3);
    REQUIRE(tree.merges.size() == 2);
    CHECK(((tree.merges[0].left == 0 && tree.merges[0].right == 1) ||
           (tree.merges[0].left == 1 && tree.merges[0].right == 0)));
    CHECK(tree.merges[0].distance <= tree.merges[1].distance);
}

TEST_CASE("two components produce exactly one merge") {
    ComponentSet set;
    set.components = {{1, 2, 3, 2, 1, 0}, {0, 5, 0, 5, 0, 5}};
    const ClusterTree tree = cluster_components(set);
    CHECK(tree.n_leaves == 2);
    CHECK(tree.merges.size() == 1);
    CHECK(cluster_components(ComponentSet{{{1, 2, 3}}, {}, {}, 0.0, 0}).merges.empty());
}

TEST_CASE("cluster history matches a direct average-linkage reference") {
    std::mt19937_64 rng(15);
    std::normal_distribution<double> noise;
    for (int trial = 0; trial < 10; ++trial) {
        ComponentSet set;
        const int n_comp = 4 + static_cast<int>(rng() % 4);
        for (int c = 0; c < n_comp; ++c) {
            std::vector<double> series(50);
            for (double& v : series) v = noise(rng);
            set.components.push_back(series);
        }
        const ClusterTree tree = cluster_components(set);

        // identical z-normalized DTW matrix
        std::vector<std::vector<double>> shapes;
        for (const auto& src : set.components) {
            std::vector<double> z = src;
            const double m = mean(src);
            const double sd = stdev(src);
            for (double& v : z) v = (v - m) / sd;
            shapes.push_back(z);
        }
        std::vector<std::vector<double>> dist(shapes.size(),
                                              std::vector<double>(shapes.size(), 0.0));
        for (std::size_t i = 0; i < shapes.size(); ++i)
            for (std::size_t j = i + 1; j < shapes.size(); ++j)
                dist[i][j] = dist[j][i] = dtw_distance(shapes[i], shapes[j]);

        const auto want = reference_merges(dist);
        REQUIRE(tree.merges.size() == want.size());
        for (std::size_t k = 0; k < want.size(); ++k) {
            CHECK(tree.merges[k].distance == doctest::Approx(want[k].distance).epsilon(1e-9));
            if (k + 1 < want.size())
                CHECK(tree.merges[k].distance <= tree.merges[k + 1].distance + 1e-12);
        }
    }
}

TEST_CASE("low frequency energy") {
    CHECK(low_freq_energy(std::vector<double>(64, 3.0), 5.0, 0.0, 1.0) == 0.0);

    std::vector<double> half_hz(100), two_hz(100);
    for (std::size_t i = 0; i < 100; ++i) {
        const double t = static_cast<double>(i) / 5.0;
        half_hz[i] = std::sin(2.0 * std::numbers::pi * 0.5 * t);
        two_hz[i] = std::sin(2.0 * std::numbers::pi * 2.0 * t);
    }
    const double in_band = low_freq_energy(half_hz, 5.0, 0.0, 1.0);
    const double total = low_freq_energy(half_hz, 5.0, 0.0, 2.5);
    CHECK((total - in_band) < 1e-9 * total);

    const double out_band = low_freq_energy(two_hz, 5.0, 0.0, 1.0);
    const double out_total = low_freq_energy(two_hz, 5.0, 0.0, 2.5);
    CHECK(out_band < 0.01 * out_total);
}

TEST_CASE("variation selection picks the earliest cluster with enough band energy") {
    const std::size_t n = 100;
    std::vector<double> drift(n), jitter(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / 5.0;
        drift[i] = 4.0 * std::sin(2.0 * std::numbers::pi * 0.2 * t);
        jitter[i] = 1.5 * std::sin(2.0 * std::numbers::pi * 2.3 * t + 0.3);
    }
    ComponentSet set;
    set.components = {drift, jitter};  // descending variance order
    const ClusterTree tree = cluster_components(set);

    const VariationSplit split = select_variations(tree, set, 0.5, 5.0);
    REQUIRE(split.large_members == std::vector<int>{0});
    CHECK_FALSE(split.root_fallback);
    for (std::size_t t = 0; t < n; ++t) {
        CHECK(split.large_scale[t] == doctest::Approx(drift[t]).epsilon(1e-9));
        CHECK(std::fabs(split.large_scale[t] + split.small_scale[t] - (drift[t] + jitter[t])) <=
              1e-8);
    }

    // ratio -> 0+ selects the first leaf holding any band energy
    const VariationSplit tiny = select_variations(tree, set, 1e-9, 5.0);
    CHECK(tiny.large_members == std::vector<int>{0});

    CHECK_THROWS_AS(select_variations(tree, set, 1.0, 5.0), std::domain_error);
}

TEST_CASE("selection falls back to the root when no smaller cluster qualifies") {
    const std::size_t n = 80;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / 5.0;
        a[i] = std::sin(2.0 * std::numbers::pi * 0.4 * t);
        b[i] = std::sin(2.0 * std::numbers::pi * 0.4 * t);  // same share of band energy
    }
    ComponentSet set;
    set.components = {a, b};
    const ClusterTree tree = cluster_components(set);
    const VariationSplit split = select_variations(tree, set, 0.9, 5.0);
    CHECK(split.root_fallback);
    CHECK(split.large_members.size() == 2);
    for (double v : split.small_scale) CHECK(v == 0.0);
}
