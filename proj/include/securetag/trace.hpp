#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace securetag {

// One RSS time series for a single link. Values are receiver readings in dBm,
// quantized to whole dBm; timestamps are uniformly spaced seconds.
struct RssTrace {
    std::vector<double> timestamps;
    std::vector<double> values;
    std::string link_id;

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }

    // Sample period inferred from the first two timestamps.
    double sample_period() const;

    // Uniform spacing within `tol` seconds.
    bool uniform(double tol = 1e-9) const;
};

// CSV with header `t_s,rss_dbm`, one row per sample, LF line endings.
RssTrace read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(const RssTrace& trace, const std::filesystem::path& path);

double mean(const std::vector<double>& xs);
// Sample standard deviation (n-1 denominator); 0 for fewer than two samples.
double stdev(const std::vector<double>& xs);

}  // namespace securetag
