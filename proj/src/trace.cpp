#include "securetag/trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "securetag/errors.hpp"

namespace securetag {

double RssTrace::sample_period() const {
    if (timestamps.size() < 2) return 0.0;
    return timestamps[1] - timestamps[0];
}

bool RssTrace::uniform(double tol) const {
    if (timestamps.size() != values.size()) return false;
    if (timestamps.size() < 3) return true;
    const double dt = timestamps[1] - timestamps[0];
    for (std::size_t i = 2; i < timestamps.size(); ++i) {
        if (std::fabs((timestamps[i] - timestamps[i - 1]) - dt) > tol) return false;
    }
    return true;
}

RssTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open trace file: " + path.string());

    RssTrace trace;
    trace.link_id = path.stem().string();

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line != "t_s,rss_dbm")
                throw io_error(path.string() + ":1: expected header t_s,rss_dbm");
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw io_error(path.string() + ":" + std::to_string(lineno) + ": missing comma");
        char* end = nullptr;
        const std::string ts = line.substr(0, comma);
        const std::string vs = line.substr(comma + 1);
        const double t = std::strtod(ts.c_str(), &end);
        if (end == ts.c_str() || *end != '\0')
            throw io_error(path.string() + ":" + std::to_string(lineno) + ": bad timestamp '" + ts + "'");
        const double v = std::strtod(vs.c_str(), &end);
        if (end == vs.c_str() || *end != '\0')
            throw io_error(path.string() + ":" + std::to_string(lineno) + ": bad rss value '" + vs + "'");
        trace.timestamps.push_back(t);
        trace.values.push_back(v);
    }
    return trace;
}

void write_trace_csv(const RssTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write trace file: " + path.string());
    out << "t_s,rss_dbm\n";
    char buf[80];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", trace.timestamps[i], trace.values[i]);
        out << buf;
    }
    if (!out) throw io_error("short write: " + path.string());
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stdev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace securetag
