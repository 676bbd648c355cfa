#include "adasiam/change.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "adasiam/rng.hpp"

namespace adasiam {

using nlohmann::json;

namespace {

double nearest_rank(const std::vector<double>& sorted, double percentile) {
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
    return sorted[std::max<std::size_t>(rank, 1) - 1];
}

void check_stats(const CalibrationStats& st, const std::string& where) {
    if (!std::isfinite(st.e_min) || !std::isfinite(st.e_max) || !std::isfinite(st.tau))
        throw std::invalid_argument(where + ": non-finite calibration value");
    if (st.e_min < 0.0) throw std::invalid_argument(where + ": e_min must be nonnegative");
    if (st.e_max <= st.e_min)
        throw std::invalid_argument(where + ": degenerate distribution (e_max <= e_min)");
    if (st.tau <= 0.0 || st.tau >= 1.0)
        throw std::invalid_argument(where + ": tau must lie in (0,1)");
}

}  // namespace

CalibrationStats stats_from_errors(std::vector<double> errors, double tau) {
    if (errors.size() < 50)
        throw std::invalid_argument("calibrate: need at least 50 clips, have " +
                                    std::to_string(errors.size()));
    std::sort(errors.begin(), errors.end());
    CalibrationStats st;
    st.e_min = nearest_rank(errors, 1.0);
    st.e_max = nearest_rank(errors, 99.0);
    st.tau = tau;
    check_stats(st, "calibrate");
    return st;
}

CalibrationStats calibrate(const GeneratorParams& gen, const std::vector<Sequence>& validation,
                           const CalibConfig& config) {
    if (config.k < 1) throw std::invalid_argument("calibrate: k must be positive");
    Rng root(config.seed);
    std::vector<double> errors;
    std::uint64_t clip_index = 0;
    for (const Sequence& seq : validation) {
        const int n = static_cast<int>(seq.frames.size());
        for (int a = 0; a + config.k <= n; ++a, ++clip_index) {
            Rng jit = root.substream("calib.jitter", clip_index);
            std::vector<Image> clip;
            clip.reserve(static_cast<std::size_t>(config.k));
            for (int j = 0; j < config.k; ++j) {
                BBox box = seq.annotations[static_cast<std::size_t>(a + j)].box;
                box.x += jit.uniform(-config.jitter_px, config.jitter_px);
                box.y += jit.uniform(-config.jitter_px, config.jitter_px);
                clip.push_back(crop_and_resize(seq.frames[static_cast<std::size_t>(a + j)], box,
                                               config.template_context, config.template_side));
            }
            errors.push_back(reconstruction_error(generate_next(gen, clip), clip.back()));
        }
    }
    if (static_cast<int>(errors.size()) < config.min_clips)
        throw std::invalid_argument("calibrate: need at least " +
                                    std::to_string(config.min_clips) + " clips, have " +
                                    std::to_string(errors.size()));
    return stats_from_errors(std::move(errors), config.tau);
}

double regularity(double e, const CalibrationStats& stats) {
    double s = 1.0 - (e - stats.e_min) / stats.e_max;
    return std::clamp(s, 0.0, 1.0);
}

bool detect_change(double s, double tau) { return s < tau; }

void write_calibration(const std::string& path, const CalibrationStats& stats) {
    check_stats(stats, "write_calibration");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_calibration: cannot open " + path);
    char buf[192];
    std::snprintf(buf, sizeof buf, "{\"e_min\":%.17g,\"e_max\":%.17g,\"tau\":%.17g}\n",
                  stats.e_min, stats.e_max, stats.tau);
    out << buf;
}

CalibrationStats read_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_calibration: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error("read_calibration: " + path + ": " + e.what());
    }
    CalibrationStats st;
    for (const char* field : {"e_min", "e_max", "tau"})
        if (!j.contains(field))
            throw std::runtime_error("read_calibration: " + path + ": missing field '" +
                                     field + "'");
    st.e_min = j.at("e_min").get<double>();
    st.e_max = j.at("e_max").get<double>();
    st.tau = j.at("tau").get<double>();
    check_stats(st, "read_calibration: " + path);
    return st;
}

TemplateBuffer::TemplateBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("template buffer: capacity must be positive");
}

void TemplateBuffer::push(const Image& t) {
    if (!slots_.empty() && !t.same_shape(slots_.front()))
        throw std::invalid_argument("template buffer: shape mismatch on push");
    had_eviction_ = full();
    if (had_eviction_) {
        evicted_ = std::move(slots_.front());
        slots_.erase(slots_.begin());
    }
    slots_.push_back(t);
    pending_ = true;
}

void TemplateBuffer::revoke_last() {
    if (!pending_) throw std::logic_error("template buffer: no push pending revocation");
    slots_.pop_back();
    if (had_eviction_) slots_.insert(slots_.begin(), std::move(evicted_));
    pending_ = false;
    had_eviction_ = false;
}

}  // namespace adasiam
