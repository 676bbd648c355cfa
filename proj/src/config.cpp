#include "adasiam/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace adasiam {

namespace {

struct Field {
    const char* key;
    std::function<std::string(const ToolConfig&)> get;
    std::function<void(ToolConfig&, const std::string&)> set;  // throws on bad value
};

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw std::invalid_argument("expected a finite real, got '" + s + "'");
    return v;
}

template <class Int>
Int parse_int(const std::string& s) {
    Int v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("expected an integer, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw std::invalid_argument("expected true or false, got '" + s + "'");
}

Field field(const char* key, int ToolConfig::*m) {
    return {key, [m](const ToolConfig& c) { return std::to_string(c.*m); },
            [m](ToolConfig& c, const std::string& v) { c.*m = parse_int<int>(v); }};
}

Field field(const char* key, std::uint64_t ToolConfig::*m) {
    return {key, [m](const ToolConfig& c) { return std::to_string(c.*m); },
            [m](ToolConfig& c, const std::string& v) { c.*m = parse_int<std::uint64_t>(v); }};
}

Field field(const char* key, double ToolConfig::*m) {
    return {key, [m](const ToolConfig& c) { return fmt_double(c.*m); },
            [m](ToolConfig& c, const std::string& v) { c.*m = parse_double(v); }};
}

Field field(const char* key, bool ToolConfig::*m) {
    return {key, [m](const ToolConfig& c) { return std::string(c.*m ? "true" : "false"); },
            [m](ToolConfig& c, const std::string& v) { c.*m = parse_bool(v); }};
}

Field mode_field(const char* key, std::string ToolConfig::*m) {
    return {key, [m](const ToolConfig& c) { return c.*m; },
            [m](ToolConfig& c, const std::string& v) {
                update_mode_from_string(v);  // validate eagerly
                c.*m = v;
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        field("k", &ToolConfig::k),
        field("tau", &ToolConfig::tau),
        field("alpha", &ToolConfig::alpha),
        field("context", &ToolConfig::context),
        field("template_side", &ToolConfig::template_side),
        field("search_side", &ToolConfig::search_side),
        field("residual", &ToolConfig::residual),
        field("gamma", &ToolConfig::gamma),
        field("lambda", &ToolConfig::lambda),
        mode_field("update_mode", &ToolConfig::update_mode),
        field("correlation_bias", &ToolConfig::correlation_bias),
        field("seed", &ToolConfig::seed),
        field("gen_hidden", &ToolConfig::gen_hidden),
        field("gen_epochs", &ToolConfig::gen_epochs),
        field("gen_batches_per_epoch", &ToolConfig::gen_batches_per_epoch),
        field("gen_batch", &ToolConfig::gen_batch),
        field("gen_lr", &ToolConfig::gen_lr),
        field("disc_lr", &ToolConfig::disc_lr),
        field("adv_weight", &ToolConfig::adv_weight),
        field("gen_min_clips", &ToolConfig::gen_min_clips),
        field("gen_max_val_clips", &ToolConfig::gen_max_val_clips),
        field("adapt_hidden", &ToolConfig::adapt_hidden),
        field("adapt_epochs", &ToolConfig::adapt_epochs),
        field("adapt_batch", &ToolConfig::adapt_batch),
        field("adapt_lr", &ToolConfig::adapt_lr),
        field("adapt_min_samples", &ToolConfig::adapt_min_samples),
        field("adapt_max_samples", &ToolConfig::adapt_max_samples),
        field("jitter_px", &ToolConfig::jitter_px),
        field("calib_min_clips", &ToolConfig::calib_min_clips),
    };
    return table;
}

const Field& find_field(const std::string& key) {
    for (const Field& f : fields())
        if (key == f.key) return f;
    throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

void set_config_key(ToolConfig& config, const std::string& key, const std::string& value) {
    try {
        find_field(key).set(config, value);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
}

ToolConfig parse_config_text(const std::string& text, const std::string& where,
                             ToolConfig base) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(where + ":" + std::to_string(lineno) +
                                        ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument(where + ":" + std::to_string(lineno) + ": empty key");
        try {
            find_field(key).set(base, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(where + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

ToolConfig read_config_file(const std::string& path, ToolConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path, base);
}

std::string dump_config(const ToolConfig& config) {
    std::string out;
    for (const Field& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(config);
        out += '\n';
    }
    return out;
}

TrackerConfig tracker_config(const ToolConfig& c) {
    TrackerConfig t;
    t.k = c.k;
    t.tau = c.tau;
    t.alpha = c.alpha;
    t.context = c.context;
    t.template_side = c.template_side;
    t.search_side = c.search_side;
    t.residual = c.residual;
    t.gamma = c.gamma;
    t.lambda = c.lambda;
    t.update_mode = update_mode_from_string(c.update_mode);
    return t;
}

GenTrainConfig gen_train_config(const ToolConfig& c) {
    GenTrainConfig g;
    g.k = c.k;
    g.hidden = c.gen_hidden;
    g.template_side = c.template_side;
    g.template_context = tracker_config(c).template_context();
    g.epochs = c.gen_epochs;
    g.batches_per_epoch = c.gen_batches_per_epoch;
    g.batch = c.gen_batch;
    g.lr_gen = c.gen_lr;
    g.lr_disc = c.disc_lr;
    g.adv_weight = c.adv_weight;
    g.min_clips = c.gen_min_clips;
    g.max_val_clips = c.gen_max_val_clips;
    g.seed = c.seed;
    return g;
}

AdaptTrainConfig adapt_train_config(const ToolConfig& c) {
    AdaptTrainConfig a;
    a.k = c.k;
    a.template_side = c.template_side;
    a.template_context = tracker_config(c).template_context();
    a.search_side = c.search_side;
    a.search_context = c.context;
    a.lambda = c.lambda;
    a.gamma = c.gamma;
    a.residual = c.residual;
    a.hidden = c.adapt_hidden;
    a.epochs = c.adapt_epochs;
    a.batch = c.adapt_batch;
    a.lr = c.adapt_lr;
    a.min_samples = c.adapt_min_samples;
    a.max_samples = c.adapt_max_samples;
    a.seed = c.seed;
    return a;
}

CalibConfig calib_config(const ToolConfig& c) {
    CalibConfig k;
    k.k = c.k;
    k.tau = c.tau;
    k.jitter_px = c.jitter_px;
    k.template_side = c.template_side;
    k.template_context = tracker_config(c).template_context();
    k.min_clips = c.calib_min_clips;
    k.seed = c.seed;
    return k;
}

}  // namespace adasiam
