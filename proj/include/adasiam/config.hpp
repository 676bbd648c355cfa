#pragma once

#include <cstdint>
#include <string>

#include "adasiam/adapt.hpp"
#include "adasiam/change.hpp"
#include "adasiam/generator.hpp"
#include "adasiam/tracker.hpp"

namespace adasiam {

// Every tunable the tools expose, in one flat key = value namespace. The
// defaults here are the shipped defaults; a config file overrides them and
// command-line flags override the file.
struct ToolConfig {
    // tracker
    int k = 4;
    double tau = 0.5;
    double alpha = 0.5;
    double context = 2.0;
    int template_side = 64;
    int search_side = 128;
    bool residual = true;
    double gamma = 0.1;
    double lambda = 10.0;
    std::string update_mode = "generative+blend+change";
    double correlation_bias = 0.0;
    std::uint64_t seed = 1;
    // generator training
    int gen_hidden = 16;
    int gen_epochs = 8;
    int gen_batches_per_epoch = 50;
    int gen_batch = 16;
    double gen_lr = 1e-3;
    double disc_lr = 2e-4;
    double adv_weight = 0.05;
    int gen_min_clips = 500;
    int gen_max_val_clips = 200;
    // adapter training
    int adapt_hidden = 16;
    int adapt_epochs = 10;
    int adapt_batch = 16;
    double adapt_lr = 1e-3;
    int adapt_min_samples = 50;
    int adapt_max_samples = 2000;
    // calibration
    double jitter_px = 5.0;
    int calib_min_clips = 50;

    bool operator==(const ToolConfig&) const = default;
};

// `key = value` lines, '#' starts a comment, blank lines ignored. Unknown
// keys and unparseable values raise errors naming `where` and the line.
ToolConfig parse_config_text(const std::string& text, const std::string& where,
                             ToolConfig base = {});
ToolConfig read_config_file(const std::string& path, ToolConfig base = {});

// One `key = value` line per field, parseable by parse_config_text; doubles
// use shortest round-trip formatting.
std::string dump_config(const ToolConfig& config);

// Single-key override (same value syntax as the file format).
void set_config_key(ToolConfig& config, const std::string& key, const std::string& value);

// Projections onto the module configs; derived values (template_context)
// are computed here so they cannot drift between tools.
TrackerConfig tracker_config(const ToolConfig& c);
GenTrainConfig gen_train_config(const ToolConfig& c);
AdaptTrainConfig adapt_train_config(const ToolConfig& c);
CalibConfig calib_config(const ToolConfig& c);

}  // namespace adasiam
