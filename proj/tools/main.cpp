// Command-line surface: dataset synthesis, generator/adapter training,
// change-score calibration, single-sequence tracking, protocol evaluation,
// and the update-mode ablation grid.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adasiam/adapt.hpp"
#include "adasiam/backbone.hpp"
#include "adasiam/change.hpp"
#include "adasiam/checkpoint.hpp"
#include "adasiam/config.hpp"
#include "adasiam/generator.hpp"
#include "adasiam/metrics.hpp"
#include "adasiam/report.hpp"
#include "adasiam/synthdata.hpp"
#include "adasiam/tracker.hpp"

namespace fs = std::filesystem;
using namespace adasiam;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Options shared by every subcommand.
struct Common {
    std::string config_path;
    std::vector<std::string> sets;  // key=value overrides
    std::optional<std::uint64_t> seed;
    bool dump = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "flat key = value config file");
    cmd->add_option("--set", c.sets, "override one config key (key=value), repeatable");
    cmd->add_option("--seed", c.seed, "root random seed (overrides config)");
    cmd->add_flag("--dump-config", c.dump, "print the effective config and exit");
}

ToolConfig effective_config(const Common& c) {
    ToolConfig cfg;
    if (!c.config_path.empty()) cfg = read_config_file(c.config_path, cfg);
    for (const std::string& kv : c.sets) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        while (!value.empty() && value.front() == ' ') value.erase(value.begin());
        set_config_key(cfg, key, value);
    }
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

// Returns true if the caller should stop (dump requested).
bool maybe_dump(const Common& c, const ToolConfig& cfg) {
    if (!c.dump) return false;
    std::fputs(dump_config(cfg).c_str(), stdout);
    return true;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void require_artifact(const std::string& path, const std::string& what) {
    if (!fs::exists(path))
        throw std::runtime_error("missing " + what + ": " + path);
}

struct ModelPaths {
    std::string gen_prefix;
    std::string adapter_prefix;
    std::string stats_path;
};

void add_model_options(CLI::App* cmd, ModelPaths& p) {
    cmd->add_option("--gen", p.gen_prefix, "generator checkpoint prefix");
    cmd->add_option("--adapter", p.adapter_prefix, "adapter checkpoint prefix");
    cmd->add_option("--stats", p.stats_path, "calibration stats JSON");
}

TrackerModels load_models(const ModelPaths& paths, const ToolConfig& cfg) {
    UpdateMode mode = update_mode_from_string(cfg.update_mode);
    bool wants_gen = mode == UpdateMode::kGenerative || mode == UpdateMode::kGenerativeBlend ||
                     mode == UpdateMode::kGenerativeBlendChange;
    bool wants_adapter = wants_gen || mode == UpdateMode::kUpdatenetStyle;

    TrackerModels models;
    models.backbone = make_backbone(cfg.seed);
    if (wants_gen) {
        if (paths.gen_prefix.empty())
            throw std::runtime_error("update mode '" + cfg.update_mode +
                                     "' requires a generator checkpoint (--gen)");
        require_artifact(paths.gen_prefix + ".manifest", "checkpoint");
        models.generator =
            generator_from_params(load_checkpoint(paths.gen_prefix), cfg.template_side);
        if (paths.stats_path.empty())
            throw std::runtime_error("update mode '" + cfg.update_mode +
                                     "' requires calibration stats (--stats)");
        require_artifact(paths.stats_path, "calibration file");
        models.stats = read_calibration(paths.stats_path);
    }
    if (wants_adapter) {
        if (paths.adapter_prefix.empty())
            throw std::runtime_error("update mode '" + cfg.update_mode +
                                     "' requires an adapter checkpoint (--adapter)");
        require_artifact(paths.adapter_prefix + ".manifest", "checkpoint");
        models.adapter = adapter_from_params(load_checkpoint(paths.adapter_prefix));
    }
    models.correlation_bias = cfg.correlation_bias;
    return models;
}

std::vector<Sequence> load_dataset(const std::string& dir) {
    std::vector<Sequence> out;
    for (const std::string& name : list_sequences(dir))
        out.push_back(read_sequence((fs::path(dir) / name).string()));
    if (out.empty()) throw std::runtime_error("no sequences found in " + dir);
    return out;
}

void write_trajectory(const std::string& path, const std::vector<TrackerOutput>& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const TrackerOutput& t : traj)
        out << "{\"frame\": " << t.frame_index << ", \"bbox\": [" << fixed6(t.bbox.x) << ", "
            << fixed6(t.bbox.y) << ", " << fixed6(t.bbox.w) << ", " << fixed6(t.bbox.h)
            << "], \"score\": " << fixed6(t.peak_score)
            << ", \"regularity\": " << fixed6(t.regularity)
            << ", \"change\": " << (t.change ? "true" : "false") << "}\n";
    if (!out) throw std::runtime_error("cannot write " + path);
}

std::vector<std::pair<std::string, std::string>> echo_config(const ToolConfig& cfg,
                                                             const std::string& dataset) {
    std::vector<std::pair<std::string, std::string>> echo;
    echo.emplace_back("dataset", dataset);
    std::istringstream in(dump_config(cfg));
    std::string line;
    while (std::getline(in, line)) {
        std::size_t eq = line.find(" = ");
        if (eq != std::string::npos) echo.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
    return echo;
}

SequenceResult eval_one(const std::string& name, const Sequence& seq,
                        const TrackerModels& models, const TrackerConfig& tcfg, bool timings) {
    std::vector<BBox> gt;
    gt.reserve(seq.annotations.size());
    for (const Annotation& a : seq.annotations) gt.push_back(a.box);

    auto t0 = std::chrono::steady_clock::now();
    VotResult vot = run_vot_protocol(seq.frames, gt, models, tcfg);
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    SequenceResult r;
    r.name = name;
    r.overlaps = vot.overlaps;
    r.failures = vot.failures;
    r.segment_overlaps = vot.segment_overlaps;
    std::vector<BBox> pred;
    for (const TrackerOutput& t : vot.trajectory) {
        r.regularity.push_back(t.regularity);
        r.change.push_back(t.change);
        pred.push_back(t.bbox);
    }
    r.metrics.success_auc = success_auc(r.overlaps);
    r.metrics.precision_at_20 = precision_at(pred, gt);
    r.metrics.failures = vot.failures;
    RobustnessEao re =
        robustness_and_eao(vot.segment_overlaps, vot.failures, (int)seq.frames.size());
    r.metrics.robustness = re.robustness;
    r.metrics.eao_lite = re.eao_lite;
    r.metrics.runtime_seconds = timings ? elapsed : 0.0;
    return r;
}

EvalReport eval_dataset(const std::string& dataset, const ModelPaths& paths,
                        const ToolConfig& cfg, bool timings) {
    TrackerModels models = load_models(paths, cfg);
    TrackerConfig tcfg = tracker_config(cfg);
    EvalReport rep;
    for (const std::string& name : list_sequences(dataset)) {
        Sequence seq = read_sequence((fs::path(dataset) / name).string());
        rep.sequences.push_back(eval_one(name, seq, models, tcfg, timings));
    }
    if (rep.sequences.empty()) throw std::runtime_error("no sequences found in " + dataset);
    rep.config_echo = echo_config(cfg, dataset);
    return rep;
}

int run_synth(const Common& common, const std::string& out_dir, const std::string& preset,
              const std::vector<std::string>& spec_files) {
    ToolConfig cfg = effective_config(common);
    if (maybe_dump(common, cfg)) return 0;
    if (preset.empty() == spec_files.empty())
        throw UsageError("synth needs exactly one of --preset or --spec");

    std::vector<SequenceSpec> specs;
    std::vector<std::string> names;
    if (!preset.empty()) {
        specs = preset_specs(preset, cfg.seed);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "seq_%03zu", i);
            names.push_back(buf);
        }
    } else {
        for (const std::string& file : spec_files) {
            std::ifstream in(file, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open " + file);
            std::ostringstream ss;
            ss << in.rdbuf();
            specs.push_back(spec_from_json(ss.str(), file));
            names.push_back(fs::path(file).stem().string());
        }
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Sequence seq = generate_sequence(specs[i]);
        write_sequence((fs::path(out_dir) / names[i]).string(), specs[i], seq);
    }
    std::printf("wrote %zu sequences to %s\n", specs.size(), out_dir.c_str());
    return 0;
}

int run_train_gen(const Common& common, const std::string& data, const std::string& out,
                  const std::string& log) {
    ToolConfig cfg = effective_config(common);
    if (maybe_dump(common, cfg)) return 0;
    GenTrainConfig gcfg = gen_train_config(cfg);
    gcfg.log_path = log;
    auto crops = load_template_crops(data, gcfg.template_side, gcfg.template_context);
    GenTrainResult result = train_generator(crops, gcfg);
    save_checkpoint(out, result.gen.params);
    std::printf("val_mse %s (untrained %s)\n", fixed6(result.final_val_mse).c_str(),
                fixed6(result.untrained_val_mse).c_str());
    std::printf("saved generator checkpoint %s.{manifest,blob}\n", out.c_str());
    return 0;
}

int run_train_adapt(const Common& common, const std::string& data,
                    const std::string& gen_prefix, const std::string& out,
                    const std::string& log) {
    ToolConfig cfg = effective_config(common);
    if (maybe_dump(common, cfg)) return 0;
    require_artifact(gen_prefix + ".manifest", "checkpoint");
    GeneratorParams gen = generator_from_params(load_checkpoint(gen_prefix), cfg.template_side);
    AdaptTrainConfig acfg = adapt_train_config(cfg);
    acfg.log_path = log;
    acfg.checkpoint_prefix = out;
    BackboneParams backbone = make_backbone(cfg.seed);
    AdaptTrainResult result = train_adapter(gen, backbone, load_dataset(data), acfg);
    std::printf("constraint_rate %s -> %s\n", fixed6(result.constraint_rate_before).c_str(),
                fixed6(result.constraint_rate_after).c_str());
    std::printf("saved adapter checkpoint %s.{manifest,blob}\n", out.c_str());
    return 0;
}

int run_calibrate(const Common& common, const std::string& data, const std::string& gen_prefix,
                  const std::string& out) {
    ToolConfig cfg = effective_config(common);
    if (maybe_dump(common, cfg)) return 0;
    require_artifact(gen_prefix + ".manifest", "checkpoint");
    GeneratorParams gen = generator_from_params(load_checkpoint(gen_prefix), cfg.template_side);
    CalibrationStats stats = calibrate(gen, load_dataset(data), calib_config(cfg));
    write_calibration(out, stats);
    std::printf("e_min %s e_max %s tau %s -> %s\n", fixed6(stats.e_min).c_str(),
                fixed6(stats.e_max).c_str(), fixed6(stats.tau).c_str(), out.c_str());
    return 0;
}

int run_track(const Common& common, const std::string& seq_dir, const ModelPaths& paths,
              const std::string& out) {
    ToolConfig cfg = effective_config(common);
    if (maybe_dump(common, cfg)) return 0;
    Sequence seq = read_sequence(seq_dir);
    if (seq.frames.empty()) throw std::runtime_error("no frames in " + seq_dir);
    TrackerModels models = load_models(paths, cfg);
    auto traj = run(seq.frames, seq.annotations.front().box, models, tracker_config(cfg));
    write_trajectory(out, traj);
    std::printf("tracked %zu frames -> %s\n", traj.size(), out.c_str());
    return 0;
}

int run_eval(const Common& common, const std::string& data, const ModelPaths& paths,
             const std::string& out, bool timings) {
    ToolConfig cfg = effective_config(common);
    if (maybe_dump(common, cfg)) return 0;
    EvalReport rep = eval_dataset(data, paths, cfg, timings);
    emit_report(rep, out);
    MetricsReport agg = aggregate_metrics(rep.sequences);
    std::printf("sequences %zu auc %s eao_lite %s robustness %s -> %s\n", rep.sequences.size(),
                fixed6(agg.success_auc).c_str(), fixed6(agg.eao_lite).c_str(),
                fixed6(agg.robustness).c_str(), out.c_str());
    return 0;
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : csv) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

int run_ablate(const Common& common, const std::string& data, const ModelPaths& paths,
               const std::string& out_dir, const std::string& modes_csv,
               const std::string& taus_csv, const std::string& alphas_csv, bool timings) {
    ToolConfig base = effective_config(common);
    if (maybe_dump(common, base)) return 0;

    std::vector<std::string> modes = split_csv(modes_csv);
    std::vector<std::string> taus = split_csv(taus_csv);
    std::vector<std::string> alphas = split_csv(alphas_csv);
    if (modes.empty()) {
        modes = {"frozen",     "moving_average",    "updatenet_style",
                 "generative", "generative+blend",  "generative+blend+change"};
        // Default sweep arms around the mode rows (which already cover 0.5),
        // unless the caller picked explicit arms anywhere.
        if (modes_csv.empty() && taus_csv.empty() && alphas_csv.empty()) {
            taus = {"0.3", "0.7"};
            alphas = {"0.25", "0.75"};
        }
    }
    for (const std::string& m : modes) update_mode_from_string(m);  // usage check up front

    struct Arm {
        std::string label;
        ToolConfig cfg;
    };
    std::vector<Arm> arms;
    for (const std::string& m : modes) {
        ToolConfig cfg = base;
        cfg.update_mode = m;
        arms.push_back({m, cfg});
    }
    for (const std::string& t : taus) {
        ToolConfig cfg = base;
        cfg.update_mode = "generative+blend+change";
        set_config_key(cfg, "tau", t);
        arms.push_back({"generative+blend+change tau=" + t, cfg});
    }
    for (const std::string& a : alphas) {
        ToolConfig cfg = base;
        cfg.update_mode = "generative+blend";
        set_config_key(cfg, "alpha", a);
        arms.push_back({"generative+blend alpha=" + a, cfg});
    }

    fs::create_directories(out_dir);
    std::vector<AblationRow> rows;
    for (const Arm& arm : arms) {
        EvalReport rep = eval_dataset(data, paths, arm.cfg, timings);
        MetricsReport agg = aggregate_metrics(rep.sequences);
        rows.push_back({arm.label, agg.eao_lite, agg.robustness});
        std::printf("%s eao_lite %s robustness %s\n", arm.label.c_str(),
                    fixed6(agg.eao_lite).c_str(), fixed6(agg.robustness).c_str());
    }
    write_table(rows, (fs::path(out_dir) / "table.csv").string());
    std::printf("wrote %s\n", (fs::path(out_dir) / "table.csv").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive siamese tracker toolkit"};
    app.require_subcommand(0, 1);
    bool top_dump = false;
    app.add_flag("--dump-config", top_dump, "print the default config and exit");

    Common c_synth, c_tgen, c_tadapt, c_calib, c_track, c_eval, c_ablate;
    std::string synth_out, synth_preset;
    std::vector<std::string> synth_specs;
    CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset");
    add_common(synth, c_synth);
    synth->add_option("--out", synth_out, "dataset directory")->required();
    synth->add_option("--preset", synth_preset, "train, val, or drift");
    synth->add_option("--spec", synth_specs, "sequence spec JSON file, repeatable");

    std::string tgen_data, tgen_out, tgen_log;
    CLI::App* tgen = app.add_subcommand("train-gen", "train the template generator");
    add_common(tgen, c_tgen);
    tgen->add_option("--data", tgen_data, "training dataset directory")->required();
    tgen->add_option("--out", tgen_out, "checkpoint prefix to write")->required();
    tgen->add_option("--log", tgen_log, "JSONL epoch log path");

    std::string tadapt_data, tadapt_gen, tadapt_out, tadapt_log;
    CLI::App* tadapt = app.add_subcommand("train-adapt", "train the template adapter");
    add_common(tadapt, c_tadapt);
    tadapt->add_option("--data", tadapt_data, "training dataset directory")->required();
    tadapt->add_option("--gen", tadapt_gen, "generator checkpoint prefix")->required();
    tadapt->add_option("--out", tadapt_out, "checkpoint prefix to write")->required();
    tadapt->add_option("--log", tadapt_log, "JSONL epoch log path");

    std::string calib_data, calib_gen, calib_out;
    CLI::App* calib = app.add_subcommand("calibrate", "calibrate the regularity score");
    add_common(calib, c_calib);
    calib->add_option("--data", calib_data, "validation dataset directory")->required();
    calib->add_option("--gen", calib_gen, "generator checkpoint prefix")->required();
    calib->add_option("--out", calib_out, "calibration JSON to write")->required();

    std::string track_seq, track_out;
    ModelPaths track_models;
    CLI::App* track = app.add_subcommand("track", "track one sequence to a trajectory file");
    add_common(track, c_track);
    track->add_option("--seq", track_seq, "sequence directory")->required();
    track->add_option("--out", track_out, "trajectory JSONL to write")->required();
    add_model_options(track, track_models);

    std::string eval_data, eval_out;
    ModelPaths eval_models;
    bool eval_timings = false;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a dataset under the VOT protocol");
    add_common(eval, c_eval);
    eval->add_option("--data", eval_data, "evaluation dataset directory")->required();
    eval->add_option("--out", eval_out, "report directory")->required();
    add_model_options(eval, eval_models);
    eval->add_flag("--timings", eval_timings, "record wall-clock runtimes in the report");

    std::string abl_data, abl_out, abl_modes, abl_taus, abl_alphas;
    ModelPaths abl_models;
    bool abl_timings = false;
    CLI::App* ablate = app.add_subcommand("ablate", "update-mode and tau/alpha sweep grid");
    add_common(ablate, c_ablate);
    ablate->add_option("--data", abl_data, "evaluation dataset directory")->required();
    ablate->add_option("--out", abl_out, "output directory for table.csv")->required();
    add_model_options(ablate, abl_models);
    ablate->add_option("--modes", abl_modes, "comma-separated update modes (default: all)");
    ablate->add_option("--taus", abl_taus,
                       "comma-separated change thresholds to sweep (default 0.3,0.7)");
    ablate->add_option("--alphas", abl_alphas,
                       "comma-separated blend weights to sweep (default 0.25,0.75)");
    ablate->add_flag("--timings", abl_timings, "record wall-clock runtimes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return run_synth(c_synth, synth_out, synth_preset, synth_specs);
        if (tgen->parsed()) return run_train_gen(c_tgen, tgen_data, tgen_out, tgen_log);
        if (tadapt->parsed())
            return run_train_adapt(c_tadapt, tadapt_data, tadapt_gen, tadapt_out, tadapt_log);
        if (calib->parsed()) return run_calibrate(c_calib, calib_data, calib_gen, calib_out);
        if (track->parsed()) return run_track(c_track, track_seq, track_models, track_out);
        if (eval->parsed())
            return run_eval(c_eval, eval_data, eval_models, eval_out, eval_timings);
        if (ablate->parsed())
            return run_ablate(c_ablate, abl_data, abl_models, abl_out, abl_modes, abl_taus,
                              abl_alphas, abl_timings);
        if (top_dump) {
            std::fputs(dump_config(ToolConfig{}).c_str(), stdout);
            return 0;
        }
        std::fputs(app.help().c_str(), stderr);
        return 1;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
