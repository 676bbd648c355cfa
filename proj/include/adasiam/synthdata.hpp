// Deterministic synthetic video sequences: a textured target drifting in
// appearance while bouncing around a static procedural background, with
// scripted occlusion events and look-alike distractors. Dataset IO is one
// binary PNM per frame plus JSONL annotations and the generating spec.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adasiam/image.hpp"

namespace adasiam {

struct TargetSpec {
    std::string kind = "ellipse";  // ellipse | rectangle | blob
    double w = 24.0, h = 20.0;     // initial box size, px
    std::uint64_t texture_seed = 0;
};

struct MotionSpec {
    double velocity = 1.5;  // px per frame
    int turn_every = 0;     // 0 = never change heading
};

struct DriftSpec {
    double rate = 0.0;  // appearance morph progress per frame
};

struct OcclusionSpec {
    int start = 0, end = 0;  // [start, end)
    double coverage = 0.8;   // fraction of the target box hidden
};

struct ClutterSpec {
    int count = 0;
    double contrast = 0.5;  // 0 = invisible, 1 = full target texture
};

struct SequenceSpec {
    int length = 120;
    int frame_side = 96;
    TargetSpec target;
    MotionSpec motion;
    DriftSpec drift;
    std::vector<OcclusionSpec> occlusions;
    ClutterSpec clutter;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument
};

struct Annotation {
    int frame = 0;
    BBox box;
    bool occluded = false;
    bool drift_event = false;
};

// Integer pixel rectangle [x0,x1) x [y0,y1); kept for occluder masks.
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct Sequence {
    std::vector<Image> frames;
    std::vector<Annotation> annotations;
    std::vector<std::optional<PixelRect>> occluders;  // in-memory only
};

Sequence generate_sequence(const SequenceSpec& spec);

// JSON (de)serialization of specs. `where` names the source in parse errors.
std::string spec_to_json(const SequenceSpec& spec);
SequenceSpec spec_from_json(const std::string& text, const std::string& where);

// PNM P5 (1 channel) / P6 (3 channels). Parse errors name file and line.
void write_pnm(const std::string& path, const Image& img);
Image read_pnm(const std::string& path);

// One sequence directory: frame_%06d.pnm + annotations.jsonl + spec.json.
void write_sequence(const std::string& dir, const SequenceSpec& spec, const Sequence& seq);
Sequence read_sequence(const std::string& dir);
SequenceSpec read_sequence_spec(const std::string& dir);

// Sorted sequence subdirectories of a dataset directory.
std::vector<std::string> list_sequences(const std::string& dataset_dir);

// Built-in corpora: "train" (60x120), "val" (12x100), "drift" (20x200 with
// two occlusion events per sequence).
std::vector<SequenceSpec> preset_specs(const std::string& preset, std::uint64_t base_seed);

}  // namespace adasiam
