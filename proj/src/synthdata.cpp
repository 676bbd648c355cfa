#include "adasiam/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "adasiam/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace adasiam {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Sinusoidal patch texture; all appearance drift is a lerp of these knobs.
struct TextureParams {
    double base = 128, amp = 30, ku = 3, kv = 4, phase = 0;
    double wob1 = 0, wob2 = 0;  // blob outline wobble phases (not lerped)
};

TextureParams draw_texture(Rng& rng) {
    TextureParams t;
    t.base = rng.bernoulli(0.5) ? rng.uniform(25.0, 75.0) : rng.uniform(180.0, 230.0);
    t.amp = rng.uniform(18.0, 45.0);
    t.ku = rng.uniform(2.0, 7.0);
    t.kv = rng.uniform(2.0, 7.0);
    t.phase = rng.uniform(0.0, 2.0 * kPi);
    t.wob1 = rng.uniform(0.0, 2.0 * kPi);
    t.wob2 = rng.uniform(0.0, 2.0 * kPi);
    return t;
}

TextureParams lerp_texture(const TextureParams& a, const TextureParams& b, double m) {
    TextureParams t;
    t.base = a.base + m * (b.base - a.base);
    t.amp = a.amp + m * (b.amp - a.amp);
    t.ku = a.ku + m * (b.ku - a.ku);
    t.kv = a.kv + m * (b.kv - a.kv);
    t.phase = a.phase + m * (b.phase - a.phase);
    t.wob1 = a.wob1;
    t.wob2 = a.wob2;
    return t;
}

double texture_value(const TextureParams& t, double u, double v) {
    return t.base + t.amp * std::sin(t.ku * u + t.kv * v + t.phase);
}

// Inside test in box-normalized coordinates u,v in [-1,1].
bool shape_inside(const std::string& kind, const TextureParams& t, double u, double v) {
    if (kind == "rectangle") return std::max(std::fabs(u), std::fabs(v)) <= 1.0;
    double rho = std::sqrt(u * u + v * v);
    if (kind == "ellipse") return rho <= 1.0;
    // blob: wobbled radius, scaled so it never leaves the box
    double phi = std::atan2(v, u);
    double r = (1.0 + 0.28 * std::sin(3.0 * phi + t.wob1) + 0.18 * std::sin(5.0 * phi + t.wob2)) / 1.46;
    return rho <= r;
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

struct ShapeSprite {
    std::string kind;
    TextureParams tex;
    double cx, cy, w, h;
};

void draw_sprite(Image& frame, const ShapeSprite& s, double blend_into_bg) {
    int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.w / 2.0)));
    int x1 = std::min(frame.width, static_cast<int>(std::ceil(s.cx + s.w / 2.0)) + 1);
    int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.h / 2.0)));
    int y1 = std::min(frame.height, static_cast<int>(std::ceil(s.cy + s.h / 2.0)) + 1);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            double u = (x + 0.5 - s.cx) / (s.w / 2.0);
            double v = (y + 0.5 - s.cy) / (s.h / 2.0);
            if (std::fabs(u) > 1.0 || std::fabs(v) > 1.0) continue;
            if (!shape_inside(s.kind, s.tex, u, v)) continue;
            double tex = texture_value(s.tex, u, v);
            double bg = frame.at(y, x, 0);
            frame.at(y, x, 0) = quantize(bg + blend_into_bg * (tex - bg));
        }
}

PixelRect occluder_rect(const BBox& box, double coverage, int frame_side) {
    auto px = [](double v) { return static_cast<int>(std::ceil(v - 0.5)); };
    int cols0 = std::max(0, px(box.x));
    int cols1 = std::min(frame_side, px(box.x + box.w));
    int rows0 = std::max(0, px(box.y));
    int rows1 = std::min(frame_side, px(box.y + box.h));
    int ncols = std::max(1, cols1 - cols0);
    int ncov = std::min(ncols, static_cast<int>(std::ceil(coverage * ncols)));
    PixelRect r;
    r.x0 = cols0 + (ncols - ncov) / 2;
    r.x1 = r.x0 + ncov;
    r.y0 = std::max(0, rows0 - 2);
    r.y1 = std::min(frame_side, rows1 + 2);
    return r;
}

void draw_occluder(Image& frame, const PixelRect& r) {
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x)
            frame.at(y, x, 0) = ((x + y) % 6 < 3) ? 235 : 20;
}

}  // namespace

void SequenceSpec::validate() const {
    if (length < 1) throw std::invalid_argument("spec: length must be >= 1");
    if (frame_side < 16) throw std::invalid_argument("spec: frame_side must be >= 16");
    if (target.kind != "ellipse" && target.kind != "rectangle" && target.kind != "blob")
        throw std::invalid_argument("spec: unknown target kind '" + target.kind + "'");
    if (target.w < 4.0 || target.h < 4.0) throw std::invalid_argument("spec: target size below 4 px");
    if (target.w > frame_side - 2.0 || target.h > frame_side - 2.0)
        throw std::invalid_argument("spec: target does not fit the frame");
    if (motion.velocity < 0.0) throw std::invalid_argument("spec: negative velocity");
    if (drift.rate < 0.0) throw std::invalid_argument("spec: negative drift rate");
    for (const auto& occ : occlusions) {
        if (occ.start < 0 || occ.end > length || occ.start >= occ.end)
            throw std::invalid_argument("spec: occlusion interval outside [0,length)");
        if (!(occ.coverage > 0.0 && occ.coverage <= 1.0))
            throw std::invalid_argument("spec: occlusion coverage outside (0,1]");
    }
    if (clutter.count < 0) throw std::invalid_argument("spec: negative clutter count");
    if (clutter.contrast < 0.0 || clutter.contrast > 1.0)
        throw std::invalid_argument("spec: clutter contrast outside [0,1]");
}

Sequence generate_sequence(const SequenceSpec& spec) {
    spec.validate();
    Rng root(spec.seed);

    // static background
    Rng bg_rng = root.substream("background");
    double f1x = bg_rng.uniform(0.03, 0.12), f1y = bg_rng.uniform(0.03, 0.12);
    double p1 = bg_rng.uniform(0.0, 2.0 * kPi);
    double f2x = bg_rng.uniform(0.03, 0.12), f2y = bg_rng.uniform(0.03, 0.12);
    double p2 = bg_rng.uniform(0.0, 2.0 * kPi);
    Image background(spec.frame_side, spec.frame_side, 1);
    for (int y = 0; y < spec.frame_side; ++y)
        for (int x = 0; x < spec.frame_side; ++x)
            background.at(y, x, 0) =
                quantize(128.0 + 36.0 * std::sin(f1x * x + f1y * y + p1) +
                         24.0 * std::sin(f2x * x - f2y * y + p2));

    Rng tex_rng = root.substream("texture", spec.target.texture_seed);
    TextureParams tex_a = draw_texture(tex_rng);
    const TextureParams initial_tex = tex_a;
    Rng drift_rng = root.substream("drift");
    TextureParams tex_b = draw_texture(drift_rng);
    double morph = 0.0;

    Rng motion_rng = root.substream("motion");
    const double lo_x = spec.target.w / 2.0, hi_x = spec.frame_side - spec.target.w / 2.0;
    const double lo_y = spec.target.h / 2.0, hi_y = spec.frame_side - spec.target.h / 2.0;
    double cx = motion_rng.uniform(lo_x, hi_x);
    double cy = motion_rng.uniform(lo_y, hi_y);
    double heading = motion_rng.uniform(0.0, 2.0 * kPi);
    double vx = spec.motion.velocity * std::cos(heading);
    double vy = spec.motion.velocity * std::sin(heading);

    Rng clutter_rng = root.substream("clutter");
    std::vector<ShapeSprite> distractors;
    const char* kinds[] = {"ellipse", "rectangle", "blob"};
    for (int i = 0; i < spec.clutter.count; ++i) {
        ShapeSprite d;
        d.kind = kinds[clutter_rng.uniform_index(3)];
        d.tex = initial_tex;
        d.tex.wob1 = clutter_rng.uniform(0.0, 2.0 * kPi);
        d.tex.wob2 = clutter_rng.uniform(0.0, 2.0 * kPi);
        d.w = spec.target.w * clutter_rng.uniform(0.8, 1.2);
        d.h = spec.target.h * clutter_rng.uniform(0.8, 1.2);
        double mx = d.w / 2.0 + 2.0, my = d.h / 2.0 + 2.0;
        d.cx = clutter_rng.uniform(mx, spec.frame_side - mx);
        d.cy = clutter_rng.uniform(my, spec.frame_side - my);
        distractors.push_back(d);
    }

    Sequence seq;
    seq.frames.reserve(static_cast<std::size_t>(spec.length));
    seq.annotations.reserve(static_cast<std::size_t>(spec.length));
    seq.occluders.resize(static_cast<std::size_t>(spec.length));

    for (int f = 0; f < spec.length; ++f) {
        bool drift_event = false;
        if (f > 0) {
            if (spec.motion.turn_every > 0 && f % spec.motion.turn_every == 0) {
                double turn = motion_rng.uniform(-1.2, 1.2);
                double nvx = vx * std::cos(turn) - vy * std::sin(turn);
                double nvy = vx * std::sin(turn) + vy * std::cos(turn);
                vx = nvx;
                vy = nvy;
            }
            cx += vx;
            cy += vy;
            while (cx < lo_x || cx > hi_x) {
                if (cx < lo_x) cx = 2.0 * lo_x - cx;
                if (cx > hi_x) cx = 2.0 * hi_x - cx;
                vx = -vx;
            }
            while (cy < lo_y || cy > hi_y) {
                if (cy < lo_y) cy = 2.0 * lo_y - cy;
                if (cy > hi_y) cy = 2.0 * hi_y - cy;
                vy = -vy;
            }
            morph += spec.drift.rate;
            if (morph >= 1.0) {
                morph -= 1.0;
                tex_a = tex_b;
                tex_b = draw_texture(drift_rng);
                drift_event = true;
            }
        }

        Image frame = background;
        for (const auto& d : distractors) draw_sprite(frame, d, spec.clutter.contrast);

        ShapeSprite target{spec.target.kind, lerp_texture(tex_a, tex_b, morph), cx, cy,
                           spec.target.w, spec.target.h};
        draw_sprite(frame, target, 1.0);

        BBox box{cx - spec.target.w / 2.0, cy - spec.target.h / 2.0, spec.target.w, spec.target.h};
        bool occluded = false;
        for (const auto& occ : spec.occlusions) {
            if (f < occ.start || f >= occ.end) continue;
            PixelRect r = occluder_rect(box, occ.coverage, spec.frame_side);
            draw_occluder(frame, r);
            seq.occluders[static_cast<std::size_t>(f)] = r;
            occluded = true;
        }

        seq.frames.push_back(std::move(frame));
        seq.annotations.push_back(Annotation{f, box, occluded, drift_event});
    }
    return seq;
}

std::string spec_to_json(const SequenceSpec& s) {
    std::string out;
    out += "{\n";
    out += "  \"length\": " + std::to_string(s.length) + ",\n";
    out += "  \"frame_side\": " + std::to_string(s.frame_side) + ",\n";
    out += "  \"target\": {\"kind\": \"" + s.target.kind + "\", \"size\": [" + fmt_double(s.target.w) +
           ", " + fmt_double(s.target.h) + "], \"texture_seed\": " + std::to_string(s.target.texture_seed) +
           "},\n";
    out += "  \"motion\": {\"velocity\": " + fmt_double(s.motion.velocity) +
           ", \"turn_every\": " + std::to_string(s.motion.turn_every) + "},\n";
    out += "  \"drift\": {\"rate\": " + fmt_double(s.drift.rate) + "},\n";
    out += "  \"occlusions\": [";
    for (std::size_t i = 0; i < s.occlusions.size(); ++i) {
        const auto& o = s.occlusions[i];
        if (i) out += ", ";
        out += "{\"start\": " + std::to_string(o.start) + ", \"end\": " + std::to_string(o.end) +
               ", \"coverage\": " + fmt_double(o.coverage) + "}";
    }
    out += "],\n";
    out += "  \"clutter\": {\"count\": " + std::to_string(s.clutter.count) +
           ", \"contrast\": " + fmt_double(s.clutter.contrast) + "},\n";
    out += "  \"seed\": " + std::to_string(s.seed) + "\n";
    out += "}\n";
    return out;
}

namespace {

const json& need(const json& j, const char* field, const std::string& where) {
    auto it = j.find(field);
    if (it == j.end())
        throw std::runtime_error(where + ": missing field '" + std::string(field) + "'");
    return *it;
}

}  // namespace

SequenceSpec spec_from_json(const std::string& text, const std::string& where) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(where + ": " + e.what());
    }
    try {
        SequenceSpec s;
        s.length = need(j, "length", where).get<int>();
        s.frame_side = need(j, "frame_side", where).get<int>();
        const json& t = need(j, "target", where);
        s.target.kind = need(t, "kind", where).get<std::string>();
        const json& sz = need(t, "size", where);
        s.target.w = sz.at(0).get<double>();
        s.target.h = sz.at(1).get<double>();
        s.target.texture_seed = need(t, "texture_seed", where).get<std::uint64_t>();
        const json& m = need(j, "motion", where);
        s.motion.velocity = need(m, "velocity", where).get<double>();
        s.motion.turn_every = need(m, "turn_every", where).get<int>();
        s.drift.rate = need(need(j, "drift", where), "rate", where).get<double>();
        for (const json& o : need(j, "occlusions", where)) {
            OcclusionSpec occ;
            occ.start = need(o, "start", where).get<int>();
            occ.end = need(o, "end", where).get<int>();
            occ.coverage = need(o, "coverage", where).get<double>();
            s.occlusions.push_back(occ);
        }
        const json& c = need(j, "clutter", where);
        s.clutter.count = need(c, "count", where).get<int>();
        s.clutter.contrast = need(c, "contrast", where).get<double>();
        s.seed = need(j, "seed", where).get<std::uint64_t>();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw std::runtime_error(where + ": " + e.what());
    }
}

void write_pnm(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("pnm supports 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << (img.channels == 1 ? "P5" : "P6") << '\n'
        << img.width << ' ' << img.height << '\n'
        << "255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw std::runtime_error("short write to " + path);
}

namespace {

// Header token reader with '#' comment support; tracks the line for errors.
struct PnmScanner {
    std::istream& in;
    const std::string& path;
    int line = 1;

    std::string token() {
        std::string tok;
        int c;
        while ((c = in.get()) != EOF) {
            if (c == '#') {
                while ((c = in.get()) != EOF && c != '\n') {}
                if (c == '\n') ++line;
                continue;
            }
            if (c == '\n') {
                ++line;
                continue;
            }
            if (std::isspace(c)) continue;
            break;
        }
        if (c == EOF) throw std::runtime_error(path + ":" + std::to_string(line) + ": truncated header");
        tok.push_back(static_cast<char>(c));
        while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
        if (c == '\n') ++line;
        return tok;
    }

    int number() {
        std::string tok = token();
        try {
            std::size_t used = 0;
            int v = std::stoi(tok, &used);
            if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(line) + ": bad header number '" + tok + "'");
        }
    }
};

}  // namespace

Image read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    PnmScanner sc{in, path};
    std::string magic = sc.token();
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw std::runtime_error(path + ":1: unsupported magic '" + magic + "'");
    int w = sc.number();
    int h = sc.number();
    int maxval = sc.number();
    if (maxval != 255)
        throw std::runtime_error(path + ":" + std::to_string(sc.line) + ": unsupported maxval " +
                                 std::to_string(maxval));
    Image img(h, w, channels);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw std::runtime_error(path + ": truncated pixel data");
    return img;
}

void write_sequence(const std::string& dir, const SequenceSpec& spec, const Sequence& seq) {
    fs::create_directories(dir);
    std::ofstream spec_out(fs::path(dir) / "spec.json", std::ios::binary);
    if (!spec_out) throw std::runtime_error("cannot write " + dir + "/spec.json");
    spec_out << spec_to_json(spec);

    std::ofstream ann(fs::path(dir) / "annotations.jsonl", std::ios::binary);
    if (!ann) throw std::runtime_error("cannot write " + dir + "/annotations.jsonl");
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const Annotation& a = seq.annotations[i];
        ann << "{\"frame\":" << a.frame << ",\"bbox\":[" << fmt_double(a.box.x) << ','
            << fmt_double(a.box.y) << ',' << fmt_double(a.box.w) << ',' << fmt_double(a.box.h)
            << "],\"occluded\":" << (a.occluded ? "true" : "false")
            << ",\"drift_event\":" << (a.drift_event ? "true" : "false") << "}\n";

        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06d.pnm", a.frame);
        write_pnm((fs::path(dir) / name).string(), seq.frames[i]);
    }
}

Sequence read_sequence(const std::string& dir) {
    std::string ann_path = (fs::path(dir) / "annotations.jsonl").string();
    std::ifstream ann(ann_path, std::ios::binary);
    if (!ann) throw std::runtime_error("cannot open " + ann_path);

    Sequence seq;
    std::string line;
    int lineno = 0;
    while (std::getline(ann, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::string where = ann_path + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(where + ": " + e.what());
        }
        try {
            Annotation a;
            a.frame = need(j, "frame", where).get<int>();
            const json& bb = need(j, "bbox", where);
            if (!bb.is_array() || bb.size() != 4)
                throw std::runtime_error(where + ": field 'bbox' must be a 4-array");
            a.box = BBox{bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                         bb[3].get<double>()};
            a.occluded = need(j, "occluded", where).get<bool>();
            a.drift_event = need(j, "drift_event", where).get<bool>();
            seq.annotations.push_back(a);
        } catch (const json::exception& e) {
            throw std::runtime_error(where + ": " + e.what());
        }
    }
    if (seq.annotations.empty()) throw std::runtime_error(ann_path + ": no annotations");

    for (const Annotation& a : seq.annotations) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06d.pnm", a.frame);
        seq.frames.push_back(read_pnm((fs::path(dir) / name).string()));
    }
    seq.occluders.resize(seq.frames.size());
    return seq;
}

SequenceSpec read_sequence_spec(const std::string& dir) {
    std::string path = (fs::path(dir) / "spec.json").string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string text(std::istreambuf_iterator<char>(in), {});
    return spec_from_json(text, path);
}

std::vector<std::string> list_sequences(const std::string& dataset_dir) {
    if (!fs::is_directory(dataset_dir))
        throw std::runtime_error("not a dataset directory: " + dataset_dir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dataset_dir))
        if (entry.is_directory()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

std::vector<SequenceSpec> preset_specs(const std::string& preset, std::uint64_t base_seed) {
    Rng root(base_seed);
    std::vector<SequenceSpec> specs;
    const char* kinds[] = {"ellipse", "rectangle", "blob"};

    // fast=true draws the eval-family dynamics (faster morph, denser clutter);
    // occlude adds the two scripted occlusion events on top of that.
    auto family = [&](Rng& r, int length, bool fast, bool occlude) {
        SequenceSpec s;
        s.length = length;
        s.frame_side = 96;
        s.target.kind = kinds[r.uniform_index(3)];
        s.target.w = r.uniform(20.0, 30.0);
        s.target.h = r.uniform(18.0, 28.0);
        s.target.texture_seed = r.next_u64();
        if (fast) {
            s.motion.velocity = r.uniform(1.2, 2.2);
            s.motion.turn_every = r.uniform_int(35, 60);
            s.drift.rate = r.uniform(0.012, 0.02);
            s.clutter.count = 3;
            s.clutter.contrast = r.uniform(0.75, 0.95);
        } else {
            s.motion.velocity = r.uniform(0.8, 2.0);
            s.motion.turn_every = 40;
            s.drift.rate = r.uniform(0.003, 0.01);
            s.clutter.count = r.uniform_int(1, 3);
            s.clutter.contrast = r.uniform(0.4, 0.8);
        }
        if (occlude) {
            int len1 = r.uniform_int(12, 18), len2 = r.uniform_int(12, 18);
            int start1 = r.uniform_int(45, 70), start2 = r.uniform_int(120, 150);
            s.occlusions.push_back({start1, start1 + len1, r.uniform(0.85, 0.95)});
            s.occlusions.push_back({start2, start2 + len2, r.uniform(0.85, 0.95)});
        }
        s.seed = r.next_u64();
        return s;
    };

    if (preset == "train") {
        for (int i = 0; i < 60; ++i) {
            Rng r = root.substream("train", i);
            specs.push_back(family(r, 120, false, false));
        }
    } else if (preset == "val") {
        // Calibration data: eval-family dynamics without occlusions, so the
        // error percentiles reflect deployment conditions on clean frames.
        for (int i = 0; i < 12; ++i) {
            Rng r = root.substream("val", i);
            specs.push_back(family(r, 100, true, false));
        }
    } else if (preset == "drift") {
        for (int i = 0; i < 20; ++i) {
            Rng r = root.substream("drift", i);
            specs.push_back(family(r, 200, true, true));
        }
    } else {
        throw std::invalid_argument("unknown preset '" + preset + "' (train|val|drift)");
    }
    return specs;
}

}  // namespace adasiam
