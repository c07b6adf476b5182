#include "medirl/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "medirl/io.hpp"
#include "json.hpp"

namespace medirl {

using nlohmann::json;

const char* to_string(TaskLabel t) {
    switch (t) {
        case TaskLabel::lane_keeping: return "lane-keeping";
        case TaskLabel::merging_in: return "merging-in";
        case TaskLabel::braking: return "braking";
    }
    return "?";
}

TaskLabel task_from_string(const std::string& s) {
    if (s == "lane-keeping") return TaskLabel::lane_keeping;
    if (s == "merging-in") return TaskLabel::merging_in;
    if (s == "braking") return TaskLabel::braking;
    throw ValidationError("unknown task label: " + s);
}

void FrameFeatures::validate() const {
    auto check = [&](const Tensor& t, const char* name, int want_c) {
        if (t.ndim() != 3) throw ValidationError(std::string("frame tensor ") + name + " must be h×w×c");
        if (t.height() != X.height() || t.width() != X.width())
            throw ValidationError(std::string("frame tensor ") + name + " spatial dims mismatch");
        if (want_c > 0 && t.channels() != want_c)
            throw ValidationError(std::string("frame tensor ") + name + " must have 1 channel");
        if (!t.all_finite()) throw ValidationError(std::string("frame tensor ") + name + " has non-finite values");
    };
    check(X, "X", -1);
    check(Y, "Y", -1);
    check(G, "G", 1);
    check(U, "U", 1);
    check(D, "D", 1);
    for (float x : D.v)
        if (x < 0.0f || x > 1.0f) throw ValidationError("depth map D outside [0,1]");
    if (lead_box) {
        if (lead_box->height() <= 0 || lead_box->width() <= 0 || lead_box->row0 < 0 ||
            lead_box->col0 < 0 || lead_box->row1 > X.height() || lead_box->col1 > X.width())
            throw ValidationError("lead_box outside frame");
    }
}

void SceneSequence::validate() const {
    if (frames.empty()) throw ValidationError("scene has no frames");
    if (speeds.size() != frames.size())
        throw ValidationError("scene speeds length != frames length");
    for (const auto& f : frames) {
        f.validate();
        if (f.height() != frames[0].height() || f.width() != frames[0].width() ||
            f.X.channels() != frames[0].X.channels() || f.Y.channels() != frames[0].Y.channels())
            throw ValidationError("scene frames disagree on dimensions");
    }
    for (const auto& s : speeds)
        if (!(s.speed_mph >= 0.0) || !std::isfinite(s.speed_mph))
            throw ValidationError("vehicle speed must be finite and nonnegative");
    for (const auto& seq : ground_truth_fixations) {
        if (seq.points.empty()) throw ValidationError("empty fixation sequence");
        for (std::size_t i = 0; i < seq.points.size(); ++i) {
            const auto& p = seq.points[i];
            if (p.x < 0 || p.x >= frames[0].width() || p.y < 0 || p.y >= frames[0].height())
                throw ValidationError("fixation outside frame: driver " + seq.driver_id);
            if (p.frame_index < 0 || p.frame_index >= static_cast<int>(frames.size()))
                throw ValidationError("fixation frame_index outside scene: driver " + seq.driver_id);
            if (i > 0 && p.frame_index < seq.points[i - 1].frame_index)
                throw ValidationError("fixation frame_index decreasing: driver " + seq.driver_id);
        }
    }
}

void FeatureToggles::validate() const {
    if (!(x || y || g || m || d || q || v))
        throw ValidationError("all feature toggles disabled");
}

FeatureToggles FeatureToggles::from_string(const std::string& flags_off) {
    FeatureToggles t;
    for (char c : flags_off) {
        switch (c) {
            case 'X': t.x = false; break;
            case 'Y': t.y = false; break;
            case 'G': t.g = false; break;
            case 'M': t.m = false; break;
            case 'D': t.d = false; break;
            case 'Q': t.q = false; break;
            case 'v': case 'V': t.v = false; break;
            case ',': case ' ': break;
            default: throw ConfigError(std::string("unknown feature toggle: ") + c);
        }
    }
    t.validate();
    return t;
}

Tensor amplify_depth(const Tensor& Y, const Tensor& D, double lambda) {
    if (lambda < 0.0) throw ValidationError("amplify_depth: lambda must be >= 0");
    if (Y.ndim() != 3 || D.ndim() != 3 || D.channels() != 1 || Y.height() != D.height() ||
        Y.width() != D.width())
        throw ValidationError("amplify_depth: shape mismatch");
    if (!Y.all_finite() || !D.all_finite())
        throw ValidationError("amplify_depth: non-finite input");

    Tensor Z = Y;
    int h = Y.height(), w = Y.width(), c = Y.channels();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double dep = lambda * D.at(y, x, 0);
            for (int ch = 0; ch < c; ++ch) {
                double val = Y.at(y, x, ch);
                Z.at(y, x, ch) = static_cast<float>(val * dep + val);
            }
        }
    return Z;
}

TaskLabel classify_task(bool lane_change, bool signal) {
    if (lane_change) return TaskLabel::merging_in;
    return signal ? TaskLabel::braking : TaskLabel::lane_keeping;
}

namespace {

// Per-patch mean of one channel, double accumulation.
void patch_means(const Tensor& t, int channel, const GridSpec& grid, double* out) {
    for (int r = 0; r < grid.n; ++r) {
        int y0 = grid.row_y0(r), y1 = y0 + grid.row_heights[r];
        for (int c = 0; c < grid.m; ++c) {
            int x0 = grid.col_x0(c), x1 = x0 + grid.col_widths[c];
            double acc = 0.0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) acc += t.at(y, x, channel);
            out[r * grid.m + c] = acc / (static_cast<double>(y1 - y0) * (x1 - x0));
        }
    }
}

bool patch_overlaps_box(const GridSpec& grid, int r, int c, const Box& b) {
    int y0 = grid.row_y0(r), y1 = y0 + grid.row_heights[r];
    int x0 = grid.col_x0(c), x1 = x0 + grid.col_widths[c];
    return y0 < b.row1 && b.row0 < y1 && x0 < b.col1 && b.col0 < x1;
}

}  // namespace

PatchFeatures assemble_patch_features(const FrameFeatures& f, const FoveatedState& state,
                                      const GridSpec& grid, TaskLabel task,
                                      const VehicleState& v, const FeatureToggles& toggles,
                                      double max_speed_mph, double lambda) {
    toggles.validate();
    if (f.height() != grid.frame_h || f.width() != grid.frame_w)
        throw ValidationError("assemble_patch_features: frame dims do not match grid");
    if (toggles.x && (state.O.height() != grid.frame_h || state.O.width() != grid.frame_w))
        throw ValidationError("assemble_patch_features: foveated state dims do not match grid");

    int S = grid.num_patches();
    std::vector<std::string> columns;
    std::vector<std::vector<double>> blocks;  // each S-long

    auto add_channel_means = [&](const Tensor& t, const std::string& prefix) {
        for (int ch = 0; ch < t.channels(); ++ch) {
            std::vector<double> col(S);
            patch_means(t, ch, grid, col.data());
            blocks.push_back(std::move(col));
            columns.push_back(prefix + std::to_string(ch));
        }
    };

    if (toggles.x) add_channel_means(state.O, "O");
    if (toggles.y) {
        Tensor Z = toggles.d ? amplify_depth(f.Y, f.D, lambda) : f.Y;
        add_channel_means(Z, "Z");
    }
    if (toggles.g) add_channel_means(f.G, "G");
    if (toggles.m) {
        add_channel_means(f.U, "U");
        std::vector<double> ind(S, 0.0);
        if (f.lead_box)
            for (int r = 0; r < grid.n; ++r)
                for (int c = 0; c < grid.m; ++c)
                    if (patch_overlaps_box(grid, r, c, *f.lead_box)) ind[r * grid.m + c] = 1.0;
        blocks.push_back(std::move(ind));
        columns.push_back("M");
    }
    if (toggles.q) {
        for (int i = 0; i < 3; ++i) {
            blocks.emplace_back(S, i == static_cast<int>(task) ? 1.0 : 0.0);
            columns.push_back(std::string("task") + std::to_string(i));
        }
    }
    if (toggles.v) {
        double s = std::clamp(v.speed_mph / max_speed_mph, 0.0, 1.0);
        blocks.emplace_back(S, s);
        columns.push_back("speed");
    }

    PatchFeatures out;
    out.columns = columns;
    out.phi = Matrix(S, blocks.size());
    for (std::size_t j = 0; j < blocks.size(); ++j)
        for (int s = 0; s < S; ++s) out.phi.at(s, j) = blocks[j][s];
    if (!out.phi.all_finite())
        throw ValidationError("assemble_patch_features: non-finite feature value");
    return out;
}

namespace {

Box interp_box(const SynthParams& p, int frame, int T, int h, int w) {
    double a = T <= 1 ? 0.0 : static_cast<double>(frame) / (T - 1);
    double cy = (p.box_start_cy + a * (p.box_end_cy - p.box_start_cy)) * h;
    double cx = (p.box_start_cx + a * (p.box_end_cx - p.box_start_cx)) * w;
    double bh = (p.box_start_h + a * (p.box_end_h - p.box_start_h)) * h;
    double bw = (p.box_start_w + a * (p.box_end_w - p.box_start_w)) * w;
    Box b;
    b.row0 = std::clamp(static_cast<int>(cy - bh / 2), 0, h - 1);
    b.row1 = std::clamp(static_cast<int>(cy + bh / 2), b.row0 + 1, h);
    b.col0 = std::clamp(static_cast<int>(cx - bw / 2), 0, w - 1);
    b.col1 = std::clamp(static_cast<int>(cx + bw / 2), b.col0 + 1, w);
    return b;
}

void paint_box(Tensor& t, int channel, const Box& b, float value) {
    for (int y = b.row0; y < b.row1; ++y)
        for (int x = b.col0; x < b.col1; ++x) t.at(y, x, channel) = value;
}

void paint_blob(Tensor& t, int channel, int cy, int cx, double radius, float peak) {
    int r = static_cast<int>(std::ceil(radius));
    for (int y = std::max(0, cy - r); y < std::min(t.height(), cy + r + 1); ++y)
        for (int x = std::max(0, cx - r); x < std::min(t.width(), cx + r + 1); ++x) {
            double d2 = (y - cy) * double(y - cy) + (x - cx) * double(x - cx);
            float g = static_cast<float>(peak * std::exp(-0.5 * d2 / (radius * radius * 0.25)));
            t.at(y, x, channel) = std::max(t.at(y, x, channel), g);
        }
}

}  // namespace

SceneSequence synth_scene(std::uint64_t seed, const GridSpec& grid, int num_frames,
                          const SynthParams& params) {
    if (num_frames < 1) throw ValidationError("synth_scene: num_frames must be >= 1");
    if (params.d_x < 1 || params.d_y < 1 || params.box_start_h <= 0.0 || params.box_start_w <= 0.0 ||
        params.box_end_h <= 0.0 || params.box_end_w <= 0.0)
        throw ValidationError("synth_scene: degenerate params");

    int h = grid.frame_h, w = grid.frame_w;
    Rng rng(Rng::mix(seed, 0x5ce9e));

    // Distractor objects persist across the scene and drift slowly.
    struct Distractor {
        double cy, cx, dy, dx, radius;
    };
    std::vector<Distractor> distractors;
    for (int i = 0; i < params.num_distractors; ++i) {
        Distractor d;
        d.cy = rng.uniform(0.1, 0.9) * h;
        d.cx = rng.uniform(0.05, 0.95) * w;
        d.dy = rng.uniform(-1.5, 1.5);
        d.dx = rng.uniform(-2.5, 2.5);
        d.radius = rng.uniform(0.4, 1.0) * std::min(grid.patch_h, grid.patch_w);
        distractors.push_back(d);
    }

    SceneSequence scene;
    scene.task = classify_task(params.lane_change, params.signal);
    scene.video_id = "synth-" + std::to_string(seed);

    int lane_c = static_cast<int>(params.lane_center_frac * w);
    int lane_gap = static_cast<int>(params.lane_half_gap_frac * w);
    int lane_w = std::max(1, static_cast<int>(params.lane_width_frac * w));

    for (int t = 0; t < num_frames; ++t) {
        FrameFeatures f;
        f.X = Tensor::hwc(h, w, params.d_x);
        f.Y = Tensor::hwc(h, w, params.d_y);
        f.G = Tensor::hwc(h, w, 1);
        f.U = Tensor::hwc(h, w, 1);
        f.D = Tensor::hwc(h, w, 1);

        Box box = interp_box(params, t, num_frames, h, w);
        f.lead_box = box;

        // lanes: two vertical bands below the horizon
        for (int side = -1; side <= 1; side += 2) {
            int x0 = std::clamp(lane_c + side * lane_gap - lane_w / 2, 0, w - 1);
            int x1 = std::clamp(x0 + lane_w, 0, w);
            for (int y = h / 3; y < h; ++y)
                for (int x = x0; x < x1; ++x) {
                    f.G.at(y, x, 0) = 1.0f;
                    f.X.at(y, x, 0) = 0.8f;
                }
        }

        // lead vehicle: solid footprint in X channel 0 and graded region features in Y
        paint_box(f.X, std::min(1, params.d_x - 1), box, 1.0f);
        for (int ch = 0; ch < params.d_y; ++ch)
            for (int y = box.row0; y < box.row1; ++y)
                for (int x = box.col0; x < box.col1; ++x) {
                    double fy = (y - box.row0 + 1.0) / box.height();
                    f.Y.at(y, x, ch) = static_cast<float>(ch == 0 ? fy : 1.0 - 0.5 * fy);
                }

        // distractor blobs: structure in X, footprint in last Y channel
        for (const auto& d : distractors) {
            int cy = static_cast<int>(d.cy + t * d.dy);
            int cx = static_cast<int>(d.cx + t * d.dx);
            if (cy < 0 || cy >= h || cx < 0 || cx >= w) continue;
            paint_blob(f.X, 0, cy, cx, d.radius, 0.9f);
            paint_blob(f.Y, params.d_y - 1, cy, cx, d.radius, 0.6f);
        }

        // brake lights: zero before onset; afterwards lit strip inside the lead
        // box plus weaker spurious spots at distractors
        if (t >= params.brake_onset) {
            int strip0 = box.row0 + box.height() / 2;
            int strip1 = std::min(box.row1, strip0 + std::max(1, box.height() / 4));
            for (int y = strip0; y < strip1; ++y)
                for (int x = box.col0; x < box.col1; ++x)
                    f.U.at(y, x, 0) = static_cast<float>(params.brake_intensity);
            for (const auto& d : distractors) {
                int cy = static_cast<int>(d.cy + t * d.dy);
                int cx = static_cast<int>(d.cx + t * d.dx);
                if (cy < 0 || cy >= h || cx < 0 || cx >= w) continue;
                paint_blob(f.U, 0, cy, cx, d.radius * 0.5,
                           static_cast<float>(params.distractor_brake_intensity));
            }
        }

        // inverse depth: vertical gradient, nearer at the bottom; the lead box
        // takes the depth of its bottom edge
        for (int y = 0; y < h; ++y) {
            float dep = static_cast<float>(y) / (h - 1);
            for (int x = 0; x < w; ++x) f.D.at(y, x, 0) = dep;
        }
        float box_dep = static_cast<float>(box.row1 - 1) / (h - 1);
        paint_box(f.D, 0, box, box_dep);

        scene.frames.push_back(std::move(f));
        scene.speeds.push_back(
            VehicleState{std::max(0.0, params.speed_start - params.speed_decel * t)});
    }
    scene.validate();
    return scene;
}

void save_scene(const std::filesystem::path& manifest_path, const SceneSequence& scene) {
    scene.validate();
    auto dir = manifest_path.parent_path();
    std::filesystem::create_directories(dir);

    json frames = json::array();
    for (std::size_t t = 0; t < scene.frames.size(); ++t) {
        const auto& f = scene.frames[t];
        std::string stem = "frame_" + std::to_string(t) + "_";
        write_tensor(dir / (stem + "x.ften"), f.X);
        write_tensor(dir / (stem + "y.ften"), f.Y);
        write_tensor(dir / (stem + "g.ften"), f.G);
        write_tensor(dir / (stem + "u.ften"), f.U);
        write_tensor(dir / (stem + "d.ften"), f.D);
        json jf = {{"x", stem + "x.ften"}, {"y", stem + "y.ften"}, {"g", stem + "g.ften"},
                   {"u", stem + "u.ften"}, {"d", stem + "d.ften"},
                   {"speed", scene.speeds[t].speed_mph}};
        if (f.lead_box)
            jf["lead_box"] = {f.lead_box->row0, f.lead_box->col0, f.lead_box->row1,
                              f.lead_box->col1};
        else
            jf["lead_box"] = nullptr;
        frames.push_back(jf);
    }

    json manifest = {{"video_id", scene.video_id},
                     {"task", to_string(scene.task)},
                     {"frames", frames},
                     {"fixations", json::array()}};
    if (!scene.ground_truth_fixations.empty()) {
        write_fixation_csv(dir / "fixations.csv", scene.ground_truth_fixations);
        manifest["fixations"].push_back("fixations.csv");
    }
    atomic_write_file(manifest_path, manifest.dump(2) + "\n");
}

SceneSequence load_scene(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    auto dir = manifest_path.parent_path();

    SceneSequence scene;
    try {
        scene.video_id = manifest.at("video_id").get<std::string>();
        scene.task = task_from_string(manifest.at("task").get<std::string>());
        for (const auto& jf : manifest.at("frames")) {
            FrameFeatures f;
            f.X = read_tensor(dir / jf.at("x").get<std::string>());
            f.Y = read_tensor(dir / jf.at("y").get<std::string>());
            f.G = read_tensor(dir / jf.at("g").get<std::string>());
            f.U = read_tensor(dir / jf.at("u").get<std::string>());
            f.D = read_tensor(dir / jf.at("d").get<std::string>());
            if (!jf.at("lead_box").is_null()) {
                auto b = jf.at("lead_box");
                f.lead_box = Box{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
                                 b.at(3).get<int>()};
            }
            scene.frames.push_back(std::move(f));
            scene.speeds.push_back(VehicleState{jf.at("speed").get<double>()});
        }
        for (const auto& fx : manifest.at("fixations")) {
            auto seqs = read_fixation_csv(dir / fx.get<std::string>(), scene.video_id);
            scene.ground_truth_fixations.insert(scene.ground_truth_fixations.end(), seqs.begin(),
                                                seqs.end());
        }
    } catch (const json::exception& e) {
        throw IoError("manifest field error in " + manifest_path.string() + ": " + e.what());
    }
    scene.validate();
    return scene;
}

}  // namespace medirl
