#include "medirl/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "medirl/checkpoint.hpp"
#include "medirl/io.hpp"
#include "medirl/metrics.hpp"
#include "json.hpp"

namespace medirl {

using nlohmann::json;

namespace {

void get_if(const json& j, const char* key, int& out) {
    if (j.contains(key)) out = j.at(key).get<int>();
}
void get_if(const json& j, const char* key, double& out) {
    if (j.contains(key)) out = j.at(key).get<double>();
}
void get_if(const json& j, const char* key, bool& out) {
    if (j.contains(key)) out = j.at(key).get<bool>();
}
void get_if(const json& j, const char* key, std::uint64_t& out) {
    if (j.contains(key)) out = j.at(key).get<std::uint64_t>();
}
void get_if(const json& j, const char* key, std::string& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
}
void get_if(const json& j, const char* key, std::filesystem::path& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& json_path) {
    RunConfig cfg;
    if (json_path.empty()) return cfg;
    std::ifstream in(json_path);
    if (!in) throw ConfigError("cannot open config: " + json_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + json_path.string() + ": " + e.what());
    }

    try {
        get_if(j, "out_dir", cfg.out_dir);
        get_if(j, "data_dir", cfg.data_dir);
        get_if(j, "checkpoint_dir", cfg.checkpoint_dir);
        get_if(j, "seed", cfg.seed);
        get_if(j, "frame_h", cfg.frame_h);
        get_if(j, "frame_w", cfg.frame_w);
        get_if(j, "patch_h", cfg.patch_h);
        get_if(j, "patch_w", cfg.patch_w);
        get_if(j, "scenes", cfg.scenes);
        get_if(j, "frames", cfg.frames);
        get_if(j, "experts_per_scene", cfg.experts_per_scene);
        get_if(j, "fixations_per_frame", cfg.fixations_per_frame);
        get_if(j, "expert_reward_brake", cfg.expert_reward_brake);
        get_if(j, "expert_reward_box", cfg.expert_reward_box);
        get_if(j, "kld_gate", cfg.kld_gate);
        get_if(j, "irrelevant_max_fraction", cfg.irrelevant_max_fraction);
        get_if(j, "sigma_smooth", cfg.sigma_smooth);
        get_if(j, "record_timing", cfg.record_timing);
        get_if(j, "rollout_mode", cfg.rollout_mode);
        get_if(j, "horizon", cfg.horizon);
        get_if(j, "scene_index", cfg.scene_index);
        get_if(j, "write_pgm", cfg.write_pgm);

        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            get_if(s, "d_x", cfg.synth.d_x);
            get_if(s, "d_y", cfg.synth.d_y);
            get_if(s, "num_distractors", cfg.synth.num_distractors);
            get_if(s, "brake_onset", cfg.synth.brake_onset);
            get_if(s, "brake_intensity", cfg.synth.brake_intensity);
            get_if(s, "distractor_brake_intensity", cfg.synth.distractor_brake_intensity);
            get_if(s, "speed_start", cfg.synth.speed_start);
            get_if(s, "speed_decel", cfg.synth.speed_decel);
            get_if(s, "lane_change", cfg.synth.lane_change);
            get_if(s, "signal", cfg.synth.signal);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            get_if(t, "epochs", cfg.train.epochs);
            get_if(t, "batch_sequences", cfg.train.batch_sequences);
            get_if(t, "seed", cfg.train.seed);
            get_if(t, "gamma", cfg.train.gamma);
            get_if(t, "sigma_max", cfg.train.sigma_max);
            get_if(t, "max_speed_mph", cfg.train.max_speed_mph);
            get_if(t, "lambda_depth", cfg.train.lambda_depth);
            if (t.contains("toggles_off"))
                cfg.train.toggles =
                    FeatureToggles::from_string(t.at("toggles_off").get<std::string>());
            if (t.contains("hidden")) cfg.train.net.hidden = t.at("hidden").get<std::vector<int>>();
            get_if(t, "batch_norm", cfg.train.net.batch_norm);
        }
        if (j.contains("ior")) {
            get_if(j.at("ior"), "decay", cfg.ior.decay);
            get_if(j.at("ior"), "memory", cfg.ior.memory);
        }
    } catch (const json::exception& e) {
        throw ConfigError("config field error in " + json_path.string() + ": " + e.what());
    }
    return cfg;
}

std::vector<double> planted_reward(const FrameFeatures& frame, const GridSpec& grid, double w_brake,
                                   double w_box) {
    std::vector<double> r(grid.num_patches(), 0.0);
    for (int pr = 0; pr < grid.n; ++pr) {
        int y0 = grid.row_y0(pr), y1 = y0 + grid.row_heights[pr];
        for (int pc = 0; pc < grid.m; ++pc) {
            int x0 = grid.col_x0(pc), x1 = x0 + grid.col_widths[pc];
            double u_true = 0.0;
            double covered = 0.0;
            double count = static_cast<double>(y1 - y0) * (x1 - x0);
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    bool in_box = frame.lead_box && frame.lead_box->contains(y, x);
                    if (in_box) {
                        covered += 1.0;
                        u_true += frame.U.at(y, x, 0);
                    }
                }
            r[pr * grid.m + pc] = w_brake * (u_true / count) + w_box * (covered / count);
        }
    }
    return r;
}

namespace {

// Positions of the expert trajectory: fixations_per_frame per frame, in order.
std::vector<int> position_frames(int num_frames, int per_frame) {
    std::vector<int> frames;
    for (int t = 0; t < num_frames; ++t)
        for (int k = 0; k < per_frame; ++k) frames.push_back(t);
    return frames;
}

}  // namespace

void cmd_synth(const RunConfig& cfg) {
    if (cfg.scenes < 1) throw ValidationError("synth: scene count must be >= 1");
    if (cfg.frames < 1 || cfg.experts_per_scene < 1 || cfg.fixations_per_frame < 1)
        throw ValidationError("synth: counts must be >= 1");
    GridSpec grid = cfg.make_grid();

    std::filesystem::create_directories(cfg.out_dir);
    FixationMdp mdp = build_mdp(grid, ActionModel::patch_target, cfg.train.gamma);

    json scene_list = json::array();
    json reward_list = json::array();
    for (int i = 0; i < cfg.scenes; ++i) {
        std::uint64_t scene_seed = Rng::mix(cfg.seed, 1000 + i);
        SceneSequence scene = synth_scene(scene_seed, grid, cfg.frames, cfg.synth);

        // planted reward, one vector per frame
        std::vector<std::vector<double>> truth;
        for (const auto& f : scene.frames)
            truth.push_back(planted_reward(f, grid, cfg.expert_reward_brake, cfg.expert_reward_box));

        // MaxEnt expert trajectories from the planted reward
        auto frames_of = position_frames(cfg.frames, cfg.fixations_per_frame);
        std::vector<std::vector<double>> rewards_per_decision;
        for (std::size_t j = 1; j < frames_of.size(); ++j)
            rewards_per_decision.push_back(truth[frames_of[j]]);
        auto vi = soft_value_iteration_steps(mdp, rewards_per_decision);

        Rng expert_rng(Rng::mix(scene_seed, 0xe87));
        for (int e = 0; e < cfg.experts_per_scene; ++e) {
            auto states = sample_trajectory(mdp, vi, -1, expert_rng);
            FixationSequence seq;
            seq.driver_id = "d" + std::to_string(e);
            seq.video_id = scene.video_id;
            for (std::size_t p = 0; p < states.size(); ++p) {
                auto [x, y] = patch_center(grid, state_to_patch(grid, states[p]));
                FixationPoint fp;
                fp.x = x;
                fp.y = y;
                fp.frame_index = frames_of[p];
                fp.duration_ms = 150.0 + std::floor(expert_rng.uniform() * 100.0);
                seq.points.push_back(fp);
            }
            scene.ground_truth_fixations.push_back(std::move(seq));
        }

        std::string scene_dir = "scene_" + std::to_string(i);
        save_scene(cfg.out_dir / scene_dir / "manifest.json", scene);

        Tensor truth_t({static_cast<std::uint32_t>(cfg.frames),
                        static_cast<std::uint32_t>(grid.num_patches())});
        for (int t = 0; t < cfg.frames; ++t)
            for (int s = 0; s < grid.num_patches(); ++s)
                truth_t.v[static_cast<std::size_t>(t) * grid.num_patches() + s] =
                    static_cast<float>(truth[t][s]);
        write_tensor(cfg.out_dir / scene_dir / "truth_reward.ften", truth_t);

        scene_list.push_back(scene_dir + "/manifest.json");
        reward_list.push_back(scene_dir + "/truth_reward.ften");
    }

    json dataset = {{"seed", cfg.seed},
                    {"grid",
                     {{"frame_h", cfg.frame_h},
                      {"frame_w", cfg.frame_w},
                      {"patch_h", cfg.patch_h},
                      {"patch_w", cfg.patch_w}}},
                    {"scenes", scene_list},
                    {"planted_rewards", reward_list}};
    atomic_write_file(cfg.out_dir / "dataset.json", dataset.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "dataset.json");
    if (!in) throw IoError("cannot open dataset: " + (dir / "dataset.json").string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed dataset.json: " + std::string(e.what()));
    }

    Dataset ds;
    try {
        const auto& g = j.at("grid");
        ds.grid = build_grid(g.at("frame_h").get<int>(), g.at("frame_w").get<int>(),
                             g.at("patch_h").get<int>(), g.at("patch_w").get<int>());
        for (const auto& rel : j.at("scenes"))
            ds.scenes.push_back(load_scene(dir / rel.get<std::string>()));
        if (j.contains("planted_rewards")) {
            for (const auto& rel : j.at("planted_rewards")) {
                Tensor t = read_tensor(dir / rel.get<std::string>());
                if (t.ndim() != 2) throw IoError("planted reward tensor must be 2-d");
                std::vector<std::vector<double>> per_frame(t.shape[0],
                                                           std::vector<double>(t.shape[1]));
                for (std::uint32_t a = 0; a < t.shape[0]; ++a)
                    for (std::uint32_t b = 0; b < t.shape[1]; ++b)
                        per_frame[a][b] = t.v[static_cast<std::size_t>(a) * t.shape[1] + b];
                ds.planted_rewards.push_back(std::move(per_frame));
            }
        }
    } catch (const json::exception& e) {
        throw IoError("dataset field error: " + std::string(e.what()));
    }
    return ds;
}

namespace {

// Ground-truth attention map per frame from the pooled fixations of all
// observers; frames nobody fixated get a uniform map.
std::vector<SaliencyMap> scene_gt_maps(const SceneSequence& scene, double sigma_smooth) {
    int h = scene.frames[0].height(), w = scene.frames[0].width();
    std::vector<SaliencyMap> maps;
    for (std::size_t t = 0; t < scene.frames.size(); ++t) {
        std::vector<FixationPoint> pooled;
        for (const auto& seq : scene.ground_truth_fixations)
            for (const auto& p : seq.points)
                if (p.frame_index == static_cast<int>(t)) pooled.push_back(p);
        if (pooled.empty()) {
            SaliencyMap m;
            m.h = h;
            m.w = w;
            m.p.assign(static_cast<std::size_t>(h) * w, 1.0 / (static_cast<double>(h) * w));
            maps.push_back(std::move(m));
        } else {
            maps.push_back(fixations_to_map(pooled, h, w, sigma_smooth));
        }
    }
    return maps;
}

std::vector<std::vector<std::uint8_t>> irrelevant_masks(const SceneSequence& scene) {
    std::vector<std::vector<std::uint8_t>> masks;
    int h = scene.frames[0].height(), w = scene.frames[0].width();
    for (const auto& f : scene.frames) {
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                bool relevant = f.G.at(y, x, 0) > 0.0f || f.U.at(y, x, 0) > 0.0f ||
                                (f.lead_box && f.lead_box->contains(y, x));
                if (relevant) mask[static_cast<std::size_t>(y) * w + x] = 0;
            }
        masks.push_back(std::move(mask));
    }
    return masks;
}

SceneSequence slice_scene(const SceneSequence& scene, int w0, int w1) {
    SceneSequence out;
    out.task = scene.task;
    out.video_id = scene.video_id + "#w" + std::to_string(w0);
    out.frames.assign(scene.frames.begin() + w0, scene.frames.begin() + w1);
    out.speeds.assign(scene.speeds.begin() + w0, scene.speeds.begin() + w1);
    for (const auto& seq : scene.ground_truth_fixations) {
        FixationSequence sliced;
        sliced.driver_id = seq.driver_id;
        sliced.video_id = out.video_id;
        for (const auto& p : seq.points)
            if (p.frame_index >= w0 && p.frame_index < w1) {
                FixationPoint q = p;
                q.frame_index -= w0;
                sliced.points.push_back(q);
            }
        if (sliced.points.size() >= 2) out.ground_truth_fixations.push_back(std::move(sliced));
    }
    return out;
}

}  // namespace

std::vector<SceneSequence> apply_training_gates(const std::vector<SceneSequence>& scenes,
                                                const GridSpec& grid, const RunConfig& cfg,
                                                GateCounts* counts) {
    GateCounts local;
    GateCounts& gc = counts ? *counts : local;
    gc = GateCounts{};
    gc.scenes_in = static_cast<int>(scenes.size());

    std::vector<SceneSequence> out;
    for (const auto& scene : scenes) {
        gc.sequences_in += static_cast<int>(scene.ground_truth_fixations.size());
        std::vector<std::pair<int, int>> windows;
        if (static_cast<int>(scene.frames.size()) >= 6) {
            auto maps = scene_gt_maps(scene, cfg.sigma_smooth);
            windows = important_frames(maps, cfg.kld_gate);
        }
        if (windows.empty()) {
            ++gc.dropped_no_window;
            continue;
        }
        auto masks = irrelevant_masks(scene);
        for (auto [w0, w1] : windows) {
            ++gc.windows;
            SceneSequence sliced = slice_scene(scene, w0, w1);
            std::vector<FixationSequence> kept;
            for (auto& seq : sliced.ground_truth_fixations) {
                // the mask list stays full-length; restore original frame ids
                FixationSequence unshifted = seq;
                for (auto& p : unshifted.points) p.frame_index += w0;
                if (filter_irrelevant(unshifted, masks, grid.frame_h, grid.frame_w,
                                      cfg.irrelevant_max_fraction))
                    kept.push_back(std::move(seq));
                else
                    ++gc.dropped_irrelevant;
            }
            if (kept.empty()) continue;
            sliced.ground_truth_fixations = std::move(kept);
            gc.sequences_out += static_cast<int>(sliced.ground_truth_fixations.size());
            out.push_back(std::move(sliced));
        }
    }

    if (out.empty())
        throw ValidationError(
            "train: no sequences survive the sampling gates (scenes " +
            std::to_string(gc.scenes_in) + ", no-window drops " +
            std::to_string(gc.dropped_no_window) + ", irrelevant drops " +
            std::to_string(gc.dropped_irrelevant) + ")");
    return out;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history,
                       bool record_timing) {
    std::string out = "epoch,nll,grad_norm,lr,seconds\n";
    for (const auto& e : history)
        out += std::to_string(e.epoch) + "," + format_double(e.nll) + "," +
               format_double(e.grad_norm) + "," + format_double(e.lr) + "," +
               (record_timing ? format_double(e.seconds) : std::string("0.000000")) + "\n";
    atomic_write_file(path, out);
}

void cmd_train(const RunConfig& cfg) {
    Dataset ds = load_dataset(cfg.data_dir);
    GridSpec grid = ds.grid;

    GateCounts gates;
    auto training = apply_training_gates(ds.scenes, grid, cfg, &gates);

    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed ? cfg.train.seed : cfg.seed;
    TrainResult result = train(training, grid, tc);

    std::filesystem::create_directories(cfg.out_dir);
    Checkpoint ckpt;
    ckpt.params = std::move(result.params);
    ckpt.adam = std::move(result.adam);
    ckpt.epoch = tc.epochs;
    ckpt.seed = tc.seed;
    ckpt.grid = grid;
    ckpt.train = tc;
    save_checkpoint(cfg.out_dir / "checkpoint", ckpt);
    write_history_csv(cfg.out_dir / "history.csv", result.history, cfg.record_timing);

    std::printf("trained %d epochs on %d sequences (%d windows; drops: %d no-window, %d irrelevant)\n",
                tc.epochs, gates.sequences_out, gates.windows, gates.dropped_no_window,
                gates.dropped_irrelevant);
}

namespace {

int empirical_mean_fixations_per_frame(const std::vector<SceneSequence>& scenes) {
    long points = 0, frame_slots = 0;
    for (const auto& scene : scenes) {
        for (const auto& seq : scene.ground_truth_fixations) {
            points += static_cast<long>(seq.points.size());
            frame_slots += static_cast<long>(scene.frames.size());
        }
    }
    if (frame_slots == 0) return 1;
    return std::max(1, static_cast<int>(std::llround(static_cast<double>(points) / frame_slots)));
}

std::vector<std::uint8_t> binarize_map(const SaliencyMap& m, double threshold) {
    double cut = threshold * *std::max_element(m.p.begin(), m.p.end());
    std::vector<std::uint8_t> out(m.p.size(), 0);
    for (std::size_t i = 0; i < m.p.size(); ++i) out[i] = m.p[i] >= cut ? 1 : 0;
    return out;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const SaliencyMap& map) {
    double peak = *std::max_element(map.p.begin(), map.p.end());
    std::string out = "P5\n" + std::to_string(map.w) + " " + std::to_string(map.h) + "\n255\n";
    for (double v : map.p) {
        int g = peak > 0.0 ? static_cast<int>(255.0 * v / peak + 0.5) : 0;
        out.push_back(static_cast<char>(std::clamp(g, 0, 255)));
    }
    atomic_write_file(path, out);
}

void cmd_eval(const RunConfig& cfg) {
    Checkpoint ckpt = load_checkpoint(cfg.checkpoint_dir);
    Dataset ds = load_dataset(cfg.data_dir);

    if (ds.grid.frame_h != ckpt.grid.frame_h || ds.grid.frame_w != ckpt.grid.frame_w ||
        ds.grid.patch_h != ckpt.grid.patch_h || ds.grid.patch_w != ckpt.grid.patch_w)
        throw ValidationError("eval: dataset grid does not match checkpoint grid");
    for (const auto& scene : ds.scenes)
        if (scene.ground_truth_fixations.empty())
            throw ValidationError("eval: scene '" + scene.video_id + "' has no ground truth");

    GridSpec grid = ckpt.grid;
    FixationMdp mdp = build_mdp(grid, ActionModel::patch_target, ckpt.train.gamma);
    int horizon = cfg.horizon > 0 ? cfg.horizon : empirical_mean_fixations_per_frame(ds.scenes);

    // shuffled-AUC negative pool: every other scene's fixation pixels
    std::vector<std::vector<std::pair<int, int>>> all_points(ds.scenes.size());
    for (std::size_t i = 0; i < ds.scenes.size(); ++i)
        for (const auto& seq : ds.scenes[i].ground_truth_fixations)
            for (const auto& p : seq.points) all_points[i].emplace_back(p.x, p.y);

    std::filesystem::create_directories(cfg.out_dir);
    std::string csv = "video_id,frame,kld,cc,sauc,f_beta\n";
    MetricReport overall;
    overall.seed = cfg.seed;
    json per_scene = json::array();

    for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
        const auto& scene = ds.scenes[i];
        auto pred = policy_saliency(ckpt.params, scene, grid, mdp, horizon, ckpt.train,
                                    cfg.sigma_smooth);
        auto gt = scene_gt_maps(scene, cfg.sigma_smooth);

        std::vector<std::pair<int, int>> negatives;
        for (std::size_t k = 0; k < ds.scenes.size(); ++k)
            if (k != i) negatives.insert(negatives.end(), all_points[k].begin(), all_points[k].end());
        // single-scene datasets fall back to same-video pooled fixations
        if (negatives.empty()) negatives = all_points[i];

        MetricReport report;
        report.seed = cfg.seed;
        for (std::size_t t = 0; t < scene.frames.size(); ++t) {
            std::vector<std::pair<int, int>> positives;
            for (const auto& seq : scene.ground_truth_fixations)
                for (const auto& p : seq.points)
                    if (p.frame_index == static_cast<int>(t)) positives.emplace_back(p.x, p.y);
            if (positives.empty()) continue;

            FrameMetrics fm;
            fm.frame = static_cast<int>(t);
            fm.kld = kld(pred[t], gt[t]);
            fm.cc = cc(pred[t], gt[t]);
            fm.sauc = sauc(pred[t], positives, negatives, Rng::mix(cfg.seed, i * 1000 + t));
            fm.f_beta = f_beta(pred[t], binarize_map(gt[t], 0.5));
            report.frames.push_back(fm);
            overall.frames.push_back(fm);
            csv += scene.video_id + "," + std::to_string(t) + "," + format_double(fm.kld) + "," +
                   format_double(fm.cc) + "," + format_double(fm.sauc) + "," +
                   format_double(fm.f_beta) + "\n";
        }
        report.finalize();
        per_scene.push_back({{"video_id", scene.video_id},
                             {"frames", report.frames_evaluated},
                             {"kld", report.mean_kld},
                             {"cc", report.mean_cc},
                             {"sauc", report.mean_sauc},
                             {"f_beta", report.mean_f_beta}});
    }
    overall.finalize();

    atomic_write_file(cfg.out_dir / "report.csv", csv);
    json summary = {{"seed", cfg.seed},
                    {"horizon", horizon},
                    {"frames_evaluated", overall.frames_evaluated},
                    {"kld", overall.mean_kld},
                    {"cc", overall.mean_cc},
                    {"sauc", overall.mean_sauc},
                    {"f_beta", overall.mean_f_beta},
                    {"scenes", per_scene}};
    atomic_write_file(cfg.out_dir / "report.json", summary.dump(2) + "\n");

    std::printf("evaluated %d frames: kld %.4f cc %.4f sauc %.4f f_beta %.4f\n",
                overall.frames_evaluated, overall.mean_kld, overall.mean_cc, overall.mean_sauc,
                overall.mean_f_beta);
}

void cmd_rollout(const RunConfig& cfg) {
    Checkpoint ckpt = load_checkpoint(cfg.checkpoint_dir);
    Dataset ds = load_dataset(cfg.data_dir);
    if (cfg.scene_index < 0 || cfg.scene_index >= static_cast<int>(ds.scenes.size()))
        throw ValidationError("rollout: scene_index out of range");
    const auto& scene = ds.scenes[cfg.scene_index];
    if (scene.frames[0].height() != ckpt.grid.frame_h ||
        scene.frames[0].width() != ckpt.grid.frame_w)
        throw ValidationError("rollout: scene dims do not match checkpoint grid");

    RolloutMode mode;
    if (cfg.rollout_mode == "sample")
        mode = RolloutMode::sample;
    else if (cfg.rollout_mode == "argmax")
        mode = RolloutMode::argmax;
    else
        throw ConfigError("rollout: mode must be 'sample' or 'argmax'");

    GridSpec grid = ckpt.grid;
    FixationMdp mdp = build_mdp(grid, ActionModel::patch_target, ckpt.train.gamma);
    int k = cfg.horizon > 0 ? cfg.horizon
                            : empirical_mean_fixations_per_frame({scene});
    std::vector<int> k_per_frame(scene.frames.size(), k);

    auto path = rollout(ckpt.params, scene, grid, mdp, k_per_frame, cfg.ior, cfg.seed, mode,
                        ckpt.train);

    std::filesystem::create_directories(cfg.out_dir);
    std::string csv = "frame_index,step,row,col,prob\n";
    for (const auto& e : path.entries)
        csv += std::to_string(e.frame_index) + "," + std::to_string(e.step) + "," +
               std::to_string(e.patch.row) + "," + std::to_string(e.patch.col) + "," +
               format_double(e.prob) + "\n";
    atomic_write_file(cfg.out_dir / "scanpath.csv", csv);

    auto maps = policy_saliency(ckpt.params, scene, grid, mdp, k, ckpt.train, cfg.sigma_smooth);
    for (std::size_t t = 0; t < maps.size(); ++t) {
        Tensor out({static_cast<std::uint32_t>(maps[t].h), static_cast<std::uint32_t>(maps[t].w)});
        for (std::size_t px = 0; px < maps[t].p.size(); ++px)
            out.v[px] = static_cast<float>(maps[t].p[px]);
        write_tensor(cfg.out_dir / ("saliency_" + std::to_string(t) + ".ften"), out);
        if (cfg.write_pgm)
            write_pgm(cfg.out_dir / ("saliency_" + std::to_string(t) + ".pgm"), maps[t]);
    }
    std::printf("rollout wrote %zu fixations and %zu saliency maps\n", path.entries.size(),
                maps.size());
}

}  // namespace medirl
