#pragma once

#include <filesystem>
#include <string>

#include "medirl/features.hpp"
#include "medirl/irl.hpp"
#include "medirl/scanpath.hpp"

namespace medirl {

/// Full run configuration: JSON file settings with CLI flag overrides applied
/// on top (flags win). Validated before any command touches the filesystem.
struct RunConfig {
    std::filesystem::path out_dir = "out";
    std::filesystem::path data_dir;
    std::filesystem::path checkpoint_dir;

    std::uint64_t seed = 7;
    int frame_h = 144;
    int frame_w = 256;
    int patch_h = 24;
    int patch_w = 32;

    // synth
    int scenes = 4;
    int frames = 6;
    int experts_per_scene = 5;
    int fixations_per_frame = 2;
    SynthParams synth;
    double expert_reward_brake = 6.0;
    double expert_reward_box = 3.0;

    // train
    TrainConfig train;
    double kld_gate = 0.89;
    double irrelevant_max_fraction = 0.40;
    double sigma_smooth = 12.0;
    bool record_timing = true;

    // eval / rollout
    IoRConfig ior;
    std::string rollout_mode = "sample";
    int horizon = 0;  // 0 = per-frame empirical mean fixation count
    int scene_index = 0;
    bool write_pgm = false;

    GridSpec make_grid() const { return build_grid(frame_h, frame_w, patch_h, patch_w); }
};

RunConfig load_run_config(const std::filesystem::path& json_path);

/// Generates scenes, samples MaxEnt expert scanpaths from the planted reward,
/// writes manifests, tensors, fixations, the per-frame planted reward, and
/// dataset.json.
void cmd_synth(const RunConfig& cfg);

/// Applies the important-frame and irrelevant-fixation gates, trains, writes
/// checkpoint/ and history.csv under out_dir.
void cmd_train(const RunConfig& cfg);

/// Predicted saliency vs ground truth on every scene of the dataset; writes
/// per-frame report.csv and aggregate report.json.
void cmd_eval(const RunConfig& cfg);

/// Scanpath + saliency exports for one scene.
void cmd_rollout(const RunConfig& cfg);

// dataset helpers shared by commands and tests
struct Dataset {
    std::vector<SceneSequence> scenes;
    std::vector<std::vector<std::vector<double>>> planted_rewards;  // [scene][frame][state]
    GridSpec grid;
};
Dataset load_dataset(const std::filesystem::path& dir);

/// Planted per-patch reward on a synthetic frame: high on the true brake-light
/// patches (U inside the lead box) and on lead-vehicle coverage.
std::vector<double> planted_reward(const FrameFeatures& frame, const GridSpec& grid, double w_brake,
                                   double w_box);

/// Training windows after the two sampling gates; drops are reported per gate.
struct GateCounts {
    int scenes_in = 0;
    int windows = 0;
    int sequences_in = 0;
    int dropped_no_window = 0;   // scenes without a qualifying 6-frame window
    int dropped_irrelevant = 0;  // sequences over the irrelevant-fixation cap
    int sequences_out = 0;
};
std::vector<SceneSequence> apply_training_gates(const std::vector<SceneSequence>& scenes,
                                                const GridSpec& grid, const RunConfig& cfg,
                                                GateCounts* counts = nullptr);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history,
                       bool record_timing);

void write_pgm(const std::filesystem::path& path, const SaliencyMap& map);

}  // namespace medirl
