#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "medirl/fovea.hpp"
#include "medirl/grid.hpp"
#include "medirl/tensor.hpp"

namespace medirl {

/// Pixel rectangle, half-open: rows [row0,row1), cols [col0,col1).
struct Box {
    int row0 = 0, col0 = 0, row1 = 0, col1 = 0;
    int height() const { return row1 - row0; }
    int width() const { return col1 - col0; }
    bool contains(int row, int col) const {
        return row >= row0 && row < row1 && col >= col0 && col < col1;
    }
};

/// Per-frame feature stack. All tensors share spatial dimensions; D holds
/// normalized inverse depth in [0,1] (1 = nearest).
struct FrameFeatures {
    Tensor X;  // pixel-level features [h×w×d_x]
    Tensor Y;  // instance/region features [h×w×d_y]
    Tensor G;  // lane map [h×w×1] in [0,1]
    Tensor U;  // brake-light features [h×w×1] in [0,1]
    Tensor D;  // inverse depth [h×w×1] in [0,1]
    std::optional<Box> lead_box;

    void validate() const;
    int height() const { return X.height(); }
    int width() const { return X.width(); }
};

enum class TaskLabel { lane_keeping, merging_in, braking };

const char* to_string(TaskLabel t);
TaskLabel task_from_string(const std::string& s);

struct VehicleState {
    double speed_mph = 0.0;
};

struct SceneSequence {
    std::vector<FrameFeatures> frames;
    TaskLabel task = TaskLabel::lane_keeping;
    std::vector<VehicleState> speeds;
    std::vector<FixationSequence> ground_truth_fixations;
    std::string video_id;

    void validate() const;
};

/// Feature-group switches for ablations. D gates the depth amplification of Y
/// (no channel of its own); the other six each gate a feature block.
struct FeatureToggles {
    bool x = true;
    bool y = true;
    bool g = true;
    bool m = true;  // lead-vehicle box indicator and brake-light map together
    bool d = true;
    bool q = true;  // driving-task one-hot
    bool v = true;  // ego speed

    void validate() const;
    static FeatureToggles from_string(const std::string& flags_off);
};

/// Z = Y ⊙ (λ·D) + Y, D broadcast across Y's channels.
Tensor amplify_depth(const Tensor& Y, const Tensor& D, double lambda = 1.2);

TaskLabel classify_task(bool lane_change, bool signal);

/// Per-patch feature matrix with the column names of its layout.
struct PatchFeatures {
    Matrix phi;  // [n·m × d_phi]
    std::vector<std::string> columns;
};

/// One row per patch: spatial averages of the foveated context O and of the
/// enabled frame channels (Z, G, U), a binary lead-box overlap indicator,
/// the task one-hot (lane-keeping, merging-in, braking), and speed scaled by
/// max_speed. Disabled groups are omitted from the layout.
PatchFeatures assemble_patch_features(const FrameFeatures& f, const FoveatedState& state,
                                      const GridSpec& grid, TaskLabel task,
                                      const VehicleState& v, const FeatureToggles& toggles,
                                      double max_speed_mph = 100.0, double lambda = 1.2);

/// Synthetic scene script: a lead vehicle approaching along a configured path,
/// brake lights from brake_onset on, lane bands, seeded distractor blobs, and
/// a vertical inverse-depth gradient.
struct SynthParams {
    int d_x = 2;
    int d_y = 2;
    int num_distractors = 3;
    int brake_onset = 3;
    double brake_intensity = 1.0;
    double distractor_brake_intensity = 0.5;  // spurious brake-light spots, from onset on
    // lead box path, linearly interpolated frame 0 -> T-1 (fractions of frame size)
    double box_start_cy = 0.35, box_start_cx = 0.25, box_start_h = 0.12, box_start_w = 0.10;
    double box_end_cy = 0.55, box_end_cx = 0.72, box_end_h = 0.30, box_end_w = 0.24;
    double lane_center_frac = 0.5;  // lane band pair around this column
    double lane_half_gap_frac = 0.18;
    double lane_width_frac = 0.03;
    double speed_start = 62.0;
    double speed_decel = 4.0;  // mph per frame
    bool lane_change = false;
    bool signal = true;  // default script is a braking task
};

SceneSequence synth_scene(std::uint64_t seed, const GridSpec& grid, int num_frames,
                          const SynthParams& params);

/// Scene manifest JSON + FTEN tensors + fixation CSVs under the manifest's
/// directory. load validates every SceneSequence invariant.
void save_scene(const std::filesystem::path& manifest_path, const SceneSequence& scene);
SceneSequence load_scene(const std::filesystem::path& manifest_path);

}  // namespace medirl
