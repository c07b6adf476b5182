#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "medirl/grid.hpp"
#include "medirl/scanpath.hpp"

namespace medirl {

struct FrameMetrics {
    int frame = 0;
    double kld = 0.0;
    double cc = 0.0;
    double sauc = 0.0;
    double f_beta = 0.0;
};

struct MetricReport {
    std::vector<FrameMetrics> frames;
    double mean_kld = 0.0;
    double mean_cc = 0.0;
    double mean_sauc = 0.0;
    double mean_f_beta = 0.0;
    int frames_evaluated = 0;
    std::uint64_t seed = 0;

    void finalize();
};

/// KL(gt ‖ pred) with the saliency-benchmark epsilon:
/// Σ gt·log(gt/(pred+ε) + ε), ε = 2.2204e-16.
double kld(const SaliencyMap& pred, const SaliencyMap& gt);

/// Pearson correlation over pixels. Throws ValidationError on constant maps.
double cc(const SaliencyMap& pred, const SaliencyMap& gt);

/// Shuffled AUC: positives vs negatives ranked by prediction value, tied pairs
/// count 0.5. Negative pools larger than 10× the positive count are subsampled
/// with the seed.
double sauc(const SaliencyMap& pred, const std::vector<std::pair<int, int>>& pos_xy,
            const std::vector<std::pair<int, int>>& neg_xy, std::uint64_t seed);

/// F_β on pred binarized at threshold·max(pred); β² defaults to 1.
double f_beta(const SaliencyMap& pred, const std::vector<std::uint8_t>& gt_binary,
              double threshold = 0.5, double beta_sq = 1.0);

/// Important-frame sampling: frames whose map deviates from the video-average
/// map by KL(frame ‖ avg) ≥ kld_min, maximal runs of ≥ 6 chopped greedily into
/// consecutive disjoint 6-frame [start, start+6) windows.
std::vector<std::pair<int, int>> important_frames(const std::vector<SaliencyMap>& gt_maps,
                                                  double kld_min = 0.89, int window = 6);

/// Keep iff the fraction of fixations landing on irrelevant pixels is ≤
/// max_fraction (strictly more is dropped). One mask per frame, row-major h×w,
/// nonzero = irrelevant.
bool filter_irrelevant(const FixationSequence& seq,
                       const std::vector<std::vector<std::uint8_t>>& irrelevant_masks, int frame_h,
                       int frame_w, double max_fraction = 0.40);

/// One eye-tracker sample; a missing optional is a missing value.
struct RawGazeRecord {
    double timestamp_ms = 0.0;
    std::optional<double> pupil;
    std::optional<double> gaze_x;
    std::optional<double> gaze_y;
    std::optional<double> duration;
};

struct GazeCleanReport {
    bool kept = true;                          // false: > 40% abnormal values
    std::array<double, 4> missing_fraction{};  // pupil, gaze_x, gaze_y, duration
    std::array<bool, 4> interpolated{};
    std::array<int, 4> abnormal_count{};
    double abnormal_fraction = 0.0;
};

/// Linear interpolation of features missing < 20% (ends extended with the
/// nearest value), μ±3σ outlier marking with zeros excluded from the
/// statistics (population σ), sequence dropped above 40% abnormal values.
std::pair<std::vector<RawGazeRecord>, GazeCleanReport> preprocess_gaze(
    const std::vector<RawGazeRecord>& records);

}  // namespace medirl
