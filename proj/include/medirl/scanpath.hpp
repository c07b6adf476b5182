#pragma once

#include <cstdint>
#include <vector>

#include "medirl/features.hpp"
#include "medirl/grid.hpp"
#include "medirl/irl.hpp"

namespace medirl {

/// Normalized spatial probability map over frame pixels.
struct SaliencyMap {
    int h = 0, w = 0;
    std::vector<double> p;

    double at(int y, int x) const { return p[static_cast<std::size_t>(y) * w + x]; }
    void validate() const;
    /// Normalizes in place; throws on nonpositive total mass.
    static SaliencyMap from_unnormalized(std::vector<double> values, int h, int w);
};

/// Inhibition of return: multiplicative decay on recently fixated patches,
/// renormalized before sampling. memory < 0 covers every fixation of the
/// current frame.
struct IoRConfig {
    double decay = 0.1;
    int memory = -1;

    void validate() const;
};

enum class RolloutMode { sample, argmax };

struct ScanpathEntry {
    int frame_index = 0;
    int step = 0;  // fixation index within the frame
    PatchIndex patch;
    double prob = 0.0;  // post-inhibition probability of the chosen patch
};

struct Scanpath {
    std::vector<ScanpathEntry> entries;
    std::uint64_t seed = 0;
    RolloutMode mode = RolloutMode::sample;
};

/// Generates K_per_frame[t] fixations for each frame: per step the reward is
/// recomputed from the current foveated context, soft VI is solved over the
/// remaining steps, the next-step policy row is inhibited and sampled (or
/// argmaxed). The first fixation, having no current patch, is drawn from the
/// MaxEnt start marginal p(s₁) ∝ exp(B₁).
Scanpath rollout(RewardNetParams& params, const SceneSequence& scene, const GridSpec& grid,
                 const FixationMdp& mdp, const std::vector<int>& K_per_frame,
                 const IoRConfig& ior, std::uint64_t seed, RolloutMode mode,
                 const TrainConfig& cfg);

/// Per-frame predicted attention: expected visitation of the next `horizon`
/// decisions (start state excluded) from the current context, painted over
/// patch extents, Gaussian-smoothed and renormalized. The context advances by
/// teacher forcing on the scene's first ground-truth sequence when present,
/// else by one argmax fixation per frame.
std::vector<SaliencyMap> policy_saliency(RewardNetParams& params, const SceneSequence& scene,
                                         const GridSpec& grid, const FixationMdp& mdp,
                                         int horizon, const TrainConfig& cfg,
                                         double sigma_smooth = 12.0);

/// Ground-truth attention map: delta mass per fixation (duration-weighted when
/// every duration is positive), Gaussian-smoothed, normalized.
SaliencyMap fixations_to_map(const std::vector<FixationPoint>& fixations, int frame_h,
                             int frame_w, double sigma_smooth = 12.0);

}  // namespace medirl
