#pragma once

#include <vector>

#include "medirl/grid.hpp"
#include "medirl/tensor.hpp"

namespace medirl {

enum class FoveaMode { patch, circular };

/// Binary mask marking the fovea for one fixation: in patch mode exactly the
/// fixated patch, in circular mode all pixels within a radius of the patch
/// center. Carries the grid so patch-mode masks can be expanded to pixel
/// resolution without extra context.
struct FoveaMask {
    FoveaMode mode = FoveaMode::patch;
    GridSpec grid;
    PatchIndex fixation;
    std::vector<float> patch_map;  // n*m, patch mode
    std::vector<float> pixel_map;  // h*w, circular mode

    /// Mask value at pixel (y, x) regardless of mode.
    float at_pixel(int y, int x) const;
};

/// Accumulated spatial-cue context O with its fixation bookkeeping. Updated
/// functionally; every operation returns a new value.
struct FoveatedState {
    Tensor O;
    int k = 0;  // fixations applied within the current frame
    int t = 1;  // frame index, 1-based
    std::vector<PatchIndex> history;
};

enum class DistanceMode { frame_center, nearest_border };

/// Separable Gaussian smoothing per channel, kernel radius ceil(3σ), symmetric
/// reflect padding (edge sample included, so channel sums are preserved
/// exactly). σ=0 returns the input unchanged.
Tensor gaussian_blur(const Tensor& H, double sigma);

/// Double-precision single-channel variant used for saliency maps.
std::vector<double> gaussian_blur_2d(const std::vector<double>& map, int h, int w, double sigma);

/// σ = 2·d where d is the Euclidean distance from the fixation to the frame
/// center (or to the nearest border in the alternate mode), capped at sigma_max.
double peripheral_sigma(const FixationPoint& p, int frame_h, int frame_w,
                        double sigma_max = 64.0,
                        DistanceMode mode = DistanceMode::frame_center);

FoveaMask make_fovea_mask(const GridSpec& grid, const PatchIndex& s, FoveaMode mode,
                          double radius_px = 0.0);

/// O_{0,1} = L: the initial context is the low-resolution frame.
FoveatedState init_state(const Tensor& L);

/// O ← E⊙H + (1−E)⊙O within the current frame; k increments.
FoveatedState update_within_frame(const FoveatedState& state, const Tensor& H,
                                  const FoveaMask& E);

/// First fixation of the next frame: O ← E⊙H_next + (1−E)⊙O_K; t increments,
/// k resets to 1.
FoveatedState advance_frame(const FoveatedState& state, const Tensor& H_next,
                            const FoveaMask& E_first);

}  // namespace medirl
