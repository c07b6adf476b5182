#pragma once

#include <string>
#include <vector>

#include "medirl/common.hpp"

namespace medirl {

/// Frame discretization into an n×m patch grid. Remainder pixels (frame
/// dimensions not multiples of the patch size) are absorbed by the last
/// row/column, so every pixel belongs to exactly one patch.
struct GridSpec {
    int frame_h = 0;
    int frame_w = 0;
    int patch_h = 0;
    int patch_w = 0;
    int n = 0;  // rows
    int m = 0;  // cols
    std::vector<int> col_widths;
    std::vector<int> row_heights;

    int num_patches() const { return n * m; }
    int col_x0(int col) const { return col * patch_w; }
    int row_y0(int row) const { return row * patch_h; }
    // Frame center in pixel coordinates; reference point for inward/outward moves.
    double center_x() const { return frame_w / 2; }
    double center_y() const { return frame_h / 2; }
};

struct PatchIndex {
    int row = 0;
    int col = 0;
    bool operator==(const PatchIndex&) const = default;
};

struct FixationPoint {
    int x = 0;
    int y = 0;
    double duration_ms = 0.0;
    int frame_index = 0;
};

struct FixationSequence {
    std::vector<FixationPoint> points;
    std::string driver_id;
    std::string video_id;
};

enum class ActionLabel { left, right, up, down, focus_inward, focus_outward, stay };

const char* to_string(ActionLabel a);

GridSpec build_grid(int frame_h, int frame_w, int patch_h, int patch_w);

PatchIndex point_to_patch(const GridSpec& grid, const FixationPoint& p);

/// Pixel center of a patch's extent (integer division, round down).
std::pair<int, int> patch_center(const GridSpec& grid, const PatchIndex& s);

/// Labels the move between two patches. Diagonal moves are focus-inward when
/// the destination patch center is strictly closer to the frame center than
/// the source, focus-outward otherwise (ties are outward).
ActionLabel classify_action(const PatchIndex& from, const PatchIndex& to, const GridSpec& grid);

inline int patch_to_state(const GridSpec& grid, const PatchIndex& s) { return s.row * grid.m + s.col; }
inline PatchIndex state_to_patch(const GridSpec& grid, int state) {
    return PatchIndex{state / grid.m, state % grid.m};
}

}  // namespace medirl
