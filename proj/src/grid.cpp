#include "medirl/grid.hpp"

#include <algorithm>
#include <cmath>

namespace medirl {

const char* to_string(ActionLabel a) {
    switch (a) {
        case ActionLabel::left: return "left";
        case ActionLabel::right: return "right";
        case ActionLabel::up: return "up";
        case ActionLabel::down: return "down";
        case ActionLabel::focus_inward: return "focus-inward";
        case ActionLabel::focus_outward: return "focus-outward";
        case ActionLabel::stay: return "stay";
    }
    return "?";
}

GridSpec build_grid(int frame_h, int frame_w, int patch_h, int patch_w) {
    if (frame_h <= 0 || frame_w <= 0 || patch_h <= 0 || patch_w <= 0)
        throw ValidationError("build_grid: dimensions must be positive");
    if (patch_h > frame_h || patch_w > frame_w)
        throw ValidationError("build_grid: patch larger than frame");

    GridSpec g;
    g.frame_h = frame_h;
    g.frame_w = frame_w;
    g.patch_h = patch_h;
    g.patch_w = patch_w;
    g.n = frame_h / patch_h;
    g.m = frame_w / patch_w;
    g.row_heights.assign(g.n, patch_h);
    g.col_widths.assign(g.m, patch_w);
    g.row_heights.back() += frame_h - g.n * patch_h;
    g.col_widths.back() += frame_w - g.m * patch_w;
    return g;
}

PatchIndex point_to_patch(const GridSpec& grid, const FixationPoint& p) {
    if (p.x < 0 || p.x >= grid.frame_w || p.y < 0 || p.y >= grid.frame_h)
        throw ValidationError("point_to_patch: point outside frame bounds");
    PatchIndex s;
    s.row = std::min(p.y / grid.patch_h, grid.n - 1);
    s.col = std::min(p.x / grid.patch_w, grid.m - 1);
    return s;
}

static void check_in_bounds(const GridSpec& grid, const PatchIndex& s, const char* who) {
    if (s.row < 0 || s.row >= grid.n || s.col < 0 || s.col >= grid.m)
        throw ValidationError(std::string(who) + ": patch index out of bounds");
}

std::pair<int, int> patch_center(const GridSpec& grid, const PatchIndex& s) {
    check_in_bounds(grid, s, "patch_center");
    int x = grid.col_x0(s.col) + grid.col_widths[s.col] / 2;
    int y = grid.row_y0(s.row) + grid.row_heights[s.row] / 2;
    return {x, y};
}

ActionLabel classify_action(const PatchIndex& from, const PatchIndex& to, const GridSpec& grid) {
    check_in_bounds(grid, from, "classify_action");
    check_in_bounds(grid, to, "classify_action");
    if (from == to) return ActionLabel::stay;

    int drow = to.row - from.row;
    int dcol = to.col - from.col;
    if (drow == 0) return dcol < 0 ? ActionLabel::left : ActionLabel::right;
    if (dcol == 0) return drow < 0 ? ActionLabel::up : ActionLabel::down;

    auto [fx, fy] = patch_center(grid, from);
    auto [tx, ty] = patch_center(grid, to);
    double cx = grid.center_x(), cy = grid.center_y();
    double d_from = std::hypot(fx - cx, fy - cy);
    double d_to = std::hypot(tx - cx, ty - cy);
    return d_to < d_from ? ActionLabel::focus_inward : ActionLabel::focus_outward;
}

}  // namespace medirl
