#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "medirl/grid.hpp"

using namespace medirl;

TEST_CASE("build_grid paper geometry 144x256 / 12x17") {
    GridSpec g = build_grid(144, 256, 12, 17);
    CHECK(g.n == 12);
    CHECK(g.m == 15);
    REQUIRE(g.col_widths.size() == 15);
    for (int c = 0; c < 14; ++c) CHECK(g.col_widths[c] == 17);
    CHECK(g.col_widths[14] == 18);  // remainder absorbed by the last column
    int total_w = 0;
    for (int w : g.col_widths) total_w += w;
    CHECK(total_w == 256);
    int total_h = 0;
    for (int h : g.row_heights) total_h += h;
    CHECK(total_h == 144);
}

TEST_CASE("build_grid single patch and remainder absorption") {
    GridSpec one = build_grid(144, 256, 144, 256);
    CHECK(one.n == 1);
    CHECK(one.m == 1);

    GridSpec g = build_grid(10, 10, 3, 3);
    CHECK(g.n == 3);
    CHECK(g.m == 3);
    CHECK(g.row_heights[2] == 4);
    CHECK(g.col_widths[2] == 4);
}

TEST_CASE("build_grid rejects bad dimensions") {
    CHECK_THROWS_AS(build_grid(0, 10, 1, 1), ValidationError);
    CHECK_THROWS_AS(build_grid(10, 10, 0, 1), ValidationError);
    CHECK_THROWS_AS(build_grid(10, 10, 11, 1), ValidationError);
    CHECK_THROWS_AS(build_grid(10, 10, 1, 11), ValidationError);
}

TEST_CASE("point_to_patch corners and boundaries") {
    GridSpec g = build_grid(144, 256, 12, 17);
    CHECK(point_to_patch(g, {0, 0}) == PatchIndex{0, 0});
    CHECK(point_to_patch(g, {255, 143}) == PatchIndex{11, 14});
    CHECK(point_to_patch(g, {17, 12}) == PatchIndex{1, 1});
    CHECK_THROWS_AS(point_to_patch(g, {256, 0}), ValidationError);
    CHECK_THROWS_AS(point_to_patch(g, {0, -1}), ValidationError);
}

TEST_CASE("patch_center examples") {
    GridSpec g = build_grid(144, 256, 12, 17);
    CHECK(patch_center(g, {0, 0}) == std::pair<int, int>{8, 6});

    GridSpec one = build_grid(144, 256, 144, 256);
    CHECK(patch_center(one, {0, 0}) == std::pair<int, int>{128, 72});

    GridSpec g10 = build_grid(10, 10, 3, 3);
    CHECK(patch_center(g10, {2, 2}) == std::pair<int, int>{8, 8});

    CHECK_THROWS_AS(patch_center(g, {12, 0}), ValidationError);
}

TEST_CASE("classify_action basic labels") {
    GridSpec g = build_grid(144, 256, 12, 17);
    CHECK(classify_action({3, 3}, {3, 3}, g) == ActionLabel::stay);
    CHECK(classify_action({3, 3}, {3, 1}, g) == ActionLabel::left);
    CHECK(classify_action({3, 3}, {3, 5}, g) == ActionLabel::right);
    CHECK(classify_action({3, 3}, {1, 3}, g) == ActionLabel::up);
    CHECK(classify_action({3, 3}, {5, 3}, g) == ActionLabel::down);
    // diagonal toward the frame center (128,72): patch (5,7) center is close
    CHECK(classify_action({0, 0}, {5, 7}, g) == ActionLabel::focus_inward);
    CHECK(classify_action({5, 7}, {0, 0}, g) == ActionLabel::focus_outward);
}

TEST_CASE("partition: every pixel belongs to exactly one patch") {
    GridSpec g = build_grid(144, 256, 12, 17);
    for (int y = 0; y < g.frame_h; ++y)
        for (int x = 0; x < g.frame_w; ++x) {
            PatchIndex s = point_to_patch(g, {x, y});
            int x0 = g.col_x0(s.col), x1 = x0 + g.col_widths[s.col];
            int y0 = g.row_y0(s.row), y1 = y0 + g.row_heights[s.row];
            REQUIRE(x >= x0);
            REQUIRE(x < x1);
            REQUIRE(y >= y0);
            REQUIRE(y < y1);
        }
}

TEST_CASE("patch_center round-trips through point_to_patch") {
    for (const GridSpec& g : {build_grid(144, 256, 12, 17), build_grid(10, 10, 3, 3)}) {
        for (int r = 0; r < g.n; ++r)
            for (int c = 0; c < g.m; ++c) {
                auto [x, y] = patch_center(g, {r, c});
                CHECK(point_to_patch(g, {x, y}) == PatchIndex{r, c});
            }
    }
}

TEST_CASE("classify_action symmetry properties") {
    GridSpec g = build_grid(144, 256, 12, 17);
    for (int r1 = 0; r1 < g.n; r1 += 3)
        for (int c1 = 0; c1 < g.m; c1 += 3)
            for (int r2 = 0; r2 < g.n; r2 += 3)
                for (int c2 = 0; c2 < g.m; c2 += 3) {
                    PatchIndex a{r1, c1}, b{r2, c2};
                    ActionLabel fwd = classify_action(a, b, g);
                    ActionLabel rev = classify_action(b, a, g);
                    if (a == b) {
                        CHECK(fwd == ActionLabel::stay);
                        continue;
                    }
                    CHECK(fwd != ActionLabel::stay);
                    if (fwd == ActionLabel::left) CHECK(rev == ActionLabel::right);
                    if (fwd == ActionLabel::up) CHECK(rev == ActionLabel::down);
                    if (fwd == ActionLabel::focus_inward) CHECK(rev == ActionLabel::focus_outward);
                    // inward/outward swap can only fail on an exact distance tie,
                    // where both directions are labeled outward
                    if (fwd == ActionLabel::focus_outward)
                        CHECK((rev == ActionLabel::focus_inward || rev == ActionLabel::focus_outward));
                }
}
