#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "medirl/scanpath.hpp"

using namespace medirl;

namespace {

struct Fixture {
    GridSpec grid = build_grid(48, 64, 16, 16);  // 3x4, equal patches
    SceneSequence scene;
    FixationMdp mdp;
    TrainConfig cfg;
    RewardNetParams params;

    Fixture() {
        SynthParams sp;
        sp.num_distractors = 1;
        sp.brake_onset = 1;
        scene = synth_scene(77, grid, 3, sp);
        mdp = build_mdp(grid, ActionModel::patch_target, 0.98);
        cfg.seed = 5;
        NetConfig net;
        net.input_dim = 11;
        net.hidden = {6};
        net.batch_norm = false;
        params = init_params(net, 5);
    }
};

}  // namespace

TEST_CASE("rollout: same seed, same scanpath; different seed differs") {
    Fixture f;
    std::vector<int> k(f.scene.frames.size(), 2);
    IoRConfig ior;
    auto a = rollout(f.params, f.scene, f.grid, f.mdp, k, ior, 42, RolloutMode::sample, f.cfg);
    auto b = rollout(f.params, f.scene, f.grid, f.mdp, k, ior, 42, RolloutMode::sample, f.cfg);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].patch == b.entries[i].patch);
        CHECK(a.entries[i].prob == b.entries[i].prob);
    }
    auto c = rollout(f.params, f.scene, f.grid, f.mdp, k, ior, 43, RolloutMode::sample, f.cfg);
    bool same = true;
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        if (!(a.entries[i].patch == c.entries[i].patch)) same = false;
    CHECK(!same);
}

TEST_CASE("rollout: decay 1 leaves the raw policy untouched") {
    Fixture f;
    std::vector<int> k(f.scene.frames.size(), 2);
    IoRConfig no_ior;
    no_ior.decay = 1.0;
    IoRConfig strong;
    strong.decay = 0.0;

    // argmax rollouts visit the same first patch, but with decay 0 the second
    // step must move away while decay 1 may stay
    auto raw = rollout(f.params, f.scene, f.grid, f.mdp, k, no_ior, 1, RolloutMode::argmax, f.cfg);
    // probabilities recorded under decay 1 are exactly the softmax row: all in (0,1]
    for (const auto& e : raw.entries) {
        CHECK(e.prob > 0.0);
        CHECK(e.prob <= 1.0);
    }
}

TEST_CASE("rollout: decay 0 in argmax mode never revisits within a frame") {
    Fixture f;
    std::vector<int> k(f.scene.frames.size(), 4);
    IoRConfig ior;
    ior.decay = 0.0;
    auto path = rollout(f.params, f.scene, f.grid, f.mdp, k, ior, 3, RolloutMode::argmax, f.cfg);
    for (std::size_t frame = 0; frame < f.scene.frames.size(); ++frame) {
        std::set<int> seen;
        for (const auto& e : path.entries)
            if (e.frame_index == static_cast<int>(frame)) {
                int s = e.patch.row * f.grid.m + e.patch.col;
                CHECK(!seen.count(s));
                seen.insert(s);
            }
    }
}

TEST_CASE("rollout: argmax with decay 1 ignores the seed") {
    Fixture f;
    std::vector<int> k(f.scene.frames.size(), 2);
    IoRConfig ior;
    ior.decay = 1.0;
    auto a = rollout(f.params, f.scene, f.grid, f.mdp, k, ior, 7, RolloutMode::argmax, f.cfg);
    auto b = rollout(f.params, f.scene, f.grid, f.mdp, k, ior, 999, RolloutMode::argmax, f.cfg);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i].patch == b.entries[i].patch);
}

TEST_CASE("rollout rejects zero total fixations and bad dims") {
    Fixture f;
    IoRConfig ior;
    std::vector<int> zeros(f.scene.frames.size(), 0);
    CHECK_THROWS_AS(
        rollout(f.params, f.scene, f.grid, f.mdp, zeros, ior, 1, RolloutMode::sample, f.cfg),
        ValidationError);
    GridSpec other = build_grid(32, 32, 16, 16);
    FixationMdp mdp2 = build_mdp(other, ActionModel::patch_target, 0.98);
    std::vector<int> k(f.scene.frames.size(), 1);
    CHECK_THROWS_AS(
        rollout(f.params, f.scene, other, mdp2, k, ior, 1, RolloutMode::sample, f.cfg),
        ValidationError);
}

namespace {

// net rigged to output a fixed per-patch reward regardless of features:
// zero weights everywhere, bias of the head set per patch is impossible, so
// instead drive saliency tests through a handcrafted single-layer net whose
// output depends only on the M-indicator column.
RewardNetParams constant_reward_net(double value) {
    NetConfig net;
    net.input_dim = 11;
    net.hidden = {};
    net.batch_norm = false;
    RewardNetParams p = init_params(net, 1);
    for (double& w : p.head_w) w = 0.0;
    p.head_b = value;
    return p;
}

}  // namespace

TEST_CASE("policy_saliency: constant reward yields a uniform pixel map before smoothing") {
    Fixture f;
    RewardNetParams flat = constant_reward_net(0.3);
    auto maps = policy_saliency(flat, f.scene, f.grid, f.mdp, 2, f.cfg, /*sigma_smooth=*/0.0);
    REQUIRE(maps.size() == f.scene.frames.size());
    double expect = 1.0 / (48.0 * 64.0);
    for (double v : maps[0].p) CHECK(v == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("policy_saliency maps always sum to one") {
    Fixture f;
    auto maps = policy_saliency(f.params, f.scene, f.grid, f.mdp, 2, f.cfg);
    for (const auto& m : maps) m.validate();
}

TEST_CASE("policy_saliency is invariant to constant reward shifts") {
    Fixture f;
    RewardNetParams a = constant_reward_net(0.0);
    RewardNetParams b = constant_reward_net(250.0);
    auto ma = policy_saliency(a, f.scene, f.grid, f.mdp, 2, f.cfg);
    auto mb = policy_saliency(b, f.scene, f.grid, f.mdp, 2, f.cfg);
    for (std::size_t t = 0; t < ma.size(); ++t)
        for (std::size_t i = 0; i < ma[t].p.size(); ++i)
            CHECK(mb[t].p[i] == doctest::Approx(ma[t].p[i]).epsilon(1e-9));
}

TEST_CASE("a hot patch captures nearly all mass at horizon 1") {
    // single-frame scene, net whose reward is +100 on the patch the M column
    // marks; built by hand: head reads only the M indicator column (index 6)
    Fixture f;
    NetConfig net;
    net.input_dim = 11;
    net.hidden = {};
    net.batch_norm = false;
    RewardNetParams p = init_params(net, 2);
    for (double& w : p.head_w) w = 0.0;
    p.head_w[6] = 100.0;  // M indicator column
    p.head_b = 0.0;

    // shrink the lead box into exactly one patch so one state is hot
    SceneSequence scene = f.scene;
    scene.frames.resize(1);
    scene.speeds.resize(1);
    scene.frames[0].lead_box = Box{18, 18, 30, 30};  // inside patch (1,1)

    auto maps = policy_saliency(p, scene, f.grid, f.mdp, 1, f.cfg, 0.0);
    double hot_mass = 0.0;
    for (int y = 16; y < 32; ++y)
        for (int x = 16; x < 32; ++x) hot_mass += maps[0].at(y, x);
    CHECK(hot_mass > 0.95);
}

TEST_CASE("fixations_to_map: single fixation without smoothing is a delta") {
    auto m = fixations_to_map({{7, 5, 100.0, 0}}, 10, 12, 0.0);
    CHECK(m.at(5, 7) == doctest::Approx(1.0));
    double rest = 0.0;
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x)
            if (!(x == 7 && y == 5)) rest += m.at(y, x);
    CHECK(rest == doctest::Approx(0.0));
}

TEST_CASE("fixations_to_map: equal durations split mass evenly between far modes") {
    auto m = fixations_to_map({{5, 5, 200.0, 0}, {58, 42, 200.0, 0}}, 48, 64, 2.0);
    double left = 0.0, right = 0.0;
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 64; ++x) (x < 32 ? left : right) += m.at(y, x);
    CHECK(left == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(right == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("fixations_to_map: durations weight the modes 1:3") {
    auto m = fixations_to_map({{5, 5, 100.0, 0}, {58, 42, 300.0, 0}}, 48, 64, 2.0);
    double left = 0.0, right = 0.0;
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 64; ++x) (x < 32 ? left : right) += m.at(y, x);
    CHECK(left == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(right == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("fixations_to_map is permutation invariant") {
    std::vector<FixationPoint> fwd = {{3, 3, 100.0, 0}, {20, 10, 50.0, 0}, {40, 30, 200.0, 0}};
    std::vector<FixationPoint> rev(fwd.rbegin(), fwd.rend());
    auto a = fixations_to_map(fwd, 48, 64, 3.0);
    auto b = fixations_to_map(rev, 48, 64, 3.0);
    for (std::size_t i = 0; i < a.p.size(); ++i) CHECK(a.p[i] == doctest::Approx(b.p[i]));
}

TEST_CASE("fixations_to_map rejects an empty list") {
    CHECK_THROWS_AS(fixations_to_map({}, 10, 10, 1.0), ValidationError);
}
