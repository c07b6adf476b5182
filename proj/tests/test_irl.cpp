#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "medirl/irl.hpp"

using namespace medirl;

namespace {

FixationMdp grid_mdp(int n, int m, double gamma = 0.98) {
    GridSpec g = build_grid(n * 4, m * 4, 4, 4);
    return build_mdp(g, ActionModel::patch_target, gamma);
}

std::vector<double> random_reward(int S, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    std::vector<double> r(S);
    for (double& x : r) x = rng.uniform(lo, hi);
    return r;
}

}  // namespace

TEST_CASE("patch-target mdp: every action jumps to its patch") {
    FixationMdp mdp = grid_mdp(2, 2);
    CHECK(mdp.S == 4);
    CHECK(mdp.A == 4);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 4; ++a) CHECK(mdp.next_state(s, a) == a);
}

TEST_CASE("seven-macro mdp saturates at borders") {
    GridSpec g = build_grid(12, 12, 4, 4);  // 3x3
    FixationMdp mdp = build_mdp(g, ActionModel::seven_macro);
    CHECK(mdp.A == 7);
    int corner = 0;  // patch (0,0)
    CHECK(mdp.next_state(corner, static_cast<int>(ActionLabel::left)) == corner);
    CHECK(mdp.next_state(corner, static_cast<int>(ActionLabel::up)) == corner);
    CHECK(mdp.next_state(corner, static_cast<int>(ActionLabel::right)) == 1);
    CHECK(mdp.next_state(corner, static_cast<int>(ActionLabel::down)) == 3);
    CHECK(mdp.next_state(corner, static_cast<int>(ActionLabel::stay)) == corner);
    // inward from the corner moves diagonally toward the center patch (1,1)
    CHECK(mdp.next_state(corner, static_cast<int>(ActionLabel::focus_inward)) == 4);
    // outward from the corner saturates
    CHECK(mdp.next_state(corner, static_cast<int>(ActionLabel::focus_outward)) == corner);
    // outward from the center has no direction: stays
    CHECK(mdp.next_state(4, static_cast<int>(ActionLabel::focus_outward)) == 4);
}

TEST_CASE("every (s,a) has exactly one successor in range") {
    for (auto model : {ActionModel::patch_target, ActionModel::seven_macro}) {
        GridSpec g = build_grid(16, 20, 4, 4);
        FixationMdp mdp = build_mdp(g, model);
        for (int s = 0; s < mdp.S; ++s)
            for (int a = 0; a < mdp.A; ++a) {
                int nxt = mdp.next_state(s, a);
                REQUIRE(nxt >= 0);
                REQUIRE(nxt < mdp.S);
            }
    }
}

TEST_CASE("build_mdp rejects bad gamma") {
    GridSpec g = build_grid(8, 8, 4, 4);
    CHECK_THROWS_AS(build_mdp(g, ActionModel::patch_target, 0.0), ValidationError);
    CHECK_THROWS_AS(build_mdp(g, ActionModel::patch_target, 1.5), ValidationError);
}

TEST_CASE("uniform reward gives a uniform policy at every step") {
    FixationMdp mdp = grid_mdp(2, 3);
    std::vector<double> r(mdp.S, 0.7);
    auto vi = soft_value_iteration(mdp, r, 4);
    for (const auto& pi : vi.policy.steps)
        for (int s = 0; s < mdp.S; ++s)
            for (int a = 0; a < mdp.A; ++a)
                CHECK(pi.at(s, a) == doctest::Approx(1.0 / mdp.A).epsilon(1e-12));
}

TEST_CASE("single-state mdp: stay probability 1 and geometric value sum") {
    GridSpec g = build_grid(4, 4, 4, 4);
    FixationMdp mdp = build_mdp(g, ActionModel::patch_target, 0.5);
    std::vector<double> r{2.0};
    auto vi = soft_value_iteration(mdp, r, 3);
    CHECK(vi.policy.steps[0].at(0, 0) == 1.0);
    // B_1 = r·(1 + γ + γ² + γ³)
    CHECK(vi.values[0][0] == doctest::Approx(2.0 * (1 + 0.5 + 0.25 + 0.125)));
}

TEST_CASE("two-state softmax example at gamma 1") {
    GridSpec g = build_grid(4, 8, 4, 4);
    FixationMdp mdp = build_mdp(g, ActionModel::patch_target, 1.0);
    std::vector<double> r{0.0, 1.0};
    auto vi = soft_value_iteration(mdp, r, 1);
    double e = std::exp(1.0);
    CHECK(vi.policy.steps[0].at(0, 1) == doctest::Approx(e / (1 + e)).epsilon(1e-9));
    CHECK(vi.policy.steps[0].at(1, 1) == doctest::Approx(e / (1 + e)).epsilon(1e-9));
}

TEST_CASE("policy rows sum to one and stay finite for large rewards") {
    FixationMdp mdp = grid_mdp(3, 3);
    auto r = random_reward(mdp.S, 5, -1e3, 1e3);
    auto vi = soft_value_iteration(mdp, r, 5);
    for (const auto& pi : vi.policy.steps)
        for (int s = 0; s < mdp.S; ++s) {
            double sum = 0.0;
            for (int a = 0; a < mdp.A; ++a) {
                REQUIRE(std::isfinite(pi.at(s, a)));
                sum += pi.at(s, a);
            }
            REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    for (const auto& level : vi.values)
        for (double v : level) REQUIRE(std::isfinite(v));
}

TEST_CASE("constant reward shift leaves the policy unchanged") {
    FixationMdp mdp = grid_mdp(2, 3, 0.9);
    auto r = random_reward(mdp.S, 8);
    auto shifted = r;
    for (double& x : shifted) x += 17.5;
    auto a = soft_value_iteration(mdp, r, 4);
    auto b = soft_value_iteration(mdp, shifted, 4);
    for (int t = 0; t < 4; ++t)
        for (std::size_t i = 0; i < a.policy.steps[t].v.size(); ++i)
            CHECK(b.policy.steps[t].v[i] == doctest::Approx(a.policy.steps[t].v[i]).epsilon(1e-9));
}

TEST_CASE("stationary soft VI converges and matches its fixed point") {
    FixationMdp mdp = grid_mdp(2, 2, 0.9);
    auto r = random_reward(mdp.S, 3);
    auto vi = soft_value_iteration_stationary(mdp, r, 1e-10, 5000);
    CHECK(vi.policy.stationary);
    // fixed point: V(s) = logsumexp_a [r(s) + γV(next)]
    const auto& v = vi.values[0];
    for (int s = 0; s < mdp.S; ++s) {
        std::vector<double> q(mdp.A);
        for (int a = 0; a < mdp.A; ++a) q[a] = r[s] + 0.9 * v[mdp.next_state(s, a)];
        CHECK(v[s] == doctest::Approx(logsumexp(q)).epsilon(1e-6));
    }
    CHECK_THROWS_AS(soft_value_iteration_stationary(mdp, r, 1e-12, 1), ComputeError);
}

TEST_CASE("expected_svf: horizon one returns the start distribution") {
    FixationMdp mdp = grid_mdp(2, 2);
    auto vi = soft_value_iteration(mdp, random_reward(4, 1), 3);
    std::vector<double> start{0.25, 0.25, 0.25, 0.25};
    auto mu = expected_svf(mdp, vi.policy, start, 1);
    CHECK(mu == start);
}

TEST_CASE("expected_svf conserves probability: sum equals horizon") {
    FixationMdp mdp = grid_mdp(3, 2);
    auto vi = soft_value_iteration(mdp, random_reward(mdp.S, 2), 5);
    std::vector<double> start(mdp.S, 1.0 / mdp.S);
    for (int horizon : {1, 3, 6}) {
        auto mu = expected_svf(mdp, vi.policy, start, horizon);
        CHECK(std::accumulate(mu.begin(), mu.end(), 0.0) ==
              doctest::Approx(horizon).epsilon(1e-9));
    }
}

TEST_CASE("two-state uniform policy spreads mass evenly: mu = (1.5, 1.5)") {
    GridSpec g = build_grid(4, 8, 4, 4);
    FixationMdp mdp = build_mdp(g, ActionModel::patch_target, 1.0);
    std::vector<double> r(2, 0.0);
    auto vi = soft_value_iteration(mdp, r, 2);
    auto mu = expected_svf(mdp, vi.policy, {0.5, 0.5}, 3);
    CHECK(mu[0] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(mu[1] == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("expected_svf validates its start distribution") {
    FixationMdp mdp = grid_mdp(2, 2);
    auto vi = soft_value_iteration(mdp, random_reward(4, 1), 2);
    CHECK_THROWS_AS(expected_svf(mdp, vi.policy, {0.9, 0.0, 0.0, 0.0}, 2), ValidationError);
}

TEST_CASE("empirical_svf counting identities") {
    Demonstrations demos;
    demos.states = {{0, 1, 1}};
    auto mu = empirical_svf(demos, 4, 3);
    CHECK(mu == std::vector<double>{1.0, 2.0, 0.0, 0.0});

    demos.states = {{0, 1, 1}, {0, 1, 1}};
    auto mu2 = empirical_svf(demos, 4, 3);
    CHECK(mu2 == mu);  // identical trajectories average to the same counts

    demos.states = {{0, 1, 2, 3, 0}, {1, 1}};
    auto mu3 = empirical_svf(demos, 4, 3);
    double total = std::accumulate(mu3.begin(), mu3.end(), 0.0);
    CHECK(total == doctest::Approx((3.0 + 2.0) / 2.0));  // truncated average length

    CHECK_THROWS_AS(empirical_svf(Demonstrations{}, 4, 3), ValidationError);
}

TEST_CASE("maxent gradient sign structure") {
    std::vector<double> mu_d{3.0, 0.0, 0.0};
    std::vector<double> mu{1.0, 1.0, 1.0};
    auto g = maxent_gradient(mu_d, mu);
    CHECK(g[0] < 0.0);  // demonstrated state: reward will rise under descent
    CHECK(g[1] > 0.0);
    CHECK(g[2] > 0.0);
    CHECK(std::accumulate(g.begin(), g.end(), 0.0) == doctest::Approx(0.0));

    auto zero = maxent_gradient(mu, mu);
    for (double x : zero) CHECK(x == 0.0);
    CHECK_THROWS_AS(maxent_gradient({1.0}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("log likelihood of a uniform policy is -tau log S") {
    FixationMdp mdp = grid_mdp(2, 3);
    std::vector<double> r(mdp.S, 0.4);
    Demonstrations demos;
    demos.states = {{0, 3, 5, 1}};  // 3 decisions
    double ll = log_likelihood(demos, r, mdp, 4);
    CHECK(ll == doctest::Approx(-3.0 * std::log(6.0)).epsilon(1e-9));
}

TEST_CASE("single-state mdp has log likelihood zero") {
    GridSpec g = build_grid(4, 4, 4, 4);
    FixationMdp mdp = build_mdp(g, ActionModel::patch_target, 0.98);
    Demonstrations demos;
    demos.states = {{0, 0, 0}};
    CHECK(log_likelihood(demos, {1.0}, mdp, 3) == doctest::Approx(0.0));
}

TEST_CASE("oracle: all rewards equal gives a uniform trajectory distribution") {
    FixationMdp mdp = grid_mdp(2, 2, 0.9);
    auto e = enumerate_trajectories(mdp, std::vector<double>(4, 0.3), 0, 3);
    CHECK(e.probs.size() == 64);
    for (double p : e.probs) CHECK(p == doctest::Approx(1.0 / 64).epsilon(1e-12));
}

TEST_CASE("oracle: length one is a softmax of gamma-discounted rewards") {
    FixationMdp mdp = grid_mdp(2, 2, 0.5);
    auto r = random_reward(4, 9);
    auto e = enumerate_trajectories(mdp, r, 2, 1);
    std::vector<double> logits(4);
    for (int a = 0; a < 4; ++a) logits[a] = 0.5 * r[a];
    double z = logsumexp(logits);
    for (int a = 0; a < 4; ++a)
        CHECK(e.probs[a] == doctest::Approx(std::exp(logits[a] - z)).epsilon(1e-12));
}

TEST_CASE("oracle marginals equal expected_svf on the 2x2 grid") {
    FixationMdp mdp = grid_mdp(2, 2, 0.98);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto r = random_reward(4, seed);
        for (int length = 1; length <= 4; ++length) {
            auto e = enumerate_trajectories(mdp, r, 1, length);
            auto vi = soft_value_iteration(mdp, r, length);
            std::vector<double> start(4, 0.0);
            start[1] = 1.0;
            auto mu = expected_svf(mdp, vi.policy, start, length + 1);
            for (int s = 0; s < 4; ++s)
                CHECK(mu[s] == doctest::Approx(e.marginal_visits[s]).epsilon(1e-9));
        }
    }
}

TEST_CASE("log likelihood matches the enumeration oracle exactly") {
    GridSpec g = build_grid(4, 12, 4, 4);  // 3 states
    FixationMdp mdp = build_mdp(g, ActionModel::patch_target, 0.98);
    auto r = random_reward(3, 17);
    Demonstrations demos;
    demos.states = {{0, 2, 1}};
    double ll = log_likelihood(demos, r, mdp, 3);
    auto e = enumerate_trajectories(mdp, r, 0, 2);
    CHECK(ll == doctest::Approx(e.log_prob_of({0, 2, 1})).epsilon(1e-9));
}

TEST_CASE("enumeration guard rejects oversized spaces") {
    FixationMdp mdp = grid_mdp(4, 4);
    CHECK_THROWS_AS(enumerate_trajectories(mdp, random_reward(16, 1), 0, 5), ValidationError);
}

TEST_CASE("sampling from the policy matches expected SVF (stationarity)") {
    FixationMdp mdp = grid_mdp(2, 2, 0.98);
    auto r = random_reward(4, 33);
    int decisions = 3, horizon = decisions + 1;
    auto vi = soft_value_iteration(mdp, r, decisions);

    Rng rng(99);
    Demonstrations demos;
    const int n = 100000;
    for (int i = 0; i < n; ++i) demos.states.push_back(sample_trajectory(mdp, vi, 2, rng));

    std::vector<double> start(4, 0.0);
    start[2] = 1.0;
    auto mu = expected_svf(mdp, vi.policy, start, horizon);
    auto mu_d = empirical_svf(demos, 4, horizon);
    auto g = maxent_gradient(mu_d, mu);
    double norm = 0.0;
    for (double x : g) norm += x * x;
    CHECK(std::sqrt(norm) < 0.01 * horizon);
}

namespace {

// planted-reward toy problem shared by the training smoke tests
std::vector<SceneSequence> toy_scenes(int count, const GridSpec& grid, int frames,
                                      std::uint64_t seed, int experts, int k_per_frame) {
    SynthParams sp;
    sp.num_distractors = 2;
    sp.brake_onset = frames / 2;
    FixationMdp mdp = build_mdp(grid, ActionModel::patch_target, 0.98);

    std::vector<SceneSequence> scenes;
    for (int i = 0; i < count; ++i) {
        SceneSequence scene = synth_scene(Rng::mix(seed, i), grid, frames, sp);
        // reward peaked on the lead box
        std::vector<std::vector<double>> rewards_per_decision;
        std::vector<int> frame_of;
        for (int t = 0; t < frames; ++t)
            for (int k = 0; k < k_per_frame; ++k) frame_of.push_back(t);
        for (std::size_t j = 1; j < frame_of.size(); ++j) {
            const auto& f = scene.frames[frame_of[j]];
            std::vector<double> r(grid.num_patches(), 0.0);
            for (int pr = 0; pr < grid.n; ++pr)
                for (int pc = 0; pc < grid.m; ++pc) {
                    auto [cx, cy] = patch_center(grid, {pr, pc});
                    if (f.lead_box->contains(cy, cx)) r[pr * grid.m + pc] = 4.0;
                }
            rewards_per_decision.push_back(std::move(r));
        }
        auto vi = soft_value_iteration_steps(mdp, rewards_per_decision);
        Rng rng(Rng::mix(seed, 7777 + i));
        for (int e = 0; e < experts; ++e) {
            auto states = sample_trajectory(mdp, vi, -1, rng);
            FixationSequence seq;
            seq.driver_id = "d" + std::to_string(e);
            seq.video_id = scene.video_id;
            for (std::size_t p = 0; p < states.size(); ++p) {
                auto [x, y] = patch_center(grid, state_to_patch(grid, states[p]));
                seq.points.push_back({x, y, 200.0, frame_of[p]});
            }
            scene.ground_truth_fixations.push_back(std::move(seq));
        }
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

}  // namespace

TEST_CASE("train: zero epochs returns the untouched initialization") {
    GridSpec grid = build_grid(48, 64, 16, 16);
    auto scenes = toy_scenes(2, grid, 3, 5, 2, 2);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 11;
    TrainResult result = train(scenes, grid, cfg);
    RewardNetParams fresh = init_params(result.params.config, 11);
    CHECK(result.params.layers[0].W.v == fresh.layers[0].W.v);
    CHECK(result.params.head_w == fresh.head_w);
    CHECK(result.history.empty());
}

TEST_CASE("train: identical seeds give identical histories") {
    GridSpec grid = build_grid(48, 64, 16, 16);
    auto scenes = toy_scenes(2, grid, 3, 6, 2, 2);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_sequences = 4;
    cfg.seed = 21;
    TrainResult a = train(scenes, grid, cfg);
    TrainResult b = train(scenes, grid, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].nll == b.history[i].nll);
        CHECK(a.history[i].grad_norm == b.history[i].grad_norm);
    }
    CHECK(a.params.head_w == b.params.head_w);
}

TEST_CASE("train: NLL decreases over the first epochs on a planted reward") {
    GridSpec grid = build_grid(48, 64, 8, 8);  // 6x8 grid
    auto scenes = toy_scenes(6, grid, 3, 31, 3, 2);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_sequences = 6;
    cfg.seed = 31;
    TrainResult result = train(scenes, grid, cfg);
    REQUIRE(result.history.size() == 5);
    CHECK(result.history.back().nll < result.history.front().nll);
}
