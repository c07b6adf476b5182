#include "medirl/irl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

namespace medirl {

FixationMdp build_mdp(const GridSpec& grid, ActionModel action_model, double gamma, int horizon) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("build_mdp: gamma must be in (0,1]");
    FixationMdp mdp;
    mdp.grid = grid;
    mdp.action_model = action_model;
    mdp.gamma = gamma;
    mdp.horizon = horizon;
    mdp.S = grid.num_patches();

    if (action_model == ActionModel::patch_target) {
        mdp.A = mdp.S;
        mdp.next.resize(static_cast<std::size_t>(mdp.S) * mdp.A);
        for (int s = 0; s < mdp.S; ++s)
            for (int a = 0; a < mdp.A; ++a) mdp.next[static_cast<std::size_t>(s) * mdp.A + a] = a;
        return mdp;
    }

    // seven-macro: action order matches ActionLabel
    mdp.A = 7;
    mdp.next.resize(static_cast<std::size_t>(mdp.S) * 7);
    FixationPoint center{static_cast<int>(grid.center_x()), static_cast<int>(grid.center_y()), 0, 0};
    PatchIndex center_patch = point_to_patch(grid, center);
    for (int s = 0; s < mdp.S; ++s) {
        PatchIndex p = state_to_patch(grid, s);
        auto clampp = [&](int row, int col) {
            row = std::clamp(row, 0, grid.n - 1);
            col = std::clamp(col, 0, grid.m - 1);
            return row * grid.m + col;
        };
        int in_dr = center_patch.row > p.row ? 1 : (center_patch.row < p.row ? -1 : 0);
        int in_dc = center_patch.col > p.col ? 1 : (center_patch.col < p.col ? -1 : 0);
        int* row = &mdp.next[static_cast<std::size_t>(s) * 7];
        row[static_cast<int>(ActionLabel::left)] = clampp(p.row, p.col - 1);
        row[static_cast<int>(ActionLabel::right)] = clampp(p.row, p.col + 1);
        row[static_cast<int>(ActionLabel::up)] = clampp(p.row - 1, p.col);
        row[static_cast<int>(ActionLabel::down)] = clampp(p.row + 1, p.col);
        row[static_cast<int>(ActionLabel::focus_inward)] = clampp(p.row + in_dr, p.col + in_dc);
        row[static_cast<int>(ActionLabel::focus_outward)] = clampp(p.row - in_dr, p.col - in_dc);
        row[static_cast<int>(ActionLabel::stay)] = s;
    }
    return mdp;
}

namespace {

void check_reward(const std::vector<double>& r, int S) {
    if (static_cast<int>(r.size()) != S) throw ValidationError("reward length != S");
    for (double x : r)
        if (!std::isfinite(x)) throw ValidationError("non-finite reward");
}

// Shared backward pass: rewards[j] applies at position j+2 (1-based positions),
// start_reward at position 1 (affects values only, never the policy).
SoftVIResult backward_pass(const FixationMdp& mdp, const std::vector<double>* start_reward,
                           const std::vector<std::vector<double>>& rewards) {
    int N = static_cast<int>(rewards.size());
    SoftVIResult out;
    out.values.assign(N + 1, std::vector<double>(mdp.S, 0.0));
    out.policy.steps.assign(N, Matrix());

    // B_{N+1}; for N = 0 the single position is the start itself
    double w_last = std::pow(mdp.gamma, N);
    const std::vector<double>* r_last = N > 0 ? &rewards[N - 1] : start_reward;
    for (int s = 0; s < mdp.S; ++s)
        out.values[N][s] = r_last ? w_last * (*r_last)[s] : 0.0;

    std::vector<double> q(mdp.A);
    for (int t = N - 1; t >= 0; --t) {
        const std::vector<double>& b_next = out.values[t + 1];
        Matrix pi(mdp.S, mdp.A);
        std::vector<double>& b = out.values[t];
        double w = std::pow(mdp.gamma, t);
        for (int s = 0; s < mdp.S; ++s) {
            for (int a = 0; a < mdp.A; ++a) q[a] = b_next[mdp.next_state(s, a)];
            double lse = logsumexp(q);
            for (int a = 0; a < mdp.A; ++a) pi.at(s, a) = std::exp(q[a] - lse);
            double r_here = t > 0 ? rewards[t - 1][s] : (start_reward ? (*start_reward)[s] : 0.0);
            b[s] = w * r_here + lse;
        }
        out.policy.steps[t] = std::move(pi);
    }
    return out;
}

}  // namespace

SoftVIResult soft_value_iteration(const FixationMdp& mdp, const std::vector<double>& r,
                                  int num_decisions) {
    check_reward(r, mdp.S);
    if (num_decisions < 0) throw ValidationError("soft_value_iteration: negative horizon");
    std::vector<std::vector<double>> rewards(num_decisions, r);
    return backward_pass(mdp, &r, rewards);
}

SoftVIResult soft_value_iteration_steps(const FixationMdp& mdp,
                                        const std::vector<std::vector<double>>& rewards) {
    for (const auto& r : rewards) check_reward(r, mdp.S);
    return backward_pass(mdp, nullptr, rewards);
}

SoftVIResult soft_value_iteration_stationary(const FixationMdp& mdp, const std::vector<double>& r,
                                             double tol, int max_sweeps) {
    check_reward(r, mdp.S);
    std::vector<double> v(mdp.S, 0.0), v_new(mdp.S);
    std::vector<double> q(mdp.A);
    Matrix pi(mdp.S, mdp.A);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double delta = 0.0;
        for (int s = 0; s < mdp.S; ++s) {
            for (int a = 0; a < mdp.A; ++a) q[a] = r[s] + mdp.gamma * v[mdp.next_state(s, a)];
            double lse = logsumexp(q);
            for (int a = 0; a < mdp.A; ++a) pi.at(s, a) = std::exp(q[a] - lse);
            v_new[s] = lse;
            delta = std::max(delta, std::abs(lse - v[s]));
        }
        v.swap(v_new);
        if (delta < tol) {
            SoftVIResult out;
            out.policy.steps.push_back(std::move(pi));
            out.policy.stationary = true;
            out.values.push_back(v);
            out.values.push_back(v);
            return out;
        }
    }
    throw ComputeError("soft_value_iteration_stationary: no convergence within max sweeps");
}

std::vector<std::vector<double>> svf_per_step(const FixationMdp& mdp, const Policy& policy,
                                              const std::vector<double>& start_dist, int horizon) {
    if (static_cast<int>(start_dist.size()) != mdp.S)
        throw ValidationError("expected_svf: start_dist length != S");
    double sum = std::accumulate(start_dist.begin(), start_dist.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-6)
        throw ValidationError("expected_svf: start_dist does not sum to 1");
    if (horizon < 1) throw ValidationError("expected_svf: horizon must be >= 1");
    if (!policy.stationary && policy.num_steps() < horizon - 1)
        throw ValidationError("expected_svf: policy has too few steps for horizon");

    std::vector<std::vector<double>> d(horizon);
    d[0] = start_dist;
    for (int t = 1; t < horizon; ++t) {
        const Matrix& pi = policy.at_step(t - 1);
        d[t].assign(mdp.S, 0.0);
        for (int s = 0; s < mdp.S; ++s) {
            double mass = d[t - 1][s];
            if (mass == 0.0) continue;
            for (int a = 0; a < mdp.A; ++a) d[t][mdp.next_state(s, a)] += mass * pi.at(s, a);
        }
    }
    return d;
}

std::vector<double> expected_svf(const FixationMdp& mdp, const Policy& policy,
                                 const std::vector<double>& start_dist, int horizon) {
    auto d = svf_per_step(mdp, policy, start_dist, horizon);
    std::vector<double> mu(mdp.S, 0.0);
    for (const auto& dt : d)
        for (int s = 0; s < mdp.S; ++s) mu[s] += dt[s];
    return mu;
}

void Demonstrations::validate(int S) const {
    if (states.empty()) throw ValidationError("empty demonstration set");
    for (const auto& traj : states) {
        if (traj.empty()) throw ValidationError("empty demonstration trajectory");
        for (int s : traj)
            if (s < 0 || s >= S) throw ValidationError("demonstration state out of range");
    }
    if (!actions.empty() && actions.size() != states.size())
        throw ValidationError("demonstration actions/states size mismatch");
}

std::vector<double> empirical_svf(const Demonstrations& demos, int S, int horizon) {
    demos.validate(S);
    if (horizon < 1) throw ValidationError("empirical_svf: horizon must be >= 1");
    std::vector<double> mu(S, 0.0);
    for (const auto& traj : demos.states) {
        int n = std::min<int>(horizon, static_cast<int>(traj.size()));
        for (int t = 0; t < n; ++t) mu[traj[t]] += 1.0;
    }
    for (double& x : mu) x /= static_cast<double>(demos.states.size());
    return mu;
}

std::vector<double> maxent_gradient(const std::vector<double>& mu_d,
                                    const std::vector<double>& mu) {
    if (mu_d.size() != mu.size()) throw ValidationError("maxent_gradient: length mismatch");
    std::vector<double> g(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) g[i] = mu[i] - mu_d[i];
    return g;
}

namespace {

int action_taken(const FixationMdp& mdp, const Demonstrations& demos, std::size_t traj, int t) {
    if (!demos.actions.empty()) return demos.actions[traj][t];
    if (mdp.action_model != ActionModel::patch_target)
        throw ValidationError("log_likelihood: seven-macro demos need explicit actions");
    return demos.states[traj][t + 1];  // patch-target: the action is the destination
}

}  // namespace

double log_likelihood(const Demonstrations& demos, const std::vector<double>& r,
                      const FixationMdp& mdp, int horizon) {
    demos.validate(mdp.S);
    check_reward(r, mdp.S);
    if (horizon < 1) throw ValidationError("log_likelihood: horizon must be >= 1");

    // one solve per distinct effective decision count
    std::map<int, SoftVIResult> solves;
    double total = 0.0;
    for (std::size_t i = 0; i < demos.states.size(); ++i) {
        int decisions = std::min<int>(horizon, static_cast<int>(demos.states[i].size())) - 1;
        if (decisions <= 0) continue;
        auto it = solves.find(decisions);
        if (it == solves.end())
            it = solves.emplace(decisions, soft_value_iteration(mdp, r, decisions)).first;
        const auto& vi = it->second;
        for (int t = 0; t < decisions; ++t) {
            int s = demos.states[i][t];
            int a = action_taken(mdp, demos, i, t);
            double p = vi.policy.steps[t].at(s, a);
            if (!(p > 0.0)) throw ComputeError("log_likelihood: zero-probability demo action");
            total += std::log(p);
        }
    }
    return total / static_cast<double>(demos.states.size());
}

TrajectoryEnumeration enumerate_trajectories(const FixationMdp& mdp, const std::vector<double>& r,
                                             int start, int length) {
    check_reward(r, mdp.S);
    if (start < 0 || start >= mdp.S) throw ValidationError("enumerate_trajectories: bad start");
    if (length < 1) throw ValidationError("enumerate_trajectories: length must be >= 1");
    double count = std::pow(static_cast<double>(mdp.A), length);
    if (count > 1e6) throw ValidationError("enumerate_trajectories: state space too large");

    TrajectoryEnumeration out;
    out.gamma = mdp.gamma;
    out.reward = r;
    std::size_t total = static_cast<std::size_t>(count);
    out.states.reserve(total);
    out.probs.reserve(total);

    std::vector<double> scores;
    scores.reserve(total);
    std::vector<int> seq(length + 1);
    seq[0] = start;

    // iterate action sequences in odometer order
    std::vector<int> actions(length, 0);
    while (true) {
        double score = r[start];  // position-1 weight γ^0
        double w = 1.0;
        for (int t = 0; t < length; ++t) {
            seq[t + 1] = mdp.next_state(seq[t], actions[t]);
            w *= mdp.gamma;
            score += w * r[seq[t + 1]];
        }
        out.states.push_back(seq);
        scores.push_back(score);
        int pos = length - 1;
        while (pos >= 0 && ++actions[pos] == mdp.A) actions[pos--] = 0;
        if (pos < 0) break;
    }

    out.log_z = logsumexp(scores);
    out.probs.resize(scores.size());
    out.marginal_visits.assign(mdp.S, 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out.probs[i] = std::exp(scores[i] - out.log_z);
        for (int st : out.states[i]) out.marginal_visits[st] += out.probs[i];
    }
    return out;
}

double TrajectoryEnumeration::log_prob_of(const std::vector<int>& state_seq) const {
    double score = 0.0, w = 1.0;
    for (std::size_t t = 0; t < state_seq.size(); ++t) {
        score += w * reward[state_seq[t]];
        w *= gamma;
    }
    return score - log_z;
}

std::vector<int> sample_trajectory(const FixationMdp& mdp, const SoftVIResult& vi, int start,
                                   Rng& rng) {
    int decisions = vi.policy.num_steps();
    std::vector<int> seq;
    seq.reserve(decisions + 1);

    int s;
    if (start >= 0) {
        s = start;
    } else {
        // MaxEnt marginal over starts: p(s_1) ∝ exp(B_1(s_1))
        const auto& b1 = vi.values[0];
        double m = *std::max_element(b1.begin(), b1.end());
        std::vector<double> w(mdp.S);
        for (int i = 0; i < mdp.S; ++i) w[i] = std::exp(b1[i] - m);
        s = rng.categorical(w);
    }
    seq.push_back(s);
    std::vector<double> w(mdp.A);
    for (int t = 0; t < decisions; ++t) {
        const Matrix& pi = vi.policy.at_step(t);
        for (int a = 0; a < mdp.A; ++a) w[a] = pi.at(s, a);
        int a = rng.categorical(w);
        s = mdp.next_state(s, a);
        seq.push_back(s);
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Training

SequenceReplay build_replay(const SceneSequence& scene, const FixationSequence& demo,
                            const GridSpec& grid, const TrainConfig& cfg) {
    if (demo.points.empty()) throw ValidationError("build_replay: empty demonstration");

    SequenceReplay rep;
    std::vector<PatchIndex> patches;
    for (const auto& p : demo.points) {
        patches.push_back(point_to_patch(grid, p));
        rep.demo_states.push_back(patch_to_state(grid, patches.back()));
        rep.frame_of_position.push_back(p.frame_index);
    }

    // O_{0,1}: the first fixated frame, blurred at the σ cap (nothing has been
    // attended yet, so the whole frame is peripheral)
    int first_frame = demo.points.front().frame_index;
    Tensor L = gaussian_blur(scene.frames[first_frame].X, cfg.sigma_max);
    FoveatedState state = init_state(L);
    state = update_within_frame(state, scene.frames[first_frame].X,
                                make_fovea_mask(grid, patches[0], FoveaMode::patch));

    std::size_t L_len = patches.size();
    for (std::size_t j = 1; j < L_len; ++j) {
        int frame = demo.points[j].frame_index;
        // decision j is made against the frame the next fixation lands on
        auto pf = assemble_patch_features(scene.frames[frame], state, grid, scene.task,
                                          scene.speeds[frame], cfg.toggles, cfg.max_speed_mph,
                                          cfg.lambda_depth);
        rep.phi.push_back(std::move(pf.phi));

        auto mask = make_fovea_mask(grid, patches[j], FoveaMode::patch);
        if (frame == demo.points[j - 1].frame_index)
            state = update_within_frame(state, scene.frames[frame].X, mask);
        else
            state = advance_frame(state, scene.frames[frame].X, mask);
    }
    return rep;
}

namespace {

struct SequenceRef {
    const SceneSequence* scene;
    const FixationSequence* demo;
};

std::vector<SequenceRef> collect_sequences(const std::vector<SceneSequence>& scenes) {
    std::vector<SequenceRef> seqs;
    for (const auto& scene : scenes) {
        if (scene.ground_truth_fixations.empty())
            throw ValidationError("train: scene '" + scene.video_id + "' has no demonstrations");
        for (const auto& demo : scene.ground_truth_fixations)
            if (demo.points.size() >= 2) seqs.push_back({&scene, &demo});
    }
    if (seqs.empty()) throw ValidationError("train: no usable demonstration sequences");
    return seqs;
}

int derive_input_dim(const std::vector<SequenceRef>& seqs, const GridSpec& grid,
                     const TrainConfig& cfg) {
    auto rep = build_replay(*seqs[0].scene, *seqs[0].demo, grid, cfg);
    return static_cast<int>(rep.phi[0].cols);
}

// Per-sequence forward pass: teacher-forced rewards, one joint backward VI,
// NLL, and (optionally) the per-decision reward-gradient vectors.
struct SequencePass {
    double nll = 0.0;
    std::vector<std::vector<double>> grad_r;  // per decision, empty unless requested
    std::vector<ForwardCache> caches;
    SoftVIResult vi;
    std::vector<std::vector<double>> rewards;
    SequenceReplay rep;
};

SequencePass run_sequence(RewardNetParams& params, const SceneSequence& scene,
                          const FixationSequence& demo, const GridSpec& grid,
                          const FixationMdp& mdp, const TrainConfig& cfg, bool train_mode,
                          bool want_gradients) {
    SequencePass out;
    out.rep = build_replay(scene, demo, grid, cfg);
    std::size_t decisions = out.rep.phi.size();
    out.caches.resize(want_gradients ? decisions : 0);

    for (std::size_t j = 0; j < decisions; ++j) {
        ForwardCache* cache = want_gradients ? &out.caches[j] : nullptr;
        out.rewards.push_back(forward(params, out.rep.phi[j], train_mode, cache));
    }
    out.vi = soft_value_iteration_steps(mdp, out.rewards);

    for (std::size_t j = 0; j < decisions; ++j) {
        int s = out.rep.demo_states[j];
        int a = out.rep.demo_states[j + 1];  // patch-target
        double p = out.vi.policy.steps[j].at(s, a);
        out.nll -= std::log(std::max(p, 1e-300));
    }

    if (want_gradients) {
        std::vector<double> start(mdp.S, 0.0);
        start[out.rep.demo_states[0]] = 1.0;
        auto d = svf_per_step(mdp, out.vi.policy, start, static_cast<int>(decisions) + 1);
        out.grad_r.resize(decisions);
        for (std::size_t j = 0; j < decisions; ++j) {
            out.grad_r[j] = d[j + 1];
            out.grad_r[j][out.rep.demo_states[j + 1]] -= 1.0;
        }
    }
    return out;
}

}  // namespace

TrainResult train(const std::vector<SceneSequence>& scenes, const GridSpec& grid,
                  const TrainConfig& cfg) {
    if (scenes.empty()) throw ValidationError("train: empty scene set");
    if (cfg.epochs < 0 || cfg.batch_sequences < 1) throw ValidationError("train: bad counts");
    cfg.toggles.validate();

    auto seqs = collect_sequences(scenes);
    NetConfig net = cfg.net;
    int d_phi = derive_input_dim(seqs, grid, cfg);
    if (net.input_dim == 0)
        net.input_dim = d_phi;
    else if (net.input_dim != d_phi)
        throw ValidationError("train: configured input_dim " + std::to_string(net.input_dim) +
                              " != assembled feature dim " + std::to_string(d_phi));

    TrainResult result;
    result.params = init_params(net, cfg.seed);
    result.adam = AdamState::zeros_like(result.params);
    FixationMdp mdp = build_mdp(grid, ActionModel::patch_target, cfg.gamma);

    std::vector<double> rare_mask;
    if (cfg.mask_rare_states) {
        std::vector<double> visits(mdp.S, 0.0);
        for (const auto& ref : seqs) {
            auto rep = build_replay(*ref.scene, *ref.demo, grid, cfg);
            for (int s : rep.demo_states) visits[s] += 1.0;
        }
        rare_mask.assign(mdp.S, 1.0);
        for (int s = 0; s < mdp.S; ++s)
            if (visits[s] < cfg.min_visits) rare_mask[s] = 0.0;
    }

    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto tic = std::chrono::steady_clock::now();
        double lr = lr_at_epoch(cfg.lr, epoch);

        // seeded Fisher-Yates shuffle per epoch
        Rng shuffle_rng(Rng::mix(cfg.seed, 0xe90c + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(static_cast<int>(i))]);

        double epoch_nll = 0.0;
        double epoch_grad_norm = 0.0;
        int batches = 0;

        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_sequences) {
            std::size_t b1 = std::min(order.size(), b0 + cfg.batch_sequences);
            NetGradients batch_grads = NetGradients::zeros_like(result.params);
            double inv = 1.0 / static_cast<double>(b1 - b0);

            for (std::size_t i = b0; i < b1; ++i) {
                const auto& ref = seqs[order[i]];
                auto pass = run_sequence(result.params, *ref.scene, *ref.demo, grid, mdp, cfg,
                                         /*train_mode=*/true, /*want_gradients=*/true);
                epoch_nll += pass.nll;
                for (std::size_t j = 0; j < pass.grad_r.size(); ++j) {
                    if (!rare_mask.empty())
                        for (int s = 0; s < mdp.S; ++s)
                            if (rare_mask[s] == 0.0) pass.grad_r[j][s] = 0.0;
                    auto g = backward(result.params, pass.caches[j], pass.grad_r[j]);
                    batch_grads.accumulate(g, inv);
                }
            }

            epoch_grad_norm += batch_grads.l2_norm();
            adam_step(result.params, batch_grads, result.adam, lr);
            ++batches;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.nll = epoch_nll / static_cast<double>(order.size());
        if (!std::isfinite(stats.nll)) throw ComputeError("train: non-finite loss at epoch " +
                                                          std::to_string(epoch));
        stats.grad_norm = epoch_grad_norm / std::max(1, batches);
        stats.lr = lr;
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
        result.history.push_back(stats);
    }
    return result;
}

double evaluate_nll(RewardNetParams& params, const std::vector<SceneSequence>& scenes,
                    const GridSpec& grid, const TrainConfig& cfg) {
    auto seqs = collect_sequences(scenes);
    FixationMdp mdp = build_mdp(grid, ActionModel::patch_target, cfg.gamma);
    double total = 0.0;
    for (const auto& ref : seqs) {
        auto pass = run_sequence(params, *ref.scene, *ref.demo, grid, mdp, cfg,
                                 /*train_mode=*/false, /*want_gradients=*/false);
        total += pass.nll;
    }
    return total / static_cast<double>(seqs.size());
}

}  // namespace medirl
