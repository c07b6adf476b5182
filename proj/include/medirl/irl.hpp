#pragma once

#include <cstdint>
#include <vector>

#include "medirl/common.hpp"
#include "medirl/features.hpp"
#include "medirl/grid.hpp"
#include "medirl/reward_net.hpp"

namespace medirl {

enum class ActionModel { patch_target, seven_macro };

/// Fixation MDP over the patch grid. patch-target: one action per destination
/// patch (A = S). seven-macro: single-step cardinal moves plus one diagonal
/// step toward/away from the center patch, saturating at borders.
struct FixationMdp {
    GridSpec grid;
    ActionModel action_model = ActionModel::patch_target;
    int S = 0;
    int A = 0;
    std::vector<int> next;  // [S×A], deterministic successor
    double gamma = 0.98;
    int horizon = 6;  // default decision count for callers that do not pass one

    int next_state(int s, int a) const { return next[static_cast<std::size_t>(s) * A + a]; }
};

FixationMdp build_mdp(const GridSpec& grid, ActionModel action_model, double gamma = 0.98,
                      int horizon = 6);

/// Stochastic policy, one row-stochastic [S×A] matrix per decision step (a
/// single matrix reused everywhere when stationary).
struct Policy {
    std::vector<Matrix> steps;
    bool stationary = false;

    const Matrix& at_step(int t) const { return stationary ? steps[0] : steps[t]; }
    int num_steps() const { return static_cast<int>(steps.size()); }
};

/// Soft value iteration output. The trajectory distribution being factorized
/// is p(ξ) ∝ exp(Σ_t γ^{t-1}·r_t(s_t)) over fixed-length trajectories, so the
/// backward scores carry each position's absolute discount weight:
///   B_{N+1}(s) = γ^N·r(s),  B_t(s) = γ^{t-1}·r(s) + logsumexp_a B_{t+1}(next(s,a)),
///   π_t(a|s)   = softmax_a B_{t+1}(next(s,a)).
/// At γ=1 this is the plain soft backup V_t = r + logsumexp_a V_{t+1}.
/// values[t] holds B_{t+1} (positions are 1-based), so values[0] = B_1.
struct SoftVIResult {
    Policy policy;
    std::vector<std::vector<double>> values;

    /// Action score whose per-state softmax is π_t (t is 0-based decision index).
    double soft_q(const FixationMdp& mdp, int t, int s, int a) const {
        return values[t + 1][mdp.next_state(s, a)];
    }
};

/// Finite horizon, single reward vector applied at every position.
/// num_decisions = number of actions taken (states visited = num_decisions+1).
SoftVIResult soft_value_iteration(const FixationMdp& mdp, const std::vector<double>& r,
                                  int num_decisions);

/// Finite horizon with one reward vector per decision; rewards[j] is applied
/// at position j+2 (the state the j-th decision lands on). The start position
/// carries no reward (it cancels from every trajectory's score).
SoftVIResult soft_value_iteration_steps(const FixationMdp& mdp,
                                        const std::vector<std::vector<double>>& rewards);

/// Infinite-horizon stationary soft backup V = r + γ·logsumexp-free form:
/// Q(s,a) = r(s) + γ·V(next(s,a)), V = logsumexp_a Q, iterated to sup-norm
/// change < tol. Throws ComputeError if max_sweeps is exhausted.
SoftVIResult soft_value_iteration_stationary(const FixationMdp& mdp, const std::vector<double>& r,
                                             double tol = 1e-6, int max_sweeps = 1000);

/// Expected state-visitation frequencies: D_1 = start_dist, forward-propagated
/// through the policy; μ = Σ_{t=1..horizon} D_t (horizon counts states, so the
/// policy needs ≥ horizon−1 steps). Σμ equals horizon.
std::vector<double> expected_svf(const FixationMdp& mdp, const Policy& policy,
                                 const std::vector<double>& start_dist, int horizon);

/// Per-step visitation D_1..D_horizon (expected_svf is their sum).
std::vector<std::vector<double>> svf_per_step(const FixationMdp& mdp, const Policy& policy,
                                              const std::vector<double>& start_dist, int horizon);

struct Demonstrations {
    std::vector<std::vector<int>> states;   // one visited-state sequence per trajectory
    std::vector<std::vector<int>> actions;  // optional; required for seven-macro likelihoods

    void validate(int S) const;
};

/// Average per-state visit counts over the first `horizon` states of each
/// trajectory.
std::vector<double> empirical_svf(const Demonstrations& demos, int S, int horizon);

/// Gradient of the negative average log-likelihood w.r.t. per-state reward.
std::vector<double> maxent_gradient(const std::vector<double>& mu_d,
                                    const std::vector<double>& mu);

/// Average over demos of Σ_t log π_t(a_t|s_t) under the soft-VI policy for a
/// single reward vector. horizon counts states; demos shorter than it are
/// scored over their own length. Distinct effective lengths get their own
/// solves (the policy depends on the distance to the horizon).
double log_likelihood(const Demonstrations& demos, const std::vector<double>& r,
                      const FixationMdp& mdp, int horizon);

/// Exact enumeration oracle for the MaxEnt trajectory distribution:
/// p(ξ) ∝ exp(Σ_{t≥1} γ^{t-1}·r(s_t)) over all action sequences of the given
/// decision count from a fixed start. Guarded at A^length ≤ 1e6.
struct TrajectoryEnumeration {
    std::vector<std::vector<int>> states;  // each length+1 states, [0] == start
    std::vector<double> probs;
    std::vector<double> marginal_visits;  // [S]: Σ_ξ p(ξ)·(visits of s in ξ)
    double log_z = 0.0;
    double gamma = 1.0;
    std::vector<double> reward;

    /// Exact log p of one state sequence (must start at the enumeration start).
    double log_prob_of(const std::vector<int>& state_seq) const;
};

TrajectoryEnumeration enumerate_trajectories(const FixationMdp& mdp, const std::vector<double>& r,
                                             int start, int length);

/// Sample one state sequence from vi's policy. start < 0 samples the start
/// from the MaxEnt marginal p(s_1) ∝ exp(B_1(s_1)).
std::vector<int> sample_trajectory(const FixationMdp& mdp, const SoftVIResult& vi, int start,
                                   Rng& rng);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int epochs = 36;
    int batch_sequences = 20;
    int frames_per_sequence = 6;
    double vi_tolerance = 1e-6;
    int max_vi_sweeps = 1000;
    std::uint64_t seed = 7;
    FeatureToggles toggles;
    LrSchedule lr;
    NetConfig net;  // input_dim 0 = derived from the assembled features
    double gamma = 0.98;
    double sigma_max = 64.0;
    double max_speed_mph = 100.0;
    double lambda_depth = 1.2;
    bool mask_rare_states = false;  // drop states with < min_visits demo visits from μ_D support
    int min_visits = 5;
};

struct EpochStats {
    int epoch = 0;
    double nll = 0.0;
    double grad_norm = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    RewardNetParams params;
    AdamState adam;
    std::vector<EpochStats> history;
};

/// Demonstration replay shared by training and evaluation: the foveated
/// context O is rebuilt from the demo fixations (teacher forcing) and one
/// feature matrix is assembled per decision, paired with the frame the next
/// fixation lands on.
struct SequenceReplay {
    std::vector<int> demo_states;          // L patch states
    std::vector<Matrix> phi;               // L-1 feature matrices
    std::vector<int> frame_of_position;    // L frame indices
};

SequenceReplay build_replay(const SceneSequence& scene, const FixationSequence& demo,
                            const GridSpec& grid, const TrainConfig& cfg);

/// MaxEnt deep IRL loop: per sequence, teacher-forced per-decision rewards,
/// one backward soft-VI pass, per-decision gradient D_{j+1} − onehot(s_{j+1})
/// pushed through the reward net, Adam per batch with the epoch's scheduled
/// learning rate.
TrainResult train(const std::vector<SceneSequence>& scenes, const GridSpec& grid,
                  const TrainConfig& cfg);

/// Teacher-forced mean NLL per sequence under eval-mode forwards.
double evaluate_nll(RewardNetParams& params, const std::vector<SceneSequence>& scenes,
                    const GridSpec& grid, const TrainConfig& cfg);

}  // namespace medirl
