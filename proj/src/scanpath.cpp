#include "medirl/scanpath.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "medirl/fovea.hpp"

namespace medirl {

void SaliencyMap::validate() const {
    if (h < 1 || w < 1 || p.size() != static_cast<std::size_t>(h) * w)
        throw ValidationError("SaliencyMap: bad dimensions");
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0) || !std::isfinite(x))
            throw ValidationError("SaliencyMap: negative or non-finite mass");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("SaliencyMap: not normalized");
}

SaliencyMap SaliencyMap::from_unnormalized(std::vector<double> values, int h, int w) {
    double sum = std::accumulate(values.begin(), values.end(), 0.0);
    if (!(sum > 0.0) || !std::isfinite(sum))
        throw ValidationError("SaliencyMap: nonpositive total mass");
    for (double& x : values) x /= sum;
    SaliencyMap map;
    map.h = h;
    map.w = w;
    map.p = std::move(values);
    map.validate();
    return map;
}

void IoRConfig::validate() const {
    if (!(decay >= 0.0 && decay <= 1.0)) throw ValidationError("IoRConfig: decay must be in [0,1]");
}

namespace {

// Paint per-patch mass uniformly over each patch's pixels (mass / pixel count,
// so unequal remainder patches stay mass-correct).
std::vector<double> paint_patches(const std::vector<double>& patch_mass, const GridSpec& grid) {
    std::vector<double> px(static_cast<std::size_t>(grid.frame_h) * grid.frame_w, 0.0);
    for (int r = 0; r < grid.n; ++r) {
        int y0 = grid.row_y0(r), y1 = y0 + grid.row_heights[r];
        for (int c = 0; c < grid.m; ++c) {
            int x0 = grid.col_x0(c), x1 = x0 + grid.col_widths[c];
            double value = patch_mass[r * grid.m + c] / (static_cast<double>(y1 - y0) * (x1 - x0));
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) px[static_cast<std::size_t>(y) * grid.frame_w + x] = value;
        }
    }
    return px;
}

struct RolloutCursor {
    FoveatedState state;
    bool has_fixation = false;
    int current_state = -1;
    int current_frame = 0;
    std::vector<int> frame_visits;  // states fixated in the current frame, oldest first

    void apply_fixation(const SceneSequence& scene, const GridSpec& grid, int frame, int s) {
        auto mask = make_fovea_mask(grid, state_to_patch(grid, s), FoveaMode::patch);
        if (!has_fixation || frame == current_frame)
            state = update_within_frame(state, scene.frames[frame].X, mask);
        else
            state = advance_frame(state, scene.frames[frame].X, mask);
        if (frame != current_frame) frame_visits.clear();
        frame_visits.push_back(s);
        has_fixation = true;
        current_state = s;
        current_frame = frame;
    }
};

std::vector<double> next_step_row(const FixationMdp& mdp, const SoftVIResult& vi,
                                  const RolloutCursor& cursor) {
    std::vector<double> row(mdp.S, 0.0);
    if (cursor.has_fixation) {
        const Matrix& pi = vi.policy.steps[0];
        for (int a = 0; a < mdp.A; ++a) row[mdp.next_state(cursor.current_state, a)] += pi.at(cursor.current_state, a);
    } else {
        const auto& b1 = vi.values[0];
        double m = *std::max_element(b1.begin(), b1.end());
        double sum = 0.0;
        for (int s = 0; s < mdp.S; ++s) {
            row[s] = std::exp(b1[s] - m);
            sum += row[s];
        }
        for (double& x : row) x /= sum;
    }
    return row;
}

void apply_inhibition(std::vector<double>& row, const RolloutCursor& cursor,
                      const IoRConfig& ior) {
    if (ior.decay == 1.0 || cursor.frame_visits.empty()) return;
    std::size_t first = 0;
    if (ior.memory >= 0 && cursor.frame_visits.size() > static_cast<std::size_t>(ior.memory))
        first = cursor.frame_visits.size() - ior.memory;
    for (std::size_t i = first; i < cursor.frame_visits.size(); ++i)
        row[cursor.frame_visits[i]] *= ior.decay;
    double sum = std::accumulate(row.begin(), row.end(), 0.0);
    if (sum > 0.0)
        for (double& x : row) x /= sum;
    else
        row.assign(row.size(), 1.0 / row.size());
}

}  // namespace

Scanpath rollout(RewardNetParams& params, const SceneSequence& scene, const GridSpec& grid,
                 const FixationMdp& mdp, const std::vector<int>& K_per_frame,
                 const IoRConfig& ior, std::uint64_t seed, RolloutMode mode,
                 const TrainConfig& cfg) {
    ior.validate();
    scene.validate();
    if (K_per_frame.size() != scene.frames.size())
        throw ValidationError("rollout: K_per_frame length != frame count");
    int total = std::accumulate(K_per_frame.begin(), K_per_frame.end(), 0);
    if (total < 1) throw ValidationError("rollout: zero fixations requested");
    if (scene.frames[0].height() != grid.frame_h || scene.frames[0].width() != grid.frame_w)
        throw ValidationError("rollout: scene dims do not match grid");

    Rng rng(Rng::mix(seed, 0xf1ca7e));
    Scanpath path;
    path.seed = seed;
    path.mode = mode;

    RolloutCursor cursor;
    cursor.state = init_state(gaussian_blur(scene.frames[0].X, cfg.sigma_max));

    int done = 0;
    for (std::size_t frame = 0; frame < scene.frames.size(); ++frame) {
        for (int step = 0; step < K_per_frame[frame]; ++step) {
            auto pf = assemble_patch_features(scene.frames[frame], cursor.state, grid, scene.task,
                                              scene.speeds[frame], cfg.toggles, cfg.max_speed_mph,
                                              cfg.lambda_depth);
            auto r = forward(params, pf.phi, /*train_mode=*/false);
            // with a current patch this step is one decision and remaining-1
            // follow; without one the step chooses the start state itself
            int remaining = total - done;
            int num_dec = cursor.has_fixation ? remaining : remaining - 1;
            auto vi = soft_value_iteration(mdp, r, num_dec);

            std::vector<double> row = next_step_row(mdp, vi, cursor);
            apply_inhibition(row, cursor, ior);

            int chosen;
            if (mode == RolloutMode::argmax) {
                chosen = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
            } else {
                chosen = rng.categorical(row);
            }

            path.entries.push_back(ScanpathEntry{static_cast<int>(frame), step,
                                                 state_to_patch(grid, chosen), row[chosen]});
            cursor.apply_fixation(scene, grid, static_cast<int>(frame), chosen);
            ++done;
        }
    }
    return path;
}

std::vector<SaliencyMap> policy_saliency(RewardNetParams& params, const SceneSequence& scene,
                                         const GridSpec& grid, const FixationMdp& mdp,
                                         int horizon, const TrainConfig& cfg,
                                         double sigma_smooth) {
    scene.validate();
    if (horizon < 1) throw ValidationError("policy_saliency: horizon must be >= 1");
    if (scene.frames[0].height() != grid.frame_h || scene.frames[0].width() != grid.frame_w)
        throw ValidationError("policy_saliency: scene dims do not match grid");

    const FixationSequence* teacher =
        scene.ground_truth_fixations.empty() ? nullptr : &scene.ground_truth_fixations.front();

    RolloutCursor cursor;
    cursor.state = init_state(gaussian_blur(scene.frames[0].X, cfg.sigma_max));

    std::vector<SaliencyMap> maps;
    for (std::size_t frame = 0; frame < scene.frames.size(); ++frame) {
        auto pf = assemble_patch_features(scene.frames[frame], cursor.state, grid, scene.task,
                                          scene.speeds[frame], cfg.toggles, cfg.max_speed_mph,
                                          cfg.lambda_depth);
        auto r = forward(params, pf.phi, /*train_mode=*/false);
        auto vi = soft_value_iteration(mdp, r, horizon);

        std::vector<double> start(mdp.S, 0.0);
        if (cursor.has_fixation)
            start[cursor.current_state] = 1.0;
        else
            start.assign(mdp.S, 1.0 / mdp.S);
        auto d = svf_per_step(mdp, vi.policy, start, horizon + 1);

        // expected visits of the next `horizon` fixations; the start state's
        // own visit is not part of the prediction
        std::vector<double> mu(mdp.S, 0.0);
        for (int t = 1; t <= horizon; ++t)
            for (int s = 0; s < mdp.S; ++s) mu[s] += d[t][s];

        auto px = paint_patches(mu, grid);
        px = gaussian_blur_2d(px, grid.frame_h, grid.frame_w, sigma_smooth);
        maps.push_back(SaliencyMap::from_unnormalized(std::move(px), grid.frame_h, grid.frame_w));

        // advance the context into this frame
        if (teacher) {
            for (const auto& p : teacher->points)
                if (p.frame_index == static_cast<int>(frame))
                    cursor.apply_fixation(scene, grid, static_cast<int>(frame),
                                          patch_to_state(grid, point_to_patch(grid, p)));
        } else {
            const Matrix& pi0 = vi.policy.steps[0];
            std::vector<double> row(mdp.S, 0.0);
            if (cursor.has_fixation)
                for (int a = 0; a < mdp.A; ++a)
                    row[mdp.next_state(cursor.current_state, a)] += pi0.at(cursor.current_state, a);
            else
                row = mu;
            int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
            cursor.apply_fixation(scene, grid, static_cast<int>(frame), best);
        }
    }
    return maps;
}

SaliencyMap fixations_to_map(const std::vector<FixationPoint>& fixations, int frame_h,
                             int frame_w, double sigma_smooth) {
    if (fixations.empty()) throw ValidationError("fixations_to_map: empty fixation list");
    bool weight_by_duration = true;
    for (const auto& p : fixations)
        if (!(p.duration_ms > 0.0)) weight_by_duration = false;

    std::vector<double> px(static_cast<std::size_t>(frame_h) * frame_w, 0.0);
    for (const auto& p : fixations) {
        if (p.x < 0 || p.x >= frame_w || p.y < 0 || p.y >= frame_h)
            throw ValidationError("fixations_to_map: fixation outside frame");
        px[static_cast<std::size_t>(p.y) * frame_w + p.x] += weight_by_duration ? p.duration_ms : 1.0;
    }
    px = gaussian_blur_2d(px, frame_h, frame_w, sigma_smooth);
    return SaliencyMap::from_unnormalized(std::move(px), frame_h, frame_w);
}

}  // namespace medirl
