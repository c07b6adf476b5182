#include "medirl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace medirl {

namespace {
constexpr double kEps = 2.220446049250313e-16;
}

void MetricReport::finalize() {
    frames_evaluated = static_cast<int>(frames.size());
    mean_kld = mean_cc = mean_sauc = mean_f_beta = 0.0;
    if (frames.empty()) return;
    for (const auto& f : frames) {
        mean_kld += f.kld;
        mean_cc += f.cc;
        mean_sauc += f.sauc;
        mean_f_beta += f.f_beta;
    }
    mean_kld /= frames_evaluated;
    mean_cc /= frames_evaluated;
    mean_sauc /= frames_evaluated;
    mean_f_beta /= frames_evaluated;
}

static void check_pair(const SaliencyMap& a, const SaliencyMap& b, const char* who) {
    a.validate();
    b.validate();
    if (a.h != b.h || a.w != b.w) throw ValidationError(std::string(who) + ": shape mismatch");
}

double kld(const SaliencyMap& pred, const SaliencyMap& gt) {
    check_pair(pred, gt, "kld");
    double acc = 0.0;
    for (std::size_t i = 0; i < gt.p.size(); ++i) {
        double g = gt.p[i];
        if (g > 0.0) acc += g * std::log(g / (pred.p[i] + kEps) + kEps);
    }
    return acc;
}

double cc(const SaliencyMap& pred, const SaliencyMap& gt) {
    check_pair(pred, gt, "cc");
    std::size_t n = pred.p.size();
    double ma = std::accumulate(pred.p.begin(), pred.p.end(), 0.0) / n;
    double mb = std::accumulate(gt.p.begin(), gt.p.end(), 0.0) / n;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double da = pred.p[i] - ma, db = gt.p[i] - mb;
        va += da * da;
        vb += db * db;
        cov += da * db;
    }
    if (va <= 0.0 || vb <= 0.0) throw ValidationError("cc: constant map has no correlation");
    return cov / std::sqrt(va * vb);
}

double sauc(const SaliencyMap& pred, const std::vector<std::pair<int, int>>& pos_xy,
            const std::vector<std::pair<int, int>>& neg_xy, std::uint64_t seed) {
    pred.validate();
    if (pos_xy.empty() || neg_xy.empty()) throw ValidationError("sauc: empty fixation list");

    auto value_at = [&](const std::pair<int, int>& xy) {
        auto [x, y] = xy;
        if (x < 0 || x >= pred.w || y < 0 || y >= pred.h)
            throw ValidationError("sauc: fixation outside map");
        return pred.at(y, x);
    };

    std::vector<double> pos;
    pos.reserve(pos_xy.size());
    for (const auto& xy : pos_xy) pos.push_back(value_at(xy));

    std::vector<std::pair<int, int>> negs = neg_xy;
    std::size_t cap = pos.size() * 10;
    if (negs.size() > cap) {
        Rng rng(Rng::mix(seed, 0x5a0c));
        for (std::size_t i = 0; i < cap; ++i)
            std::swap(negs[i], negs[i + rng.uniform_int(static_cast<int>(negs.size() - i))]);
        negs.resize(cap);
    }
    std::vector<double> neg;
    neg.reserve(negs.size());
    for (const auto& xy : negs) neg.push_back(value_at(xy));

    double score = 0.0;
    for (double p : pos)
        for (double q : neg) score += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
    return score / (static_cast<double>(pos.size()) * neg.size());
}

double f_beta(const SaliencyMap& pred, const std::vector<std::uint8_t>& gt_binary,
              double threshold, double beta_sq) {
    pred.validate();
    if (gt_binary.size() != pred.p.size()) throw ValidationError("f_beta: shape mismatch");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ValidationError("f_beta: threshold must be in (0,1)");
    bool any_gt = false;
    for (auto g : gt_binary)
        if (g) any_gt = true;
    if (!any_gt) throw ValidationError("f_beta: empty ground truth");

    double cut = threshold * *std::max_element(pred.p.begin(), pred.p.end());
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.p.size(); ++i) {
        bool p = pred.p[i] >= cut;
        bool g = gt_binary[i] != 0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return (1.0 + beta_sq) * precision * recall / (beta_sq * precision + recall);
}

std::vector<std::pair<int, int>> important_frames(const std::vector<SaliencyMap>& gt_maps,
                                                  double kld_min, int window) {
    if (static_cast<int>(gt_maps.size()) < window)
        throw ValidationError("important_frames: need at least " + std::to_string(window) +
                              " frames");
    for (const auto& m : gt_maps) m.validate();

    // video-average map (mean of normalized maps is normalized)
    SaliencyMap avg;
    avg.h = gt_maps[0].h;
    avg.w = gt_maps[0].w;
    avg.p.assign(gt_maps[0].p.size(), 0.0);
    for (const auto& m : gt_maps) {
        if (m.h != avg.h || m.w != avg.w)
            throw ValidationError("important_frames: maps disagree on shape");
        for (std::size_t i = 0; i < m.p.size(); ++i) avg.p[i] += m.p[i];
    }
    for (double& x : avg.p) x /= gt_maps.size();

    // deviation of each frame from the average: KL(frame ‖ avg)
    std::vector<bool> marked(gt_maps.size());
    for (std::size_t t = 0; t < gt_maps.size(); ++t)
        marked[t] = kld(/*pred=*/avg, /*gt=*/gt_maps[t]) >= kld_min;

    std::vector<std::pair<int, int>> windows;
    std::size_t t = 0;
    while (t < marked.size()) {
        if (!marked[t]) {
            ++t;
            continue;
        }
        std::size_t run_end = t;
        while (run_end < marked.size() && marked[run_end]) ++run_end;
        for (std::size_t w0 = t; w0 + window <= run_end; w0 += window)
            windows.emplace_back(static_cast<int>(w0), static_cast<int>(w0 + window));
        t = run_end;
    }
    return windows;
}

bool filter_irrelevant(const FixationSequence& seq,
                       const std::vector<std::vector<std::uint8_t>>& irrelevant_masks, int frame_h,
                       int frame_w, double max_fraction) {
    if (seq.points.empty()) throw ValidationError("filter_irrelevant: empty sequence");
    for (const auto& m : irrelevant_masks)
        if (m.size() != static_cast<std::size_t>(frame_h) * frame_w)
            throw ValidationError("filter_irrelevant: mask dims mismatch");

    int irrelevant = 0;
    for (const auto& p : seq.points) {
        if (p.frame_index < 0 || p.frame_index >= static_cast<int>(irrelevant_masks.size()))
            throw ValidationError("filter_irrelevant: fixation frame outside mask list");
        if (irrelevant_masks[p.frame_index][static_cast<std::size_t>(p.y) * frame_w + p.x])
            ++irrelevant;
    }
    double fraction = static_cast<double>(irrelevant) / seq.points.size();
    return fraction <= max_fraction;
}

namespace {

std::optional<double> RawGazeRecord::* const kFeatures[4] = {
    &RawGazeRecord::pupil, &RawGazeRecord::gaze_x, &RawGazeRecord::gaze_y,
    &RawGazeRecord::duration};

}  // namespace

std::pair<std::vector<RawGazeRecord>, GazeCleanReport> preprocess_gaze(
    const std::vector<RawGazeRecord>& records) {
    if (records.empty()) throw ValidationError("preprocess_gaze: empty record list");
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].timestamp_ms < records[i - 1].timestamp_ms)
            throw ValidationError("preprocess_gaze: timestamps decreasing");

    std::vector<RawGazeRecord> clean = records;
    GazeCleanReport report;
    std::size_t n = records.size();
    long total_cells = 0, total_abnormal = 0;

    for (int f = 0; f < 4; ++f) {
        auto member = kFeatures[f];
        std::size_t missing = 0;
        for (const auto& r : records)
            if (!(r.*member)) ++missing;
        if (missing == n) throw ValidationError("preprocess_gaze: feature entirely missing");
        report.missing_fraction[f] = static_cast<double>(missing) / n;

        if (missing > 0 && report.missing_fraction[f] < 0.20) {
            // linear interpolation between nearest valid neighbors; nearest-value
            // extension at the ends
            report.interpolated[f] = true;
            std::vector<std::size_t> valid;
            for (std::size_t i = 0; i < n; ++i)
                if (records[i].*member) valid.push_back(i);
            for (std::size_t i = 0; i < n; ++i) {
                if (clean[i].*member) continue;
                auto hi = std::lower_bound(valid.begin(), valid.end(), i);
                if (hi == valid.begin()) {
                    clean[i].*member = *(records[*hi].*member);
                } else if (hi == valid.end()) {
                    clean[i].*member = *(records[*(hi - 1)].*member);
                } else {
                    std::size_t i0 = *(hi - 1), i1 = *hi;
                    double a = static_cast<double>(i - i0) / (i1 - i0);
                    clean[i].*member =
                        *(records[i0].*member) + a * (*(records[i1].*member) - *(records[i0].*member));
                }
            }
        }

        // μ, σ excluding zeros (population variance)
        double sum = 0.0;
        long count = 0;
        for (const auto& r : clean)
            if (r.*member && *(r.*member) != 0.0) {
                sum += *(r.*member);
                ++count;
            }
        if (count == 0) continue;  // all-zero feature: nothing to flag
        double mu = sum / count;
        double sq = 0.0;
        for (const auto& r : clean)
            if (r.*member && *(r.*member) != 0.0) {
                double d = *(r.*member) - mu;
                sq += d * d;
            }
        double sigma = std::sqrt(sq / count);
        double lo = mu - 3.0 * sigma, hi = mu + 3.0 * sigma;
        for (const auto& r : clean)
            if (r.*member) {
                ++total_cells;
                if (*(r.*member) < lo || *(r.*member) > hi) {
                    ++report.abnormal_count[f];
                    ++total_abnormal;
                }
            }
    }

    report.abnormal_fraction =
        total_cells > 0 ? static_cast<double>(total_abnormal) / total_cells : 0.0;
    report.kept = report.abnormal_fraction <= 0.40;
    return {std::move(clean), report};
}

}  // namespace medirl
