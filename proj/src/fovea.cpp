#include "medirl/fovea.hpp"

#include <algorithm>
#include <cmath>

namespace medirl {

namespace {

// Symmetric reflection (edge included): ...2,1,0 | 0,1,2...n-1 | n-1,n-2...
// Folds arbitrary overshoot, so kernels wider than the image are fine.
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma) {
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

template <typename T>
void blur_plane(const T* in, T* out, int h, int w, std::size_t stride,
                const std::vector<double>& kernel) {
    int radius = (static_cast<int>(kernel.size()) - 1) / 2;
    std::vector<double> tmp(static_cast<std::size_t>(h) * w);

    // horizontal pass
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j)
                acc += kernel[j + radius] *
                       static_cast<double>(in[(static_cast<std::size_t>(y) * w +
                                               reflect_index(x + j, w)) * stride]);
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    // vertical pass
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j)
                acc += kernel[j + radius] * tmp[static_cast<std::size_t>(reflect_index(y + j, h)) * w + x];
            out[(static_cast<std::size_t>(y) * w + x) * stride] = static_cast<T>(acc);
        }
    }
}

}  // namespace

Tensor gaussian_blur(const Tensor& H, double sigma) {
    if (!H.all_finite()) throw ValidationError("gaussian_blur: non-finite input");
    if (sigma < 0.0) throw ValidationError("gaussian_blur: negative sigma");
    if (sigma == 0.0) return H;

    Tensor out = H;
    auto kernel = gaussian_kernel(sigma);
    int c = H.channels();
    for (int ch = 0; ch < c; ++ch)
        blur_plane(H.v.data() + ch, out.v.data() + ch, H.height(), H.width(),
                   static_cast<std::size_t>(c), kernel);
    return out;
}

std::vector<double> gaussian_blur_2d(const std::vector<double>& map, int h, int w, double sigma) {
    if (sigma == 0.0) return map;
    std::vector<double> out(map.size());
    blur_plane(map.data(), out.data(), h, w, 1, gaussian_kernel(sigma));
    return out;
}

double peripheral_sigma(const FixationPoint& p, int frame_h, int frame_w, double sigma_max,
                        DistanceMode mode) {
    double d;
    if (mode == DistanceMode::frame_center) {
        double cx = frame_w / 2;
        double cy = frame_h / 2;
        d = std::hypot(p.x - cx, p.y - cy);
    } else {
        d = std::min(std::min(p.x, frame_w - 1 - p.x), std::min(p.y, frame_h - 1 - p.y));
    }
    return std::min(2.0 * d, sigma_max);
}

FoveaMask make_fovea_mask(const GridSpec& grid, const PatchIndex& s, FoveaMode mode,
                          double radius_px) {
    if (s.row < 0 || s.row >= grid.n || s.col < 0 || s.col >= grid.m)
        throw ValidationError("make_fovea_mask: patch index out of bounds");

    FoveaMask mask;
    mask.mode = mode;
    mask.grid = grid;
    mask.fixation = s;
    if (mode == FoveaMode::patch) {
        mask.patch_map.assign(static_cast<std::size_t>(grid.n) * grid.m, 0.0f);
        mask.patch_map[static_cast<std::size_t>(s.row) * grid.m + s.col] = 1.0f;
    } else {
        if (radius_px <= 0.0) throw ValidationError("make_fovea_mask: circular mode needs radius > 0");
        auto [cx, cy] = patch_center(grid, s);
        mask.pixel_map.assign(static_cast<std::size_t>(grid.frame_h) * grid.frame_w, 0.0f);
        for (int y = 0; y < grid.frame_h; ++y)
            for (int x = 0; x < grid.frame_w; ++x)
                if (std::hypot(x - cx, y - cy) <= radius_px)
                    mask.pixel_map[static_cast<std::size_t>(y) * grid.frame_w + x] = 1.0f;
    }
    return mask;
}

float FoveaMask::at_pixel(int y, int x) const {
    if (mode == FoveaMode::circular)
        return pixel_map[static_cast<std::size_t>(y) * grid.frame_w + x];
    // block replication of the patch map over each patch's pixel extent
    PatchIndex s;
    s.row = std::min(y / grid.patch_h, grid.n - 1);
    s.col = std::min(x / grid.patch_w, grid.m - 1);
    return patch_map[static_cast<std::size_t>(s.row) * grid.m + s.col];
}

FoveatedState init_state(const Tensor& L) {
    if (!L.all_finite()) throw ValidationError("init_state: non-finite input");
    FoveatedState st;
    st.O = L;
    st.k = 0;
    st.t = 1;
    return st;
}

static Tensor blend(const Tensor& O, const Tensor& H, const FoveaMask& E) {
    if (!O.same_shape(H)) throw ValidationError("fovea blend: tensor shape mismatch");
    if (O.height() != E.grid.frame_h || O.width() != E.grid.frame_w)
        throw ValidationError("fovea blend: mask geometry mismatch");
    Tensor out = O;
    int h = O.height(), w = O.width(), c = O.channels();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float e = E.at_pixel(y, x);
            if (e == 0.0f) continue;
            for (int ch = 0; ch < c; ++ch)
                out.at(y, x, ch) = e * H.at(y, x, ch) + (1.0f - e) * O.at(y, x, ch);
        }
    return out;
}

FoveatedState update_within_frame(const FoveatedState& state, const Tensor& H,
                                  const FoveaMask& E) {
    FoveatedState next;
    next.O = blend(state.O, H, E);
    next.k = state.k + 1;
    next.t = state.t;
    next.history = state.history;
    next.history.push_back(E.fixation);
    return next;
}

FoveatedState advance_frame(const FoveatedState& state, const Tensor& H_next,
                            const FoveaMask& E_first) {
    FoveatedState next;
    next.O = blend(state.O, H_next, E_first);
    next.k = 1;
    next.t = state.t + 1;
    next.history = state.history;
    next.history.push_back(E_first.fixation);
    return next;
}

}  // namespace medirl
