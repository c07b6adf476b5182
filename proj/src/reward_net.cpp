#include "medirl/reward_net.hpp"

#include <algorithm>
#include <cmath>

namespace medirl {

namespace {
constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;
}  // namespace

void NetConfig::validate() const {
    if (input_dim < 1) throw ValidationError("NetConfig: input_dim must be >= 1");
    for (int w : hidden)
        if (w < 1) throw ValidationError("NetConfig: hidden widths must be positive");
}

std::size_t RewardNetParams::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += l.W.v.size() + l.b.size();
        n += l.bn_gamma.size() + l.bn_beta.size();
    }
    return n + head_w.size() + 1;
}

bool RewardNetParams::all_finite() const {
    auto ok = [](const std::vector<double>& v) {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    };
    for (const auto& l : layers)
        if (!l.W.all_finite() || !ok(l.b) || !ok(l.bn_gamma) || !ok(l.bn_beta) ||
            !ok(l.bn_run_mean) || !ok(l.bn_run_var))
            return false;
    return ok(head_w) && std::isfinite(head_b);
}

NetGradients NetGradients::zeros_like(const RewardNetParams& p) {
    NetGradients g;
    for (const auto& l : p.layers) {
        g.dW.emplace_back(l.W.rows, l.W.cols);
        g.db.emplace_back(l.b.size(), 0.0);
        g.dgamma.emplace_back(l.bn_gamma.size(), 0.0);
        g.dbeta.emplace_back(l.bn_beta.size(), 0.0);
    }
    g.dhead_w.assign(p.head_w.size(), 0.0);
    return g;
}

void NetGradients::accumulate(const NetGradients& o, double s) {
    for (std::size_t i = 0; i < dW.size(); ++i) {
        for (std::size_t j = 0; j < dW[i].v.size(); ++j) dW[i].v[j] += s * o.dW[i].v[j];
        for (std::size_t j = 0; j < db[i].size(); ++j) db[i][j] += s * o.db[i][j];
        for (std::size_t j = 0; j < dgamma[i].size(); ++j) dgamma[i][j] += s * o.dgamma[i][j];
        for (std::size_t j = 0; j < dbeta[i].size(); ++j) dbeta[i][j] += s * o.dbeta[i][j];
    }
    for (std::size_t j = 0; j < dhead_w.size(); ++j) dhead_w[j] += s * o.dhead_w[j];
    dhead_b += s * o.dhead_b;
}

void NetGradients::scale(double s) {
    for (auto& m : dW)
        for (double& x : m.v) x *= s;
    for (auto& v : db)
        for (double& x : v) x *= s;
    for (auto& v : dgamma)
        for (double& x : v) x *= s;
    for (auto& v : dbeta)
        for (double& x : v) x *= s;
    for (double& x : dhead_w) x *= s;
    dhead_b *= s;
}

double NetGradients::l2_norm() const {
    double acc = 0.0;
    for (const auto& m : dW)
        for (double x : m.v) acc += x * x;
    for (const auto& v : db)
        for (double x : v) acc += x * x;
    for (const auto& v : dgamma)
        for (double x : v) acc += x * x;
    for (const auto& v : dbeta)
        for (double x : v) acc += x * x;
    for (double x : dhead_w) acc += x * x;
    acc += dhead_b * dhead_b;
    return std::sqrt(acc);
}

AdamState AdamState::zeros_like(const RewardNetParams& p) {
    AdamState s;
    for (const auto& l : p.layers) {
        s.m.emplace_back(l.W.v.size(), 0.0);
        s.m.emplace_back(l.b.size(), 0.0);
        s.m.emplace_back(l.bn_gamma.size(), 0.0);
        s.m.emplace_back(l.bn_beta.size(), 0.0);
    }
    s.m.emplace_back(p.head_w.size(), 0.0);
    s.m.emplace_back(1, 0.0);
    s.v = s.m;
    return s;
}

RewardNetParams init_params(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(Rng::mix(seed, 0x4179));

    RewardNetParams p;
    p.config = config;
    int in = config.input_dim;
    for (int width : config.hidden) {
        LayerParams l;
        l.W = Matrix(in, width);
        double bound = std::sqrt(6.0 / (in + width));
        for (double& w : l.W.v) w = rng.uniform(-bound, bound);
        l.b.assign(width, 0.0);
        if (config.batch_norm) {
            l.bn_gamma.assign(width, 1.0);
            l.bn_beta.assign(width, 0.0);
            l.bn_run_mean.assign(width, 0.0);
            l.bn_run_var.assign(width, 1.0);
        }
        p.layers.push_back(std::move(l));
        in = width;
    }
    double bound = std::sqrt(6.0 / (in + 1));
    p.head_w.resize(in);
    for (double& w : p.head_w) w = rng.uniform(-bound, bound);
    p.head_b = 0.0;
    return p;
}

std::vector<double> forward(RewardNetParams& params, const Matrix& phi, bool train_mode,
                            ForwardCache* cache) {
    if (static_cast<int>(phi.cols) != params.config.input_dim)
        throw ValidationError("forward: input dim " + std::to_string(phi.cols) +
                              " does not match config " + std::to_string(params.config.input_dim));
    if (!phi.all_finite()) throw ValidationError("forward: non-finite input");

    std::size_t S = phi.rows;
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.train_mode = train_mode;
    c.input = phi;
    c.layers.clear();

    const Matrix* x = &c.input;
    for (auto& l : params.layers) {
        ForwardCache::LayerCache lc;
        std::size_t out = l.W.cols;
        lc.A = Matrix(S, out);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t j = 0; j < out; ++j) {
                double acc = l.b[j];
                for (std::size_t i = 0; i < l.W.rows; ++i) acc += x->at(s, i) * l.W.at(i, j);
                lc.A.at(s, j) = acc;
            }
        lc.H = lc.A;
        for (double& v : lc.H.v) v = v > 0.0 ? v : 0.0;

        if (params.config.batch_norm) {
            lc.Xhat = Matrix(S, out);
            lc.Out = Matrix(S, out);
            lc.mu.resize(out);
            lc.var.resize(out);
            for (std::size_t j = 0; j < out; ++j) {
                double mu, var;
                if (train_mode) {
                    double sum = 0.0;
                    for (std::size_t s = 0; s < S; ++s) sum += lc.H.at(s, j);
                    mu = sum / S;
                    double sq = 0.0;
                    for (std::size_t s = 0; s < S; ++s) {
                        double d = lc.H.at(s, j) - mu;
                        sq += d * d;
                    }
                    var = sq / S;
                    l.bn_run_mean[j] = kBnMomentum * l.bn_run_mean[j] + (1.0 - kBnMomentum) * mu;
                    l.bn_run_var[j] = kBnMomentum * l.bn_run_var[j] + (1.0 - kBnMomentum) * var;
                } else {
                    mu = l.bn_run_mean[j];
                    var = l.bn_run_var[j];
                }
                lc.mu[j] = mu;
                lc.var[j] = var;
                double inv = 1.0 / std::sqrt(var + kBnEps);
                for (std::size_t s = 0; s < S; ++s) {
                    double xh = (lc.H.at(s, j) - mu) * inv;
                    lc.Xhat.at(s, j) = xh;
                    lc.Out.at(s, j) = l.bn_gamma[j] * xh + l.bn_beta[j];
                }
            }
        } else {
            lc.Out = lc.H;
        }
        c.layers.push_back(std::move(lc));
        x = &c.layers.back().Out;
    }

    std::vector<double> r(S);
    for (std::size_t s = 0; s < S; ++s) {
        double acc = params.head_b;
        for (std::size_t j = 0; j < params.head_w.size(); ++j)
            acc += x->at(s, j) * params.head_w[j];
        r[s] = acc;
    }
    for (double v : r)
        if (!std::isfinite(v)) throw ComputeError("forward: non-finite reward (exploding params?)");
    return r;
}

NetGradients backward(const RewardNetParams& params, const ForwardCache& cache,
                      const std::vector<double>& grad_r) {
    std::size_t S = cache.input.rows;
    if (grad_r.size() != S) throw ValidationError("backward: grad_r length mismatch");
    if (cache.layers.size() != params.layers.size())
        throw ValidationError("backward: cache does not match params");

    NetGradients g = NetGradients::zeros_like(params);
    const Matrix& last =
        params.layers.empty() ? cache.input : cache.layers.back().Out;

    // head
    Matrix dOut(S, params.head_w.size());
    for (std::size_t s = 0; s < S; ++s) {
        g.dhead_b += grad_r[s];
        for (std::size_t j = 0; j < params.head_w.size(); ++j) {
            g.dhead_w[j] += grad_r[s] * last.at(s, j);
            dOut.at(s, j) = grad_r[s] * params.head_w[j];
        }
    }

    for (int li = static_cast<int>(params.layers.size()) - 1; li >= 0; --li) {
        const auto& l = params.layers[li];
        const auto& lc = cache.layers[li];
        std::size_t out = l.W.cols;

        Matrix dH(S, out);
        if (params.config.batch_norm) {
            for (std::size_t j = 0; j < out; ++j) {
                double inv = 1.0 / std::sqrt(lc.var[j] + kBnEps);
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::size_t s = 0; s < S; ++s) {
                    double dy = dOut.at(s, j);
                    g.dgamma[li][j] += dy * lc.Xhat.at(s, j);
                    g.dbeta[li][j] += dy;
                    double dxh = dy * l.bn_gamma[j];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * lc.Xhat.at(s, j);
                }
                if (cache.train_mode) {
                    for (std::size_t s = 0; s < S; ++s) {
                        double dxh = dOut.at(s, j) * l.bn_gamma[j];
                        dH.at(s, j) = inv / S *
                                      (S * dxh - sum_dxhat - lc.Xhat.at(s, j) * sum_dxhat_xhat);
                    }
                } else {
                    // eval mode: μ, σ are constants
                    for (std::size_t s = 0; s < S; ++s)
                        dH.at(s, j) = dOut.at(s, j) * l.bn_gamma[j] * inv;
                }
            }
        } else {
            dH = dOut;
        }

        // ReLU
        Matrix dA = dH;
        for (std::size_t i = 0; i < dA.v.size(); ++i)
            if (lc.A.v[i] <= 0.0) dA.v[i] = 0.0;

        const Matrix& x = li == 0 ? cache.input : cache.layers[li - 1].Out;
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t j = 0; j < out; ++j) {
                double d = dA.at(s, j);
                if (d == 0.0) continue;
                g.db[li][j] += d;
                for (std::size_t i = 0; i < l.W.rows; ++i) g.dW[li].at(i, j) += x.at(s, i) * d;
            }

        if (li > 0) {
            Matrix dX(S, l.W.rows);
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t i = 0; i < l.W.rows; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < out; ++j) acc += dA.at(s, j) * l.W.at(i, j);
                    dX.at(s, i) = acc;
                }
            dOut = std::move(dX);
        }
    }
    return g;
}

namespace {

void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, const AdamState& s, double lr) {
    double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(g[i])) throw ComputeError("adam_step: non-finite gradient");
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + s.epsilon);
    }
}

}  // namespace

void adam_step(RewardNetParams& params, const NetGradients& grads, AdamState& state, double lr) {
    ++state.step;
    std::size_t slot = 0;
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        auto& l = params.layers[li];
        adam_update(l.W.v, grads.dW[li].v, state.m[slot], state.v[slot], state, lr), ++slot;
        adam_update(l.b, grads.db[li], state.m[slot], state.v[slot], state, lr), ++slot;
        adam_update(l.bn_gamma, grads.dgamma[li], state.m[slot], state.v[slot], state, lr), ++slot;
        adam_update(l.bn_beta, grads.dbeta[li], state.m[slot], state.v[slot], state, lr), ++slot;
    }
    adam_update(params.head_w, grads.dhead_w, state.m[slot], state.v[slot], state, lr), ++slot;
    std::vector<double> hb{params.head_b}, ghb{grads.dhead_b};
    adam_update(hb, ghb, state.m[slot], state.v[slot], state, lr);
    params.head_b = hb[0];
}

double lr_at_epoch(const LrSchedule& sched, int epoch) {
    if (epoch < 1) throw ValidationError("lr_at_epoch: epoch must be >= 1");
    if (epoch <= sched.warmup_epochs) {
        double a = sched.warmup_epochs <= 1
                       ? 1.0
                       : static_cast<double>(epoch - 1) / (sched.warmup_epochs - 1);
        return sched.lr_init + a * (sched.lr_peak - sched.lr_init);
    }
    // lr_peak holds through decay_start_epoch + decay_every - 1; first decay at
    // the first full period after decay_start (14, 17, 20, ... by default)
    int first_decay = sched.decay_start_epoch + sched.decay_every;
    if (epoch < first_decay) return sched.lr_peak;
    int periods = 1 + (epoch - first_decay) / sched.decay_every;
    return sched.lr_peak * std::pow(sched.decay_factor, periods);
}

}  // namespace medirl
