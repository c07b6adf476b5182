#include "medirl/checkpoint.hpp"

#include <fstream>

#include "medirl/io.hpp"
#include "json.hpp"

namespace medirl {

using nlohmann::json;

namespace {

Tensor vec_to_tensor(const std::vector<double>& v) {
    Tensor t({static_cast<std::uint32_t>(v.size())});
    for (std::size_t i = 0; i < v.size(); ++i) t.v[i] = static_cast<float>(v[i]);
    return t;
}

Tensor mat_to_tensor(const Matrix& m) {
    Tensor t({static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)});
    for (std::size_t i = 0; i < m.v.size(); ++i) t.v[i] = static_cast<float>(m.v[i]);
    return t;
}

std::vector<double> tensor_to_vec(const Tensor& t, std::size_t want) {
    if (t.size() != want) throw IoError("checkpoint tensor has unexpected size");
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.v[i];
    return v;
}

std::string toggles_to_string(const FeatureToggles& t) {
    std::string s;
    if (!t.x) s += 'X';
    if (!t.y) s += 'Y';
    if (!t.g) s += 'G';
    if (!t.m) s += 'M';
    if (!t.d) s += 'D';
    if (!t.q) s += 'Q';
    if (!t.v) s += 'v';
    return s;  // disabled groups; empty = all on
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
    std::filesystem::create_directories(dir);
    json tensors = json::object();
    auto save = [&](const std::string& name, const Tensor& t) {
        std::string file = name + ".ften";
        write_tensor(dir / file, t);
        tensors[name] = file;
    };

    for (std::size_t i = 0; i < ckpt.params.layers.size(); ++i) {
        const auto& l = ckpt.params.layers[i];
        std::string p = "layer" + std::to_string(i) + "_";
        save(p + "w", mat_to_tensor(l.W));
        save(p + "b", vec_to_tensor(l.b));
        if (ckpt.params.config.batch_norm) {
            save(p + "bn_gamma", vec_to_tensor(l.bn_gamma));
            save(p + "bn_beta", vec_to_tensor(l.bn_beta));
            save(p + "bn_run_mean", vec_to_tensor(l.bn_run_mean));
            save(p + "bn_run_var", vec_to_tensor(l.bn_run_var));
        }
    }
    save("head_w", vec_to_tensor(ckpt.params.head_w));
    save("head_b", vec_to_tensor({ckpt.params.head_b}));

    json opt_tensors = json::object();
    for (std::size_t i = 0; i < ckpt.adam.m.size(); ++i) {
        std::string mn = "adam_m" + std::to_string(i), vn = "adam_v" + std::to_string(i);
        write_tensor(dir / (mn + ".ften"), vec_to_tensor(ckpt.adam.m[i]));
        write_tensor(dir / (vn + ".ften"), vec_to_tensor(ckpt.adam.v[i]));
        opt_tensors[mn] = mn + ".ften";
        opt_tensors[vn] = vn + ".ften";
    }

    json sidecar = {
        {"version", 1},
        {"epoch", ckpt.epoch},
        {"seed", ckpt.seed},
        {"config",
         {{"input_dim", ckpt.params.config.input_dim},
          {"hidden", ckpt.params.config.hidden},
          {"batch_norm", ckpt.params.config.batch_norm}}},
        {"grid",
         {{"frame_h", ckpt.grid.frame_h},
          {"frame_w", ckpt.grid.frame_w},
          {"patch_h", ckpt.grid.patch_h},
          {"patch_w", ckpt.grid.patch_w}}},
        {"train",
         {{"gamma", ckpt.train.gamma},
          {"sigma_max", ckpt.train.sigma_max},
          {"max_speed_mph", ckpt.train.max_speed_mph},
          {"lambda_depth", ckpt.train.lambda_depth},
          {"toggles_off", toggles_to_string(ckpt.train.toggles)}}},
        {"tensors", tensors},
        {"optimizer", {{"step", ckpt.adam.step}, {"tensors", opt_tensors}}}};
    atomic_write_file(dir / "checkpoint.json", sidecar.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "checkpoint.json");
    if (!in) throw IoError("cannot open checkpoint: " + (dir / "checkpoint.json").string());
    json sidecar;
    try {
        in >> sidecar;
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint sidecar: " + std::string(e.what()));
    }

    Checkpoint ckpt;
    try {
        ckpt.epoch = sidecar.at("epoch").get<int>();
        ckpt.seed = sidecar.at("seed").get<std::uint64_t>();
        NetConfig cfg;
        cfg.input_dim = sidecar.at("config").at("input_dim").get<int>();
        cfg.hidden = sidecar.at("config").at("hidden").get<std::vector<int>>();
        cfg.batch_norm = sidecar.at("config").at("batch_norm").get<bool>();
        cfg.validate();

        const auto& g = sidecar.at("grid");
        ckpt.grid = build_grid(g.at("frame_h").get<int>(), g.at("frame_w").get<int>(),
                               g.at("patch_h").get<int>(), g.at("patch_w").get<int>());
        const auto& tr = sidecar.at("train");
        ckpt.train.gamma = tr.at("gamma").get<double>();
        ckpt.train.sigma_max = tr.at("sigma_max").get<double>();
        ckpt.train.max_speed_mph = tr.at("max_speed_mph").get<double>();
        ckpt.train.lambda_depth = tr.at("lambda_depth").get<double>();
        ckpt.train.toggles = FeatureToggles::from_string(tr.at("toggles_off").get<std::string>());
        ckpt.train.net = cfg;
        ckpt.train.seed = ckpt.seed;

        ckpt.params.config = cfg;
        const auto& tensors = sidecar.at("tensors");
        auto load_vec = [&](const std::string& name, std::size_t want) {
            return tensor_to_vec(read_tensor(dir / tensors.at(name).get<std::string>()), want);
        };

        int in_dim = cfg.input_dim;
        for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
            LayerParams l;
            int out = cfg.hidden[i];
            std::string p = "layer" + std::to_string(i) + "_";
            auto w = load_vec(p + "w", static_cast<std::size_t>(in_dim) * out);
            l.W = Matrix(in_dim, out);
            l.W.v = std::move(w);
            l.b = load_vec(p + "b", out);
            if (cfg.batch_norm) {
                l.bn_gamma = load_vec(p + "bn_gamma", out);
                l.bn_beta = load_vec(p + "bn_beta", out);
                l.bn_run_mean = load_vec(p + "bn_run_mean", out);
                l.bn_run_var = load_vec(p + "bn_run_var", out);
            }
            ckpt.params.layers.push_back(std::move(l));
            in_dim = out;
        }
        ckpt.params.head_w = load_vec("head_w", in_dim);
        ckpt.params.head_b = load_vec("head_b", 1)[0];

        ckpt.adam = AdamState::zeros_like(ckpt.params);
        ckpt.adam.step = sidecar.at("optimizer").at("step").get<long>();
        const auto& opt_tensors = sidecar.at("optimizer").at("tensors");
        for (std::size_t i = 0; i < ckpt.adam.m.size(); ++i) {
            ckpt.adam.m[i] = tensor_to_vec(
                read_tensor(dir / opt_tensors.at("adam_m" + std::to_string(i)).get<std::string>()),
                ckpt.adam.m[i].size());
            ckpt.adam.v[i] = tensor_to_vec(
                read_tensor(dir / opt_tensors.at("adam_v" + std::to_string(i)).get<std::string>()),
                ckpt.adam.v[i].size());
        }
    } catch (const json::exception& e) {
        throw IoError("checkpoint field error: " + std::string(e.what()));
    }
    if (!ckpt.params.all_finite()) throw ValidationError("checkpoint contains non-finite params");
    return ckpt;
}

}  // namespace medirl
