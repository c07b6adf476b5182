#include <cstdio>
#include <exception>
#include <string>

#include "medirl/commands.hpp"
#include "CLI11.hpp"

namespace {

using medirl::RunConfig;

struct CliOverrides {
    std::string config_path;
    RunConfig cfg;  // values filled by CLI11; applied only when the flag was passed
};

const char* category_of(const std::exception& e) {
    if (dynamic_cast<const medirl::ConfigError*>(&e)) return "config";
    if (dynamic_cast<const medirl::IoError*>(&e)) return "io";
    if (dynamic_cast<const medirl::ValidationError*>(&e)) return "validation";
    if (dynamic_cast<const medirl::ComputeError*>(&e)) return "compute";
    return "internal";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"medirl: maximum-entropy deep IRL for visual-attention scanpaths"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration (flags override it)");

    // flag staging area; only flags the user passed are copied into the config
    std::uint64_t seed = 0;
    std::string out_dir, data_dir, checkpoint_dir, toggle_off, mode;
    int epochs = 0, scenes = 0, frames = 0, experts = 0, horizon = 0, scene_index = 0;
    double ior_decay = 0.0, kld_gate = 0.0;
    bool write_pgm = false, no_timing = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "master RNG seed");
        cmd->add_option("--out", out_dir, "output directory");
        return cmd;
    };

    auto* synth = add_common(app.add_subcommand("synth", "generate a synthetic dataset"));
    synth->add_option("--scenes", scenes, "number of scenes");
    synth->add_option("--frames", frames, "frames per scene");
    synth->add_option("--experts", experts, "expert trajectories per scene");

    auto* train = add_common(app.add_subcommand("train", "train the reward network"));
    train->add_option("--data", data_dir, "dataset directory (from synth)");
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--toggle-off", toggle_off, "disable feature groups, e.g. M or XY");
    train->add_option("--kld-gate", kld_gate, "important-frame KLD threshold");
    train->add_flag("--no-timing", no_timing, "write zeros to the history seconds column");

    auto* eval = add_common(app.add_subcommand("eval", "evaluate saliency metrics"));
    eval->add_option("--data", data_dir, "dataset directory");
    eval->add_option("--checkpoint", checkpoint_dir, "checkpoint directory");
    eval->add_option("--horizon", horizon, "per-frame prediction horizon");

    auto* roll = add_common(app.add_subcommand("rollout", "generate scanpaths and maps"));
    roll->add_option("--data", data_dir, "dataset directory");
    roll->add_option("--checkpoint", checkpoint_dir, "checkpoint directory");
    roll->add_option("--scene", scene_index, "scene index in the dataset");
    roll->add_option("--mode", mode, "sample | argmax");
    roll->add_option("--ior-decay", ior_decay, "inhibition-of-return decay");
    roll->add_option("--horizon", horizon, "fixations per frame");
    roll->add_flag("--pgm", write_pgm, "also export PGM heatmaps");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = medirl::load_run_config(
            config_path.empty() ? std::filesystem::path{} : std::filesystem::path(config_path));

        auto picked = [&](CLI::App* cmd, const std::string& name) {
            return cmd->count(name) > 0;
        };
        CLI::App* cmd = app.get_subcommands().front();
        if (picked(cmd, "--seed")) {
            cfg.seed = seed;
            cfg.train.seed = seed;
        }
        if (picked(cmd, "--out")) cfg.out_dir = out_dir;

        if (cmd == synth) {
            if (picked(cmd, "--scenes")) cfg.scenes = scenes;
            if (picked(cmd, "--frames")) cfg.frames = frames;
            if (picked(cmd, "--experts")) cfg.experts_per_scene = experts;
            medirl::cmd_synth(cfg);
        } else if (cmd == train) {
            if (picked(cmd, "--data")) cfg.data_dir = data_dir;
            if (picked(cmd, "--epochs")) cfg.train.epochs = epochs;
            if (picked(cmd, "--toggle-off"))
                cfg.train.toggles = medirl::FeatureToggles::from_string(toggle_off);
            if (picked(cmd, "--kld-gate")) cfg.kld_gate = kld_gate;
            if (no_timing) cfg.record_timing = false;
            medirl::cmd_train(cfg);
        } else if (cmd == eval) {
            if (picked(cmd, "--data")) cfg.data_dir = data_dir;
            if (picked(cmd, "--checkpoint")) cfg.checkpoint_dir = checkpoint_dir;
            if (picked(cmd, "--horizon")) cfg.horizon = horizon;
            medirl::cmd_eval(cfg);
        } else if (cmd == roll) {
            if (picked(cmd, "--data")) cfg.data_dir = data_dir;
            if (picked(cmd, "--checkpoint")) cfg.checkpoint_dir = checkpoint_dir;
            if (picked(cmd, "--scene")) cfg.scene_index = scene_index;
            if (picked(cmd, "--mode")) cfg.rollout_mode = mode;
            if (picked(cmd, "--ior-decay")) cfg.ior.decay = ior_decay;
            if (picked(cmd, "--horizon")) cfg.horizon = horizon;
            if (write_pgm) cfg.write_pgm = true;
            medirl::cmd_rollout(cfg);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s: %s\n", category_of(e), e.what());
        return 1;
    }
    return 0;
}
