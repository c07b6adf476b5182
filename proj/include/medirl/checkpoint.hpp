#pragma once

#include <filesystem>

#include "medirl/grid.hpp"
#include "medirl/irl.hpp"
#include "medirl/reward_net.hpp"

namespace medirl {

/// Checkpoint = a directory of named FTEN parameter tensors plus a JSON
/// sidecar carrying the net config, the feature/train settings needed to
/// rebuild inputs, optimizer state refs, epoch and seed.
struct Checkpoint {
    RewardNetParams params;
    AdamState adam;
    int epoch = 0;
    std::uint64_t seed = 0;
    GridSpec grid;
    TrainConfig train;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace medirl
