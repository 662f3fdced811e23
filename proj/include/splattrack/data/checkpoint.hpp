// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/train/config.hpp"
#include "splattrack/train/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace splattrack::data {

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'L', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    train::Model model;
    train::TrainConfig config;
    int iteration = 0;
};

/// Layout: magic, u32 version, u32 header length, JSON header, then every
/// parameter as a little-endian f32: positions, rotations, log scales,
/// opacity logits, colors, mask logits, the planes by level then axis pair,
/// and per layer its weights then biases.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint &ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t> &bytes, const std::string &origin = "checkpoint");

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
/// Throws missing-file, version-mismatch or shape-mismatch; nothing is
/// returned unless the whole file parses.
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace splattrack::data
