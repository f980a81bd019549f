#pragma once

#include <string>

#include "jtner/trainer.hpp"

namespace jtner {

// Versioned binary container, magic "JTNER". Doubles are stored as raw
// little-endian bit patterns, so a save/load/save round trip is
// byte-identical and parameter values survive exactly.

constexpr char kCheckpointMagic[5] = {'J', 'T', 'N', 'E', 'R'};
constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);  // IoError on mismatch/corruption

}  // namespace jtner
