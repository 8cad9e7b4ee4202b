#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pgmel/config.hpp"
#include "pgmel/rng.hpp"
#include "pgmel/scoring.hpp"

namespace pgmel {

/// Full training state: both models, the training RNG, and the resolved
/// config, so a run can resume bit-identically.
struct Checkpoint {
  uint32_t format_version = 1;
  RunConfig config;
  int epoch = 0;
  Rng::State rng_state{};
  std::vector<std::pair<std::string, Tensor>> tensors;  // name -> value, ordered

  void pack(const std::string& prefix, ModelParams& params);
  void unpack(const std::string& prefix, ModelParams& params) const;
};

// Binary layout: magic "PGMLCKPT", u32 version, length-prefixed config JSON,
// i32 epoch, 4x u64 rng state, tensor table, trailing FNV-1a 64 checksum of
// everything before it. All integers little-endian.
void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pgmel
