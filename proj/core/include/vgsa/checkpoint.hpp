#pragma once

// Binary checkpoint container, little-endian:
//
//   magic      8 bytes  "VGSACKPT"
//   version    u32      (currently 1)
//   json_len   u64
//   json       json_len bytes of UTF-8:
//                {"config": {...}, "config_hash": "<16 hex>", "epochs_done": N,
//                 "adam_step": N, "vocab": ["<pad>", "<unk>", "<s>", "</s>", ...]}
//   count      u64      number of tensors
//   tensors    count x { u32 name_len, name bytes, u64 rows, u64 cols,
//                        rows*cols IEEE-754 doubles, row-major }
//
// Tensors are every model parameter by name, followed by "adam.m/<name>" and
// "adam.v/<name>" for the optimizer moments.

#include <cstddef>
#include <filesystem>
#include <iosfwd>

#include "vgsa/trainer.hpp"

namespace vgsa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  Vocabulary vocab;
  ModelParameters model;
  AdamState adam;
  std::size_t epochs_done = 0;
};

Checkpoint snapshot(const Trainer& trainer, const Vocabulary& vocab);
/// Trainer that continues exactly where the checkpoint left off.
Trainer resume(const Checkpoint& checkpoint, const Dataset& data);

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vgsa
