#pragma once

#include <string>

#include "p4g/config.hpp"
#include "p4g/features.hpp"
#include "p4g/model.hpp"

namespace p4g {

// Binary checkpoint, version 1. Layout (little-endian):
//   "P4GCKPT1"                       magic
//   u32 version
//   u64 n, n bytes                   key=value text: model config + metadata
//   u64 count, count x (u32 n, n bytes)   vocabulary tokens in id order
//   u64 count, count x block         named tensors, "embeddings" and "idf" first
// block = u32 name length, name, u64 rows, u64 cols, rows*cols f64 column-major
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  Vocabulary vocab;
  KeyValueConfig metadata;
};

void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocab,
                     const KeyValueConfig& metadata = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace p4g
