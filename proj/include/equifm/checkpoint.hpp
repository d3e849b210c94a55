#pragma once

// Binary model checkpoints, layout version 1 (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "EQFMCKPT"
//   8       4     u32 format version (1)
//   12      4     u32 n_layers
//   16      4     u32 hidden
//   20      4     u32 feature_dim
//   24      4     u32 time-embedding width (16)
//   28      4     u32 number of atom symbols S
//   32      ...   S entries of (u8 length, ASCII bytes), in one-hot order
//   ...     1     u8 charge channel flag
//   ...     8     u64 initialization seed
//   ...     8     u64 parameter count P
//   ...     8P    P IEEE-754 binary64 values, little-endian
//
// See docs/checkpoint_format.md for the parameter block ordering.

#include "equifm/molecule.hpp"
#include "equifm/vectorfield.hpp"

#include <filesystem>
#include <stdexcept>

namespace equifm {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  VectorFieldModel model;
  FeatureLayout layout;
};

void save_checkpoint(const VectorFieldModel& model, const FeatureLayout& layout, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace equifm
