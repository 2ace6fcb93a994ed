#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spadnn/models.hpp"

namespace spadnn {

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

struct TrainingMetadata {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

// Everything needed to rebuild a network: its architecture, trainable weights,
// batch-norm running statistics and training provenance.
struct ModelCheckpoint {
  ArchitectureSpec spec;
  std::vector<NamedArray> weights;
  std::vector<NamedArray> buffers;
  TrainingMetadata meta;

  friend bool operator==(const ModelCheckpoint&, const ModelCheckpoint&) = default;
};

inline constexpr int kCheckpointVersion = 1;

// Container layout:
//   line 1  "spadnn-checkpoint <version>"
//   line 2  JSON header: spec, block table, metadata, payload size, checksum
//   rest    little-endian float32 blocks in header order
// The checksum is FNV-1a 64 over the header (without its checksum field)
// followed by the payload.
std::string encode_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const Network& network, const std::filesystem::path& path,
                     const TrainingMetadata& meta = {});
Network load_network(const std::filesystem::path& path);

}  // namespace spadnn
