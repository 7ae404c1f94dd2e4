#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "discsent/model.hpp"

namespace discsent::model {

inline constexpr char kMagic[] = "DSCSENT1";
inline constexpr std::uint32_t kFormatVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

/// Container shared by checkpoints and sentence indexes: 8 magic bytes,
/// u32 version, u32 header length, JSON header, then little-endian float32
/// tensors. The header's "tensors" array lists {name, shape, offset}; offsets
/// count bytes from the start of the payload.
struct TensorArchive {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  /// Throws IndexError when absent.
  const Tensor<float>& at(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
/// Throws FormatError on bad magic, unsupported version, malformed header, or truncation.
TensorArchive read_archive(const std::filesystem::path& path);

/// Trained model with its vocabulary. `train_config` is informational.
struct Checkpoint {
  Model<float> model;
  text::Vocabulary vocab;
  nlohmann::json train_config = nlohmann::json::object();
  std::uint64_t step = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// FormatError for a malformed file or a tensor that does not fit the stored
/// config; ShapeError when the embedding table disagrees with the vocabulary size.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace discsent::model
