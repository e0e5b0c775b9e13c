#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "sclft/encoder.hpp"

namespace sclft {

struct CheckpointMeta {
  std::string task;
  std::int64_t step = 0;
  std::map<std::string, double> metrics;
  bool operator==(const CheckpointMeta&) const = default;
};

/// Serialized model state. Round-trips bit-exactly: parameters are stored
/// as raw little-endian IEEE-754 doubles.
struct Checkpoint {
  EncoderConfig config;
  int num_classes = 2;
  ModelParams params;
  CheckpointMeta meta;
};

/// File layout: magic "SCLFTCKP", u32 version, then two u64-length-prefixed
/// sections (config+meta as JSON text, parameter blob as little-endian
/// doubles), then a trailing u64 FNV-1a checksum over everything before it.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws Errc::corrupted_checkpoint on truncation or digest mismatch and
/// Errc::version_mismatch on an unsupported version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

Model model_from_checkpoint(const Checkpoint& ckpt);
Checkpoint checkpoint_from_model(const Model& model, CheckpointMeta meta = {});

}  // namespace sclft
