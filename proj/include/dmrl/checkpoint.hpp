#pragma once

#include <filesystem>
#include <string>

#include "dmrl/dynamics.hpp"
#include "dmrl/mlp.hpp"
#include "dmrl/policy.hpp"

namespace dmrl {

inline constexpr int kCheckpointFormatVersion = 1;

enum class ArtifactKind { policy, dynamics };
std::string to_string(ArtifactKind k);

struct Checkpoint {
  ArtifactKind kind = ArtifactKind::policy;
  MlpSpec spec;
  ParamVector params;
  Normalizer normalization = Normalizer::identity();
};

Checkpoint to_checkpoint(const Policy& policy);
Checkpoint to_checkpoint(const DynamicsModel& model);
Policy policy_from(const Checkpoint& ckpt);
DynamicsModel model_from(const Checkpoint& ckpt);

// JSON envelope; every real is stored as its shortest round-trip decimal
// string. The file is written to a temporary sibling and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
std::string serialize_checkpoint(const Checkpoint& ckpt);

// Throws FormatError on unreadable, malformed, truncated or version-mismatched
// input.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(const std::string& text);

// Additionally requires the stored kind and network spec to match.
Checkpoint load_checkpoint(const std::filesystem::path& path, ArtifactKind expected_kind,
                           const MlpSpec& expected_spec);

std::string format_real(double v);
double parse_real(const std::string& s);

}  // namespace dmrl
