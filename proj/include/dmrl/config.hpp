#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmrl/eval.hpp"
#include "dmrl/trainer.hpp"

namespace dmrl {

// Flat JSON: hyperparameter names plus optional "seed", "out" and
// "checkpoint". Unknown keys and mistyped values raise FormatError.
struct RunConfig {
  std::string mode;
  Hyperparams hp;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
  std::optional<std::filesystem::path> checkpoint;
};

void apply_config_json(const std::string& text, RunConfig& cfg);
void load_config_file(const std::filesystem::path& path, RunConfig& cfg);
std::string hyperparams_to_json(const Hyperparams& hp);
std::vector<std::string> hyperparam_names();

// CSV emitters. Reals use shortest round-trip formatting, so reruns with the
// same seed reproduce every column except wall_ms byte for byte.
inline constexpr const char* kTraceHeader =
    "iteration,phase,mean_return,model_val_loss,env_batches,sim_batches,wall_ms";
inline constexpr const char* kEvalHeader = "trial,rollout_index,return,scenario";

std::string trace_csv(const std::vector<TrainRecord>& trace);
std::string eval_csv(const EvalReport& report);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dmrl
