#include "dmrl/config.hpp"

#include <fstream>
#include <sstream>
#include <variant>

#include "dmrl/checkpoint.hpp"
#include "json.hpp"

namespace dmrl {

using nlohmann::json;

namespace {

using Field = std::variant<int Hyperparams::*, double Hyperparams::*, bool Hyperparams::*>;

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table{
      {"meta_batch_size", &Hyperparams::meta_batch_size},
      {"n_candidate", &Hyperparams::n_candidate},
      {"mpc_horizon", &Hyperparams::mpc_horizon},
      {"max_rollout_len", &Hyperparams::max_rollout_len},
      {"n_iterations", &Hyperparams::n_iterations},
      {"mc_trials", &Hyperparams::mc_trials},
      {"model_inner_lr", &Hyperparams::model_inner_lr},
      {"policy_inner_lr", &Hyperparams::policy_inner_lr},
      {"model_meta_lr", &Hyperparams::model_meta_lr},
      {"policy_meta_lr", &Hyperparams::policy_meta_lr},
      {"gamma", &Hyperparams::gamma},
      {"clip_norm", &Hyperparams::clip_norm},
      {"per_step_baseline", &Hyperparams::per_step_baseline},
      {"rollouts_per_task", &Hyperparams::rollouts_per_task},
      {"sim_rollouts_per_task", &Hyperparams::sim_rollouts_per_task},
      {"train_fraction", &Hyperparams::train_fraction},
      {"model_inner_steps", &Hyperparams::model_inner_steps},
      {"phase2_model_steps", &Hyperparams::phase2_model_steps},
      {"phase2_model_stop_loss", &Hyperparams::phase2_model_stop_loss},
      {"convergence_window", &Hyperparams::convergence_window},
      {"convergence_tol", &Hyperparams::convergence_tol},
      {"switch_iteration", &Hyperparams::switch_iteration},
      {"return_window", &Hyperparams::return_window},
      {"return_tol", &Hyperparams::return_tol},
      {"adaptation_budget", &Hyperparams::adaptation_budget},
      {"adaptation_batch", &Hyperparams::adaptation_batch},
      {"eval_common_random_numbers", &Hyperparams::eval_common_random_numbers},
  };
  return table;
}

void assign(Hyperparams& hp, const std::string& key, const Field& field, const json& v) {
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(hp.*member)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw FormatError("config: '" + key + "' must be a boolean");
          hp.*member = v.get<bool>();
        } else if constexpr (std::is_same_v<T, int>) {
          if (!v.is_number_integer()) throw FormatError("config: '" + key + "' must be an integer");
          hp.*member = v.get<int>();
        } else {
          if (!v.is_number()) throw FormatError("config: '" + key + "' must be a number");
          hp.*member = v.get<double>();
        }
      },
      field);
}

}  // namespace

std::vector<std::string> hyperparam_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : fields()) names.push_back(name);
  return names;
}

void apply_config_json(const std::string& text, RunConfig& cfg) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("config: top level must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "seed") {
      if (!value.is_number_unsigned()) throw FormatError("config: 'seed' must be a non-negative integer");
      cfg.seed = value.get<std::uint64_t>();
      continue;
    }
    if (key == "out") {
      if (!value.is_string()) throw FormatError("config: 'out' must be a string");
      cfg.out_dir = value.get<std::string>();
      continue;
    }
    if (key == "checkpoint") {
      if (!value.is_string()) throw FormatError("config: 'checkpoint' must be a string");
      cfg.checkpoint = value.get<std::string>();
      continue;
    }
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw FormatError("config: unknown key '" + key + "'");
    assign(cfg.hp, key, it->second, value);
  }
  try {
    cfg.hp.validate();
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

void load_config_file(const std::filesystem::path& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw FormatError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_json(ss.str(), cfg);
}

std::string hyperparams_to_json(const Hyperparams& hp) {
  json doc = json::object();
  for (const auto& [name, field] : fields()) {
    std::visit([&](auto member) { doc[name] = hp.*member; }, field);
  }
  return doc.dump(2);
}

std::string trace_csv(const std::vector<TrainRecord>& trace) {
  std::ostringstream os;
  os << kTraceHeader << '\n';
  for (const auto& r : trace) {
    os << r.iteration << ',' << to_string(r.phase) << ',' << format_real(r.mean_return) << ','
       << format_real(r.model_val_loss) << ',' << r.env_batches << ',' << r.sim_batches << ','
       << format_real(r.wall_ms) << '\n';
  }
  return os.str();
}

std::string eval_csv(const EvalReport& report) {
  std::ostringstream os;
  os << kEvalHeader << '\n';
  for (std::size_t trial = 0; trial < report.returns.size(); ++trial) {
    const auto& row = report.returns[trial];
    for (std::size_t k = 0; k < row.size(); ++k) {
      os << trial << ',' << k << ',' << format_real(row[k]) << ',' << to_string(report.scenario)
         << '\n';
    }
  }
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace dmrl
