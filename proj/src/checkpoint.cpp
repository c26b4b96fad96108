#include "dmrl/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dmrl {

using nlohmann::json;

std::string to_string(ArtifactKind k) { return k == ArtifactKind::policy ? "policy" : "dynamics"; }

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_real(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("not a real number: '" + s + "'");
  }
  return v;
}

Checkpoint to_checkpoint(const Policy& policy) {
  return {ArtifactKind::policy, policy.spec(), policy.params(), Normalizer::identity()};
}

Checkpoint to_checkpoint(const DynamicsModel& model) {
  return {ArtifactKind::dynamics, model.spec(), model.params(), model.normalizer()};
}

Policy policy_from(const Checkpoint& ckpt) {
  if (ckpt.kind != ArtifactKind::policy) throw FormatError("checkpoint does not hold a policy");
  return Policy(ckpt.spec, ckpt.params);
}

DynamicsModel model_from(const Checkpoint& ckpt) {
  if (ckpt.kind != ArtifactKind::dynamics) throw FormatError("checkpoint does not hold a dynamics model");
  return DynamicsModel(ckpt.spec, ckpt.params, ckpt.normalization);
}

namespace {

json reals(std::span<const double> values) {
  json arr = json::array();
  for (double v : values) arr.push_back(format_real(v));
  return arr;
}

std::vector<double> read_reals(const json& arr, const char* field) {
  if (!arr.is_array()) throw FormatError(std::string("checkpoint: '") + field + "' must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_string()) throw FormatError(std::string("checkpoint: '") + field + "' holds a non-string");
    out.push_back(parse_real(v.get<std::string>()));
  }
  return out;
}

template <std::size_t N>
std::array<double, N> read_fixed(const json& arr, const char* field) {
  const auto v = read_reals(arr, field);
  if (v.size() != N) throw FormatError(std::string("checkpoint: '") + field + "' has the wrong length");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

const json& member(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(std::string("checkpoint: missing field '") + key + "'");
  return *it;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json dims = json::array();
  dims.push_back(ckpt.spec.input_dim);
  json activations = json::array();
  for (const auto& h : ckpt.spec.hidden) {
    dims.push_back(h.width);
    activations.push_back(to_string(h.activation));
  }
  dims.push_back(ckpt.spec.output_dim);

  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["kind"] = to_string(ckpt.kind);
  doc["spec"] = {{"dims", dims}, {"activations", activations}, {"head", to_string(ckpt.spec.head)}};
  doc["params"] = reals(ckpt.params.values());
  doc["normalization"] = {{"mean", reals(ckpt.normalization.mean)},
                          {"std", reals(ckpt.normalization.stddev)}};
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw FormatError("checkpoint: top level must be an object");
    const auto& version = member(doc, "format_version");
    if (!version.is_number_integer() || version.get<int>() != kCheckpointFormatVersion) {
      throw FormatError("checkpoint: unsupported format_version " + version.dump());
    }
    Checkpoint ckpt;
    const auto kind = member(doc, "kind").get<std::string>();
    if (kind == "policy") {
      ckpt.kind = ArtifactKind::policy;
    } else if (kind == "dynamics") {
      ckpt.kind = ArtifactKind::dynamics;
    } else {
      throw FormatError("checkpoint: unknown kind '" + kind + "'");
    }

    const auto& spec = member(doc, "spec");
    const auto dims = member(spec, "dims").get<std::vector<std::size_t>>();
    const auto acts = member(spec, "activations").get<std::vector<std::string>>();
    if (dims.size() < 3 || acts.size() != dims.size() - 2) {
      throw FormatError("checkpoint: spec dims/activations disagree");
    }
    ckpt.spec.input_dim = dims.front();
    ckpt.spec.output_dim = dims.back();
    for (std::size_t i = 0; i < acts.size(); ++i) {
      ckpt.spec.hidden.push_back({dims[i + 1], activation_from_string(acts[i])});
    }
    ckpt.spec.head = head_from_string(member(spec, "head").get<std::string>());
    try {
      ckpt.spec.validate();
    } catch (const ShapeError& e) {
      throw FormatError(std::string("checkpoint: ") + e.what());
    }

    auto values = read_reals(member(doc, "params"), "params");
    if (values.size() != ckpt.spec.param_count()) {
      throw FormatError("checkpoint: expected " + std::to_string(ckpt.spec.param_count()) +
                        " parameters, found " + std::to_string(values.size()));
    }
    ckpt.params = ParamVector(ckpt.spec.layout(), std::move(values));

    const auto& norm = member(doc, "normalization");
    ckpt.normalization.mean = read_fixed<kModelInputDim>(member(norm, "mean"), "normalization.mean");
    ckpt.normalization.stddev = read_fixed<kModelInputDim>(member(norm, "std"), "normalization.std");
    return ckpt;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto text = serialize_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, ArtifactKind expected_kind,
                           const MlpSpec& expected_spec) {
  auto ckpt = load_checkpoint(path);
  if (ckpt.kind != expected_kind) {
    throw FormatError("checkpoint holds a " + to_string(ckpt.kind) + ", expected " +
                      to_string(expected_kind));
  }
  if (!(ckpt.spec == expected_spec)) throw FormatError("checkpoint network spec does not match");
  return ckpt;
}

}  // namespace dmrl
