#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmrl/errors.hpp"
#include "dmrl/rng.hpp"

namespace dmrl {

enum class Activation { relu };
enum class Head { linear, softmax };

struct LayerSpec {
  std::size_t width = 0;
  Activation activation = Activation::relu;
  bool operator==(const LayerSpec&) const = default;
};

struct BlockShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const BlockShape&) const = default;
};

// Fully connected network: input -> hidden relu layers -> output head.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<LayerSpec> hidden;
  std::size_t output_dim = 0;
  Head head = Head::linear;

  // Throws ShapeError when the spec cannot describe a network.
  void validate() const;
  // Weight (out x in) then bias (out x 1) per affine layer.
  std::vector<BlockShape> layout() const;
  std::size_t param_count() const;

  bool operator==(const MlpSpec&) const = default;
};

std::string to_string(Activation a);
std::string to_string(Head h);
Activation activation_from_string(const std::string& s);
Head head_from_string(const std::string& s);

// Flat real-valued store partitioned into row-major blocks. ParamVector and
// Gradient share the representation but are distinct types.
template <class Tag>
class BlockVector {
 public:
  BlockVector() = default;

  explicit BlockVector(std::vector<BlockShape> layout) : layout_(std::move(layout)) {
    values_.assign(total(layout_), 0.0);
  }

  BlockVector(std::vector<BlockShape> layout, std::vector<double> values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != total(layout_)) {
      throw ShapeError("block vector: " + std::to_string(values_.size()) +
                       " values for a layout of " + std::to_string(total(layout_)));
    }
  }

  template <class OtherTag>
  static BlockVector zeros_like(const BlockVector<OtherTag>& other) {
    return BlockVector(other.layout());
  }

  std::size_t size() const { return values_.size(); }
  const std::vector<BlockShape>& layout() const { return layout_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool all_finite() const;
  bool operator==(const BlockVector&) const = default;

 private:
  static std::size_t total(const std::vector<BlockShape>& layout) {
    std::size_t n = 0;
    for (const auto& b : layout) n += b.size();
    return n;
  }

  std::vector<BlockShape> layout_;
  std::vector<double> values_;
};

struct ParamTag;
struct GradientTag;
using ParamVector = BlockVector<ParamTag>;
using Gradient = BlockVector<GradientTag>;

// Glorot-uniform weights, zero biases.
ParamVector init_params(const MlpSpec& spec, Rng& rng);
ParamVector zero_params(const MlpSpec& spec);

std::vector<double> forward(const MlpSpec& spec, const ParamVector& params,
                            std::span<const double> input);

// Exact gradient of <forward(input), upstream> with respect to params.
Gradient backward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
                  std::span<const double> upstream);

// params - lr * grad.
ParamVector sgd_step(const ParamVector& params, const Gradient& grad, double lr);

// Intermediate values of one forward pass, reused by the backward sweep.
struct ForwardTrace {
  // layers[0] is the input; layers[k] is the post-relu output of hidden layer k;
  // the last entry holds the pre-head values (logits for a softmax head).
  std::vector<std::vector<double>> layers;
  std::vector<double> output;
};

ForwardTrace forward_trace(const MlpSpec& spec, const ParamVector& params,
                           std::span<const double> input);

// Where the upstream gradient is attached.
enum class GradientSite { output, pre_head };

// grad += scale * d<site values, upstream>/d params.
void accumulate_gradient(const MlpSpec& spec, const ParamVector& params, const ForwardTrace& trace,
                         std::span<const double> upstream, GradientSite site, double scale,
                         Gradient& grad);

std::vector<double> softmax(std::span<const double> logits);

double dot(std::span<const double> a, std::span<const double> b);
double global_norm(const Gradient& g);
// Rescales g in place so its L2 norm is at most max_norm. Returns the pre-clip norm.
double clip_by_global_norm(Gradient& g, double max_norm);
void add_scaled(Gradient& acc, const Gradient& g, double scale);
void check_same_layout(const std::vector<BlockShape>& a, const std::vector<BlockShape>& b,
                       const char* where);

// FNV-1a over the raw bytes of the values; identifies a parameter snapshot.
std::uint64_t param_hash(const ParamVector& params);

}  // namespace dmrl
