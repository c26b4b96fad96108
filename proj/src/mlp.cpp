#include "dmrl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dmrl {

namespace {

struct AffineLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

std::vector<AffineLayer> affine_layers(const MlpSpec& spec) {
  std::vector<AffineLayer> layers;
  std::size_t in = spec.input_dim;
  std::size_t offset = 0;
  auto push = [&](std::size_t out) {
    AffineLayer l{in, out, offset, offset + in * out};
    offset += in * out + out;
    layers.push_back(l);
    in = out;
  };
  for (const auto& h : spec.hidden) push(h.width);
  push(spec.output_dim);
  return layers;
}

void check_input(const MlpSpec& spec, const ParamVector& params, std::span<const double> input) {
  if (input.size() != spec.input_dim) {
    throw ShapeError("mlp: input has " + std::to_string(input.size()) + " entries, spec expects " +
                     std::to_string(spec.input_dim));
  }
  if (params.layout() != spec.layout()) {
    throw ShapeError("mlp: parameter layout does not match spec");
  }
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim == 0) throw ShapeError("mlp spec: input_dim must be >= 1");
  if (hidden.empty()) throw ShapeError("mlp spec: at least one hidden layer is required");
  for (const auto& h : hidden) {
    if (h.width == 0) throw ShapeError("mlp spec: hidden widths must be >= 1");
  }
  if (output_dim == 0) throw ShapeError("mlp spec: output width must be >= 1");
}

std::vector<BlockShape> MlpSpec::layout() const {
  std::vector<BlockShape> blocks;
  for (const auto& l : affine_layers(*this)) {
    blocks.push_back({l.out, l.in});
    blocks.push_back({l.out, 1});
  }
  return blocks;
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (const auto& b : layout()) n += b.size();
  return n;
}

std::string to_string(Activation) { return "relu"; }

std::string to_string(Head h) { return h == Head::linear ? "linear" : "softmax"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  throw FormatError("unknown activation '" + s + "'");
}

Head head_from_string(const std::string& s) {
  if (s == "linear") return Head::linear;
  if (s == "softmax") return Head::softmax;
  throw FormatError("unknown output head '" + s + "'");
}

template <class Tag>
bool BlockVector<Tag>::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

template class BlockVector<ParamTag>;
template class BlockVector<GradientTag>;

ParamVector init_params(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParamVector params(spec.layout());
  for (const auto& l : affine_layers(spec)) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    for (std::size_t i = 0; i < l.in * l.out; ++i) {
      params[l.weight_offset + i] = rng.uniform(-bound, bound);
    }
  }
  return params;
}

ParamVector zero_params(const MlpSpec& spec) {
  spec.validate();
  return ParamVector(spec.layout());
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

ForwardTrace forward_trace(const MlpSpec& spec, const ParamVector& params,
                           std::span<const double> input) {
  check_input(spec, params, input);
  const auto layers = affine_layers(spec);
  const auto w = params.values();

  ForwardTrace trace;
  trace.layers.reserve(layers.size() + 1);
  trace.layers.emplace_back(input.begin(), input.end());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    const auto& x = trace.layers.back();
    std::vector<double> z(l.out);
    for (std::size_t r = 0; r < l.out; ++r) {
      const double* row = w.data() + l.weight_offset + r * l.in;
      double acc = w[l.bias_offset + r];
      for (std::size_t c = 0; c < l.in; ++c) acc += row[c] * x[c];
      z[r] = acc;
    }
    if (k + 1 < layers.size()) {
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    }
    trace.layers.push_back(std::move(z));
  }
  trace.output = spec.head == Head::softmax ? softmax(trace.layers.back()) : trace.layers.back();
  return trace;
}

std::vector<double> forward(const MlpSpec& spec, const ParamVector& params,
                            std::span<const double> input) {
  return forward_trace(spec, params, input).output;
}

void accumulate_gradient(const MlpSpec& spec, const ParamVector& params, const ForwardTrace& trace,
                         std::span<const double> upstream, GradientSite site, double scale,
                         Gradient& grad) {
  if (upstream.size() != spec.output_dim) {
    throw ShapeError("mlp backward: upstream gradient has " + std::to_string(upstream.size()) +
                     " entries, output width is " + std::to_string(spec.output_dim));
  }
  check_same_layout(params.layout(), grad.layout(), "mlp backward");
  const auto layers = affine_layers(spec);
  if (trace.layers.size() != layers.size() + 1) throw ShapeError("mlp backward: trace mismatch");

  std::vector<double> delta(upstream.begin(), upstream.end());
  if (site == GradientSite::output && spec.head == Head::softmax) {
    const auto& p = trace.output;
    const double pu = dot(p, upstream);
    for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = p[k] * (upstream[k] - pu);
  }

  const auto w = params.values();
  auto g = grad.values();
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    const auto& x = trace.layers[k];
    for (std::size_t r = 0; r < l.out; ++r) {
      const double d = scale * delta[r];
      if (d == 0.0) continue;
      double* grow = g.data() + l.weight_offset + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) grow[c] += d * x[c];
      g[l.bias_offset + r] += d;
    }
    if (k == 0) break;
    std::vector<double> prev(l.in, 0.0);
    for (std::size_t r = 0; r < l.out; ++r) {
      if (delta[r] == 0.0) continue;
      const double* row = w.data() + l.weight_offset + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) prev[c] += row[c] * delta[r];
    }
    // relu'(z) = [z > 0]; the stored post-activation is positive exactly when z is.
    for (std::size_t c = 0; c < l.in; ++c) {
      if (!(x[c] > 0.0)) prev[c] = 0.0;
    }
    delta = std::move(prev);
  }
}

Gradient backward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
                  std::span<const double> upstream) {
  const auto trace = forward_trace(spec, params, input);
  Gradient grad(params.layout());
  accumulate_gradient(spec, params, trace, upstream, GradientSite::output, 1.0, grad);
  return grad;
}

void check_same_layout(const std::vector<BlockShape>& a, const std::vector<BlockShape>& b,
                       const char* where) {
  if (a != b) throw ShapeError(std::string(where) + ": parameter layouts differ");
}

ParamVector sgd_step(const ParamVector& params, const Gradient& grad, double lr) {
  check_same_layout(params.layout(), grad.layout(), "sgd_step");
  if (!(lr >= 0.0)) throw ContractViolation("sgd_step: learning rate must be >= 0");
  ParamVector out = params;
  auto v = out.values();
  const auto g = grad.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  if (!out.all_finite()) throw ContractViolation("sgd_step: update produced non-finite parameters");
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double global_norm(const Gradient& g) {
  double s = 0.0;
  for (double v : g.values()) s += v * v;
  return std::sqrt(s);
}

double clip_by_global_norm(Gradient& g, double max_norm) {
  const double n = global_norm(g);
  if (n > max_norm && n > 0.0) {
    const double f = max_norm / n;
    for (auto& v : g.values()) v *= f;
  }
  return n;
}

void add_scaled(Gradient& acc, const Gradient& g, double scale) {
  check_same_layout(acc.layout(), g.layout(), "add_scaled");
  auto a = acc.values();
  const auto b = g.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
}

std::uint64_t param_hash(const ParamVector& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : params.values()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace dmrl
