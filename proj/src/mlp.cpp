#include "caplab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "caplab/errors.hpp"
#include "caplab/random.hpp"

namespace caplab {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw ContractViolation("unknown activation '" + std::string(name) + "' (expected relu or identity)");
}

MlpModel::MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("model needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const DenseLayer& layer = layers_[k];
    if (layer.weight.rank() != 2 || layer.bias.rank() != 1 || layer.bias.size() != layer.weight.rows()) {
      throw ShapeError("layer " + std::to_string(k) + ": weight " + shape_string(layer.weight.shape()) +
                       " and bias " + shape_string(layer.bias.shape()) + " do not match");
    }
    if (layer.weight.rows() == 0 || layer.weight.cols() == 0) {
      throw ShapeError("layer " + std::to_string(k) + " has an empty dimension");
    }
    if (k > 0 && layers_[k - 1].out_dim() != layer.in_dim()) {
      throw ShapeError("layer " + std::to_string(k) + " expects " + std::to_string(layer.in_dim()) +
                       " inputs but layer " + std::to_string(k - 1) + " produces " +
                       std::to_string(layers_[k - 1].out_dim()));
    }
    if (!layer.weight.all_finite() || !layer.bias.all_finite()) {
      throw NumericError("layer " + std::to_string(k) + " has non-finite parameters");
    }
  }
  if (layers_.back().activation != Activation::identity) {
    throw ContractViolation("the output layer must use the identity activation");
  }
}

MlpModel MlpModel::random(std::span<const std::size_t> dims, Activation hidden, std::uint64_t seed) {
  if (dims.size() < 2) throw ContractViolation("model needs at least input and output widths");
  CounterRng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t in = dims[k];
    const std::size_t out = dims[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
    DenseLayer layer{Tensor({out, in}), Tensor({out}), k + 2 == dims.size() ? Activation::identity : hidden};
    for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias.values()) b = rng.uniform(-bound, bound);
    layers.push_back(std::move(layer));
  }
  return MlpModel(std::move(layers));
}

std::vector<std::size_t> MlpModel::dims() const {
  std::vector<std::size_t> d{input_dim()};
  for (const DenseLayer& layer : layers_) d.push_back(layer.out_dim());
  return d;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

double& MlpModel::parameter(std::size_t flat_index) {
  for (DenseLayer& layer : layers_) {
    if (flat_index < layer.weight.size()) return layer.weight[flat_index];
    flat_index -= layer.weight.size();
    if (flat_index < layer.bias.size()) return layer.bias[flat_index];
    flat_index -= layer.bias.size();
  }
  throw ContractViolation("parameter index out of range");
}

namespace {

void affine(const DenseLayer& layer, std::span<const double> in, std::span<double> out) {
  const std::size_t rows = layer.weight.rows();
  const std::size_t cols = layer.weight.cols();
  const double* w = layer.weight.values().data();
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = layer.bias[i];
    const double* wr = w + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * in[j];
    out[i] = acc;
  }
}

void activate(Activation a, std::span<double> v) {
  if (a == Activation::relu) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
  }
}

void check_input(const MlpModel& model, const Tensor& x) {
  if (x.rank() != 1 || x.size() != model.input_dim()) {
    throw ShapeError("layer 0 expects input of length " + std::to_string(model.input_dim()) + ", got shape " +
                     shape_string(x.shape()));
  }
  if (!x.all_finite()) throw NumericError("forward: input contains non-finite values");
}

Tensor run(const MlpModel& model, const Tensor& x, ForwardTrace* trace) {
  check_input(model, x);
  if (trace) {
    trace->layer_inputs.clear();
    trace->pre_activations.clear();
    trace->layer_inputs.reserve(model.layer_count());
    trace->pre_activations.reserve(model.layer_count());
  }
  Tensor current = x;
  for (const DenseLayer& layer : model.layers()) {
    Tensor pre({layer.out_dim()});
    affine(layer, current.values(), pre.values());
    Tensor post = pre;
    activate(layer.activation, post.values());
    if (trace) {
      trace->layer_inputs.push_back(std::move(current));
      trace->pre_activations.push_back(std::move(pre));
    }
    current = std::move(post);
  }
  return current;
}

}  // namespace

ForwardResult forward(const MlpModel& model, const Tensor& x) {
  ForwardResult result;
  result.logits = run(model, x, &result.trace);
  return result;
}

Tensor predict_logits(const MlpModel& model, const Tensor& x) { return run(model, x, nullptr); }

Tensor forward_batch(const MlpModel& model, const Tensor& inputs) {
  if (inputs.rank() != 2) throw ShapeError("forward_batch expects a [n x d] matrix");
  const std::size_t n = inputs.rows();
  const std::size_t c = model.output_dim();
  Tensor out({n, c});
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = inputs.row(r);
    const Tensor logits = predict_logits(model, Tensor::vector({row.begin(), row.end()}));
    std::copy(logits.values().begin(), logits.values().end(), out.row(r).begin());
  }
  return out;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Tensor softmax(const Tensor& logits) {
  if (logits.empty()) throw ContractViolation("softmax of an empty vector");
  if (!logits.all_finite()) throw NumericError("softmax: non-finite logits");
  const double m = *std::max_element(logits.values().begin(), logits.values().end());
  Tensor out(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    total += out[i];
  }
  for (double& v : out.values()) v /= total;
  return out;
}

double cross_entropy(const Tensor& probs, std::size_t label) {
  if (label >= probs.size()) {
    throw ContractViolation("label " + std::to_string(label) + " out of range for " + std::to_string(probs.size()) +
                            " classes");
  }
  return -std::log(std::max(probs[label], 1e-300));
}

double cross_entropy(const Tensor& probs, const Tensor& one_hot) {
  if (one_hot.size() != probs.size()) throw ContractViolation("label vector length does not match class count");
  std::size_t hot = one_hot.size();
  for (std::size_t i = 0; i < one_hot.size(); ++i) {
    if (one_hot[i] == 1.0 && hot == one_hot.size()) {
      hot = i;
    } else if (one_hot[i] != 0.0) {
      throw ContractViolation("label vector must have exactly one entry equal to 1");
    }
  }
  if (hot == one_hot.size()) throw ContractViolation("label vector must have exactly one entry equal to 1");
  return cross_entropy(probs, hot);
}

Tensor one_hot(std::size_t label, std::size_t classes) {
  if (label >= classes) throw ContractViolation("label out of range");
  Tensor y({classes});
  y[label] = 1.0;
  return y;
}

Tensor cross_entropy_logit_grad(const Tensor& probs, std::size_t label) {
  if (label >= probs.size()) throw ContractViolation("label out of range");
  Tensor g = probs;
  g[label] -= 1.0;
  return g;
}

Gradients zero_gradients(const MlpModel& model) {
  Gradients g;
  g.reserve(model.layer_count());
  for (const DenseLayer& layer : model.layers()) {
    g.push_back({Tensor(layer.weight.shape()), Tensor(layer.bias.shape())});
  }
  return g;
}

void add_scaled(Gradients& into, const Gradients& g, double factor) {
  if (into.size() != g.size()) throw ShapeError("gradient sets have different layer counts");
  for (std::size_t k = 0; k < g.size(); ++k) {
    auto w = into[k].weight.values();
    auto b = into[k].bias.values();
    const auto gw = g[k].weight.values();
    const auto gb = g[k].bias.values();
    if (w.size() != gw.size() || b.size() != gb.size()) throw ShapeError("gradient shapes differ");
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += factor * gw[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += factor * gb[i];
  }
}

void scale(Gradients& g, double factor) {
  for (LayerGradient& layer : g) {
    for (double& v : layer.weight.values()) v *= factor;
    for (double& v : layer.bias.values()) v *= factor;
  }
}

std::vector<double> flatten(const Gradients& g) {
  std::vector<double> flat;
  for (const LayerGradient& layer : g) {
    flat.insert(flat.end(), layer.weight.values().begin(), layer.weight.values().end());
    flat.insert(flat.end(), layer.bias.values().begin(), layer.bias.values().end());
  }
  return flat;
}

bool all_finite(const Gradients& g) {
  return std::all_of(g.begin(), g.end(),
                     [](const LayerGradient& l) { return l.weight.all_finite() && l.bias.all_finite(); });
}

void backward(const MlpModel& model, const ForwardTrace& trace, const Tensor& cotangent, Gradients* param_grads,
              Tensor* input_grad) {
  const std::size_t layers = model.layer_count();
  if (trace.layer_inputs.size() != layers || trace.pre_activations.size() != layers) {
    throw ShapeError("trace has " + std::to_string(trace.layer_inputs.size()) + " layers, model has " +
                     std::to_string(layers));
  }
  if (cotangent.size() != model.output_dim()) {
    throw ShapeError("cotangent length " + std::to_string(cotangent.size()) + " does not match " +
                     std::to_string(model.output_dim()) + " outputs");
  }
  if (param_grads && param_grads->size() != layers) throw ShapeError("gradient set does not match model");

  std::vector<double> delta(cotangent.values().begin(), cotangent.values().end());
  std::vector<double> next;
  for (std::size_t k = layers; k-- > 0;) {
    const DenseLayer& layer = model.layer(k);
    const Tensor& in = trace.layer_inputs[k];
    const Tensor& pre = trace.pre_activations[k];
    const std::size_t rows = layer.out_dim();
    const std::size_t cols = layer.in_dim();
    if (in.size() != cols || pre.size() != rows) {
      throw ShapeError("trace does not match layer " + std::to_string(k));
    }

    // relu'(0) := 0
    if (layer.activation == Activation::relu) {
      for (std::size_t i = 0; i < rows; ++i) {
        if (!(pre[i] > 0.0)) delta[i] = 0.0;
      }
    }

    if (param_grads) {
      LayerGradient& g = (*param_grads)[k];
      for (std::size_t i = 0; i < rows; ++i) {
        const double di = delta[i];
        double* gw = g.weight.values().data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) gw[j] += di * in[j];
        g.bias[i] += di;
      }
    }

    if (k > 0 || input_grad) {
      next.assign(cols, 0.0);
      const double* w = layer.weight.values().data();
      for (std::size_t i = 0; i < rows; ++i) {
        const double di = delta[i];
        const double* wr = w + i * cols;
        for (std::size_t j = 0; j < cols; ++j) next[j] += wr[j] * di;
      }
      delta.swap(next);
    }
  }
  if (input_grad) *input_grad = Tensor::vector(std::move(delta));
}

Gradients grad_params(const MlpModel& model, const ForwardTrace& trace, const Tensor& cotangent) {
  Gradients g = zero_gradients(model);
  backward(model, trace, cotangent, &g, nullptr);
  return g;
}

Tensor grad_input(const MlpModel& model, const ForwardTrace& trace, const Tensor& cotangent) {
  Tensor g;
  backward(model, trace, cotangent, nullptr, &g);
  return g;
}

}  // namespace caplab
