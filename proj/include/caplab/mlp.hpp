#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "caplab/tensor.hpp"

namespace caplab {

enum class Activation { relu, identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct DenseLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Fully connected network f: R^d -> R^c. The last layer is always affine
// (identity activation) so outputs are pre-softmax logits.
class MlpModel {
 public:
  explicit MlpModel(std::vector<DenseLayer> layers);

  // Layer widths {d, h1, ..., c}; hidden layers use `hidden`, the output layer
  // is identity. Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static MlpModel random(std::span<const std::size_t> dims, Activation hidden, std::uint64_t seed);

  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.back().out_dim(); }
  std::size_t layer_count() const { return layers_.size(); }
  std::vector<std::size_t> dims() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  const DenseLayer& layer(std::size_t k) const { return layers_[k]; }

  // Mutable access for optimizers; shapes must not be changed.
  DenseLayer& mutable_layer(std::size_t k) { return layers_[k]; }

  // Flat view over all parameters: layer by layer, weights (row-major) then bias.
  std::size_t parameter_count() const;
  double& parameter(std::size_t flat_index);

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

// Values kept from a forward pass: the input fed to each layer and each
// layer's pre-activation. Enough to run either backward mode without
// re-evaluating the network.
struct ForwardTrace {
  std::vector<Tensor> layer_inputs;
  std::vector<Tensor> pre_activations;
};

struct ForwardResult {
  Tensor logits;
  ForwardTrace trace;
};

ForwardResult forward(const MlpModel& model, const Tensor& x);

// Logits only; same arithmetic as forward().
Tensor predict_logits(const MlpModel& model, const Tensor& x);

// Row-wise application of predict_logits: [n x d] -> [n x c].
Tensor forward_batch(const MlpModel& model, const Tensor& inputs);

// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);

Tensor softmax(const Tensor& logits);

double cross_entropy(const Tensor& probs, std::size_t label);
// `one_hot` must contain a single 1 and zeros elsewhere.
double cross_entropy(const Tensor& probs, const Tensor& one_hot);
Tensor one_hot(std::size_t label, std::size_t classes);

// Gradient of CE(softmax(logits), label) with respect to the logits.
Tensor cross_entropy_logit_grad(const Tensor& probs, std::size_t label);

struct LayerGradient {
  Tensor weight;
  Tensor bias;
};
using Gradients = std::vector<LayerGradient>;

Gradients zero_gradients(const MlpModel& model);
void add_scaled(Gradients& into, const Gradients& g, double scale);
void scale(Gradients& g, double factor);
std::vector<double> flatten(const Gradients& g);
bool all_finite(const Gradients& g);

// Gradients of <cotangent, logits> with respect to every weight and bias.
Gradients grad_params(const MlpModel& model, const ForwardTrace& trace, const Tensor& cotangent);

// Gradient of <cotangent, logits> with respect to the network input.
Tensor grad_input(const MlpModel& model, const ForwardTrace& trace, const Tensor& cotangent);

// One reverse sweep that adds parameter gradients into `param_grads` (if not
// null) and writes the input gradient into `input_grad` (if not null).
void backward(const MlpModel& model, const ForwardTrace& trace, const Tensor& cotangent, Gradients* param_grads,
              Tensor* input_grad);

}  // namespace caplab
