#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "taskdist/matrix.hpp"

namespace taskdist {

enum class Activation { Tanh, Relu, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// One dense layer; weights are (out x in), applied as y = x W^T + b.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    Activation activation = Activation::Tanh;
};

// Linear classifier head mapping features to logits.
struct Head {
    Matrix weights;  // classes x feature_dim
    std::vector<double> bias;
};

// Feed-forward classifier M = h o phi with an explicit feature extractor and
// one or more named heads.
struct Mlp {
    std::size_t input_dim = 0;
    std::size_t feature_dim = 0;
    std::vector<DenseLayer> feature_layers;
    std::map<std::string, Head> heads;
};

// Shape tree congruent with an Mlp's parameters.
struct LayerGrad {
    Matrix weights;
    std::vector<double> bias;
};

struct Gradients {
    std::vector<LayerGrad> feature_layers;
    std::map<std::string, LayerGrad> heads;
};

struct TrainHyper {
    double learning_rate = 0.01;
    double weight_decay = 0.0001;
    std::size_t batch_size = 128;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
};

// Scaled uniform init (bound 1/sqrt(fan_in)), biases zero, deterministic per
// seed. Empty hidden_dims gives phi = identity.
Mlp init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
             const std::map<std::string, std::size_t>& head_specs, std::uint64_t seed,
             Activation activation = Activation::Tanh);

struct ForwardResult {
    Matrix features;                     // n x feature_dim
    std::map<std::string, Matrix> probs; // per head, softmax rows
};

// head_filter == nullptr evaluates every head.
ForwardResult forward(const Mlp& m, const Matrix& x,
                      const std::vector<std::string>* head_filter = nullptr);

// Mean over rows of -sum_c target_c * log(max(prob_c, 1e-12)). Targets may be
// one-hot or soft probability rows.
double cross_entropy(const Matrix& probs, const Matrix& targets);

struct BackwardResult {
    double loss = 0.0;                        // weighted sum over heads
    std::map<std::string, double> head_loss;  // unweighted CE per head
    Gradients grads;
};

// Exact analytic gradient of sum_h coeff_h * CE(head_h(x), targets_h).
BackwardResult backward(const Mlp& m, const Matrix& x,
                        const std::map<std::string, const Matrix*>& targets,
                        const std::map<std::string, double>& coeffs);

// theta <- theta - lr * (g + wd * theta); decay applies to weights only.
void sgd_step(Mlp& m, const Gradients& grads, const TrainHyper& hyper);

Gradients zero_gradients(const Mlp& m);
void accumulate(Gradients& into, const Gradients& g, double scale = 1.0);

}  // namespace taskdist
