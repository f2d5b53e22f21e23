#include "taskdist/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace taskdist {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}

namespace {

double apply_act(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Identity: return z;
    }
    return z;
}

// Derivative expressed through the activation output.
double act_deriv(Activation a, double out) {
    switch (a) {
        case Activation::Tanh: return 1.0 - out * out;
        case Activation::Relu: return out > 0.0 ? 1.0 : 0.0;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

// y = x W^T + b, row-wise.
Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
    Matrix y = matmul_nt(x, w);
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += b[j];
    return y;
}

void softmax_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        const double hi = *std::max_element(r.begin(), r.end());
        double sum = 0.0;
        for (double& v : r) {
            v = std::exp(v - hi);
            sum += v;
        }
        for (double& v : r) v /= sum;
    }
}

}  // namespace

Mlp init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
             const std::map<std::string, std::size_t>& head_specs, std::uint64_t seed,
             Activation activation) {
    if (input_dim == 0) throw std::invalid_argument("init_mlp: input_dim must be positive");
    for (std::size_t h : hidden_dims)
        if (h == 0) throw std::invalid_argument("init_mlp: hidden dims must be positive");
    if (head_specs.empty()) throw std::invalid_argument("init_mlp: need at least one head");
    for (const auto& [name, classes] : head_specs)
        if (classes == 0) throw std::invalid_argument("init_mlp: head '" + name + "' has 0 classes");

    std::mt19937_64 rng(seed);
    auto init_matrix = [&rng](std::size_t out, std::size_t in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix w(out, in);
        for (double& v : w.values()) v = dist(rng);
        return w;
    };

    Mlp m;
    m.input_dim = input_dim;
    std::size_t prev = input_dim;
    for (std::size_t h : hidden_dims) {
        DenseLayer layer;
        layer.weights = init_matrix(h, prev);
        layer.bias.assign(h, 0.0);
        layer.activation = activation;
        m.feature_layers.push_back(std::move(layer));
        prev = h;
    }
    m.feature_dim = prev;
    for (const auto& [name, classes] : head_specs) {
        Head head;
        head.weights = init_matrix(classes, prev);
        head.bias.assign(classes, 0.0);
        m.heads.emplace(name, std::move(head));
    }
    return m;
}

ForwardResult forward(const Mlp& m, const Matrix& x, const std::vector<std::string>* head_filter) {
    if (x.cols() != m.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch");
    ForwardResult out;
    Matrix a = x;
    for (const DenseLayer& layer : m.feature_layers) {
        a = affine(a, layer.weights, layer.bias);
        for (double& v : a.values()) v = apply_act(layer.activation, v);
    }
    out.features = std::move(a);
    for (const auto& [name, head] : m.heads) {
        if (head_filter &&
            std::find(head_filter->begin(), head_filter->end(), name) == head_filter->end())
            continue;
        Matrix logits = affine(out.features, head.weights, head.bias);
        softmax_rows(logits);
        out.probs.emplace(name, std::move(logits));
    }
    return out;
}

double cross_entropy(const Matrix& probs, const Matrix& targets) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
        throw std::invalid_argument("cross_entropy: shape mismatch");
    if (probs.rows() == 0) throw std::invalid_argument("cross_entropy: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i)
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            const double t = targets(i, j);
            if (t != 0.0) total -= t * std::log(std::max(probs(i, j), 1e-12));
        }
    return total / static_cast<double>(probs.rows());
}

Gradients zero_gradients(const Mlp& m) {
    Gradients g;
    for (const DenseLayer& layer : m.feature_layers) {
        LayerGrad lg;
        lg.weights = Matrix(layer.weights.rows(), layer.weights.cols());
        lg.bias.assign(layer.bias.size(), 0.0);
        g.feature_layers.push_back(std::move(lg));
    }
    for (const auto& [name, head] : m.heads) {
        LayerGrad lg;
        lg.weights = Matrix(head.weights.rows(), head.weights.cols());
        lg.bias.assign(head.bias.size(), 0.0);
        g.heads.emplace(name, std::move(lg));
    }
    return g;
}

void accumulate(Gradients& into, const Gradients& g, double scale) {
    if (into.feature_layers.size() != g.feature_layers.size())
        throw std::invalid_argument("accumulate: gradient shape mismatch");
    for (std::size_t l = 0; l < g.feature_layers.size(); ++l) {
        auto& dst = into.feature_layers[l];
        const auto& src = g.feature_layers[l];
        for (std::size_t i = 0; i < src.weights.values().size(); ++i)
            dst.weights.values()[i] += scale * src.weights.values()[i];
        for (std::size_t i = 0; i < src.bias.size(); ++i) dst.bias[i] += scale * src.bias[i];
    }
    for (const auto& [name, src] : g.heads) {
        auto it = into.heads.find(name);
        if (it == into.heads.end())
            throw std::invalid_argument("accumulate: unknown head '" + name + "'");
        for (std::size_t i = 0; i < src.weights.values().size(); ++i)
            it->second.weights.values()[i] += scale * src.weights.values()[i];
        for (std::size_t i = 0; i < src.bias.size(); ++i)
            it->second.bias[i] += scale * src.bias[i];
    }
}

BackwardResult backward(const Mlp& m, const Matrix& x,
                        const std::map<std::string, const Matrix*>& targets,
                        const std::map<std::string, double>& coeffs) {
    if (targets.empty()) throw std::invalid_argument("backward: no active heads");
    if (x.cols() != m.input_dim)
        throw std::invalid_argument("backward: input dimension mismatch");
    for (const auto& [name, t] : targets) {
        if (!m.heads.contains(name))
            throw std::invalid_argument("backward: model has no head '" + name + "'");
        if (!coeffs.contains(name))
            throw std::invalid_argument("backward: no coefficient for head '" + name + "'");
        if (t->rows() != x.rows())
            throw std::invalid_argument("backward: target row mismatch for head '" + name + "'");
    }
    const std::size_t n = x.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    // Forward pass keeping every layer activation.
    std::vector<Matrix> acts;  // acts[0] = x, acts[l+1] = output of layer l
    acts.reserve(m.feature_layers.size() + 1);
    acts.push_back(x);
    for (const DenseLayer& layer : m.feature_layers) {
        Matrix a = affine(acts.back(), layer.weights, layer.bias);
        for (double& v : a.values()) v = apply_act(layer.activation, v);
        acts.push_back(std::move(a));
    }
    const Matrix& features = acts.back();

    BackwardResult out;
    out.grads = zero_gradients(m);
    Matrix dfeat(n, m.feature_dim);

    for (const auto& [name, target] : targets) {
        const Head& head = m.heads.at(name);
        const double coeff = coeffs.at(name);
        Matrix probs = affine(features, head.weights, head.bias);
        softmax_rows(probs);
        const double ce = cross_entropy(probs, *target);
        out.head_loss[name] = ce;
        out.loss += coeff * ce;
        if (coeff == 0.0) continue;

        // dL/dlogits = coeff/n * (P - T)
        Matrix dlogits(n, probs.cols());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < probs.cols(); ++j)
                dlogits(i, j) = coeff * inv_n * (probs(i, j) - (*target)(i, j));

        LayerGrad& hg = out.grads.heads.at(name);
        const Matrix dw = matmul_tn(dlogits, features);
        for (std::size_t i = 0; i < dw.values().size(); ++i) hg.weights.values()[i] += dw.values()[i];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < probs.cols(); ++j) hg.bias[j] += dlogits(i, j);

        const Matrix df = matmul(dlogits, head.weights);
        for (std::size_t i = 0; i < df.values().size(); ++i) dfeat.values()[i] += df.values()[i];
    }

    // Backpropagate through the feature layers.
    Matrix da = std::move(dfeat);
    for (std::size_t li = m.feature_layers.size(); li-- > 0;) {
        const DenseLayer& layer = m.feature_layers[li];
        const Matrix& a_out = acts[li + 1];
        const Matrix& a_in = acts[li];
        Matrix dz(da.rows(), da.cols());
        for (std::size_t i = 0; i < da.values().size(); ++i)
            dz.values()[i] = da.values()[i] * act_deriv(layer.activation, a_out.values()[i]);

        LayerGrad& lg = out.grads.feature_layers[li];
        const Matrix dw = matmul_tn(dz, a_in);
        for (std::size_t i = 0; i < dw.values().size(); ++i) lg.weights.values()[i] += dw.values()[i];
        for (std::size_t i = 0; i < dz.rows(); ++i)
            for (std::size_t j = 0; j < dz.cols(); ++j) lg.bias[j] += dz(i, j);

        if (li > 0) da = matmul(dz, layer.weights);
    }
    return out;
}

void sgd_step(Mlp& m, const Gradients& grads, const TrainHyper& hyper) {
    if (grads.feature_layers.size() != m.feature_layers.size())
        throw std::invalid_argument("sgd_step: gradient shape mismatch");
    const double lr = hyper.learning_rate, wd = hyper.weight_decay;
    for (std::size_t l = 0; l < m.feature_layers.size(); ++l) {
        auto& layer = m.feature_layers[l];
        const auto& g = grads.feature_layers[l];
        if (g.weights.rows() != layer.weights.rows() || g.weights.cols() != layer.weights.cols())
            throw std::invalid_argument("sgd_step: layer gradient shape mismatch");
        for (std::size_t i = 0; i < layer.weights.values().size(); ++i) {
            double& w = layer.weights.values()[i];
            w -= lr * (g.weights.values()[i] + wd * w);
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= lr * g.bias[i];
    }
    for (auto& [name, head] : m.heads) {
        auto it = grads.heads.find(name);
        if (it == grads.heads.end())
            throw std::invalid_argument("sgd_step: missing gradient for head '" + name + "'");
        const auto& g = it->second;
        for (std::size_t i = 0; i < head.weights.values().size(); ++i) {
            double& w = head.weights.values()[i];
            w -= lr * (g.weights.values()[i] + wd * w);
        }
        for (std::size_t i = 0; i < head.bias.size(); ++i) head.bias[i] -= lr * g.bias[i];
    }
}

}  // namespace taskdist
