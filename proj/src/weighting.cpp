#include "taskdist/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace taskdist {

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::Power: return "power";
        case Scheme::Softmax: return "softmax";
        case Scheme::Nearest: return "nearest";
        case Scheme::Equal: return "equal";
        case Scheme::Inverse: return "inverse";
        case Scheme::RandomSimplex: return "random-simplex";
        case Scheme::RandomSelection: return "random-selection";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "power" || s == "weighted") return Scheme::Power;
    if (s == "softmax") return Scheme::Softmax;
    if (s == "nearest") return Scheme::Nearest;
    if (s == "equal") return Scheme::Equal;
    if (s == "inverse") return Scheme::Inverse;
    if (s == "random-simplex" || s == "random-weights") return Scheme::RandomSimplex;
    if (s == "random-selection") return Scheme::RandomSelection;
    throw std::invalid_argument("unknown weighting scheme: " + s);
}

void SourceWeights::validate() const {
    if (alphas.empty()) throw std::invalid_argument("SourceWeights: empty");
    double sum = 0.0;
    for (double a : alphas) {
        if (!(a >= 0.0)) throw std::invalid_argument("SourceWeights: negative or NaN weight");
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("SourceWeights: weights do not sum to 1");
}

std::vector<double> normalize_scores(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("normalize_scores: empty score list");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("normalize_scores: non-finite score");
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<double> out(scores.size());
    if (hi - lo < 1e-15) {
        // Equal evidence yields equal (full) normalized scores.
        std::fill(out.begin(), out.end(), 1.0);
        return out;
    }
    for (std::size_t i = 0; i < scores.size(); ++i)
        out[i] = std::max(0.0, (scores[i] - lo) / (hi - lo));
    return out;
}

std::vector<double> normalize_scores(const std::vector<SimilarityScore>& scores) {
    std::vector<double> raw(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) raw[i] = scores[i].value;
    return normalize_scores(raw);
}

SourceWeights power_weights(const std::vector<double>& normalized, double p) {
    if (normalized.empty()) throw std::invalid_argument("power_weights: empty input");
    if (p < 0.0) throw std::invalid_argument("power_weights: p must be >= 0");
    SourceWeights w;
    w.scheme = Scheme::Power;
    w.param = p;
    const std::size_t s = normalized.size();
    if (p == 0.0) {
        w.alphas.assign(s, 1.0 / static_cast<double>(s));
        return w;
    }
    w.alphas.resize(s);
    double sum = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
        if (normalized[i] < 0.0 || normalized[i] > 1.0)
            throw std::invalid_argument("power_weights: scores must be min-max normalized");
        w.alphas[i] = std::pow(normalized[i], p);
        sum += w.alphas[i];
    }
    if (sum == 0.0) throw std::invalid_argument("power_weights: no positive similarity");
    for (double& a : w.alphas) a /= sum;
    return w;
}

SourceWeights softmax_weights(const std::vector<double>& scores, double temperature) {
    if (scores.empty()) throw std::invalid_argument("softmax_weights: empty input");
    if (!(temperature > 0.0)) throw std::invalid_argument("softmax_weights: T must be > 0");
    SourceWeights w;
    w.scheme = Scheme::Softmax;
    w.param = temperature;
    const double hi = *std::max_element(scores.begin(), scores.end());
    w.alphas.resize(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        w.alphas[i] = std::exp((scores[i] - hi) / temperature);
        sum += w.alphas[i];
    }
    for (double& a : w.alphas) a /= sum;
    return w;
}

SourceWeights nearest_weights(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("nearest_weights: empty input");
    SourceWeights w;
    w.scheme = Scheme::Nearest;
    w.alphas.assign(scores.size(), 0.0);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    w.alphas[best] = 1.0;
    return w;
}

SourceWeights baseline_weights(Scheme scheme, const std::vector<double>& normalized,
                               std::uint64_t seed) {
    if (normalized.empty()) throw std::invalid_argument("baseline_weights: empty input");
    const std::size_t s = normalized.size();
    SourceWeights w;
    w.scheme = scheme;
    w.seed = seed;
    switch (scheme) {
        case Scheme::Equal:
            w.alphas.assign(s, 1.0 / static_cast<double>(s));
            break;
        case Scheme::Inverse: {
            w.alphas.resize(s);
            double sum = 0.0;
            for (std::size_t i = 0; i < s; ++i) {
                w.alphas[i] = 1.0 - normalized[i];
                sum += w.alphas[i];
            }
            if (sum == 0.0) throw std::invalid_argument("inverse weights undefined");
            for (double& a : w.alphas) a /= sum;
            break;
        }
        case Scheme::RandomSimplex: {
            // Uniform Dirichlet(1,...,1) via normalized exponentials.
            std::mt19937_64 rng(seed);
            std::exponential_distribution<double> exp1(1.0);
            w.alphas.resize(s);
            double sum = 0.0;
            for (double& a : w.alphas) {
                a = exp1(rng);
                sum += a;
            }
            for (double& a : w.alphas) a /= sum;
            break;
        }
        case Scheme::RandomSelection: {
            std::mt19937_64 rng(seed);
            std::uniform_int_distribution<std::size_t> pick(0, s - 1);
            w.alphas.assign(s, 0.0);
            w.alphas[pick(rng)] = 1.0;
            break;
        }
        default:
            throw std::invalid_argument("baseline_weights: scheme is not a baseline scheme");
    }
    return w;
}

std::vector<std::size_t> topk_indices(const std::vector<double>& scores, std::size_t k) {
    if (k == 0 || k > scores.size())
        throw std::invalid_argument("topk_indices: k out of range");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace taskdist
