#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taskdist/similarity.hpp"

namespace taskdist {

enum class Scheme {
    Power,
    Softmax,
    Nearest,
    Equal,
    Inverse,
    RandomSimplex,
    RandomSelection,
};

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

// Simplex vector over source models plus provenance.
struct SourceWeights {
    std::vector<double> alphas;
    Scheme scheme = Scheme::Equal;
    double param = 0.0;      // p for Power, T for Softmax
    std::uint64_t seed = 0;  // for the random schemes

    void validate() const;  // nonnegative, sums to 1 within 1e-9
};

// Min-max normalize to [0,1], then clip at 0 (a no-op after min-max).
// All-equal score vectors map to all-ones.
std::vector<double> normalize_scores(const std::vector<double>& scores);
std::vector<double> normalize_scores(const std::vector<SimilarityScore>& scores);

// alpha_i = e_i^p / sum e_s^p; p == 0 gives equal weights.
SourceWeights power_weights(const std::vector<double>& normalized, double p);

// alpha_i = exp(e_i/T) / sum exp(e_s/T), computed with max-subtraction.
SourceWeights softmax_weights(const std::vector<double>& scores, double temperature);

// One-hot at the argmax; ties broken by lowest index.
SourceWeights nearest_weights(const std::vector<double>& scores);

// Equal, Inverse (renormalized 1 - e), RandomSimplex (uniform Dirichlet),
// RandomSelection (uniform one-hot).
SourceWeights baseline_weights(Scheme scheme, const std::vector<double>& normalized,
                               std::uint64_t seed);

// Indices of the k highest scores (optional pre-selection before weighting).
std::vector<std::size_t> topk_indices(const std::vector<double>& scores, std::size_t k);

}  // namespace taskdist
