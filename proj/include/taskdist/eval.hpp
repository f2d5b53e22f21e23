#pragma once

#include <map>
#include <string>
#include <vector>

#include "taskdist/data.hpp"
#include "taskdist/model.hpp"

namespace taskdist {

// Fraction of argmax-correct predictions; argmax ties break to the lowest
// class index. Uses the model's "target" head.
double test_accuracy(const Mlp& model, const LabeledSet& test);

std::vector<std::size_t> predict_classes(const Mlp& model, const Matrix& inputs);

struct CorrelationCell {
    double spearman = 0.0;
    double pearson = 0.0;
    double kendall = 0.0;
    bool degenerate = false;
};

// One cell per (metric, representation) key, e.g. "parc/feature".
struct CorrelationReport {
    std::map<std::string, CorrelationCell> cells;
};

CorrelationReport correlation_report(const std::map<std::string, std::vector<double>>& scores_by_metric,
                                     const std::vector<double>& accuracies);

// Source ranking induced by similarity scores (descending, ties by index)
// next to the observed accuracies.
struct RankingEval {
    std::vector<std::size_t> similarity_ranking;  // permutation of source indices
    std::vector<double> accuracy_by_source;
    std::vector<std::size_t> k_values;
};

RankingEval make_ranking_eval(const std::vector<double>& scores,
                              const std::vector<double>& accuracies);

// mean(acc of top-k by similarity) / mean(acc of the k best sources).
double topk_relative_accuracy(const RankingEval& eval, std::size_t k);

// Average of topk_relative_accuracy over k = 1..S (k = S is identically 1).
double mean_relative_accuracy(const RankingEval& eval);
// Variant averaging over k = 1..S-1 only; emitted alongside the full range.
double mean_relative_accuracy_excl_full(const RankingEval& eval);

struct SchemeRow {
    std::string scheme;
    double mean = 0.0;
    std::vector<double> per_task;
};

// Per-scheme mean accuracy plus the per-task/per-seed breakdown, ordered by
// scheme name.
std::vector<SchemeRow> scheme_comparison(const std::map<std::string, std::vector<double>>& results);

void write_scheme_comparison_csv(const std::string& path, const std::vector<SchemeRow>& rows);

}  // namespace taskdist
