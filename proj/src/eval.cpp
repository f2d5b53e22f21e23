#include "taskdist/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "taskdist/rankstats.hpp"

namespace taskdist {

std::vector<std::size_t> predict_classes(const Mlp& model, const Matrix& inputs) {
    const std::vector<std::string> only_target{"target"};
    const ForwardResult fr = forward(model, inputs, &only_target);
    const Matrix& probs = fr.probs.at("target");
    std::vector<std::size_t> out(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c)
            if (probs(i, c) > probs(i, best)) best = c;
        out[i] = best;
    }
    return out;
}

double test_accuracy(const Mlp& model, const LabeledSet& test) {
    if (test.size() == 0) throw std::invalid_argument("test_accuracy: empty test set");
    const auto pred = predict_classes(model, test.inputs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (test.labels_onehot(i, pred[i]) == 1.0) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

CorrelationReport correlation_report(const std::map<std::string, std::vector<double>>& scores_by_metric,
                                     const std::vector<double>& accuracies) {
    CorrelationReport report;
    for (const auto& [key, scores] : scores_by_metric) {
        if (scores.size() != accuracies.size())
            throw std::invalid_argument("correlation_report: length mismatch for '" + key + "'");
        CorrelationCell cell;
        if (scores.size() < 3) {
            cell.degenerate = true;
        } else {
            bool deg = false;
            cell.spearman = spearman(scores, accuracies, &deg);
            cell.pearson = pearson(scores, accuracies, &deg);
            cell.kendall = kendall_tau(scores, accuracies, &deg);
            cell.degenerate = deg;
        }
        report.cells.emplace(key, cell);
    }
    return report;
}

RankingEval make_ranking_eval(const std::vector<double>& scores,
                              const std::vector<double>& accuracies) {
    if (scores.size() != accuracies.size())
        throw std::invalid_argument("make_ranking_eval: length mismatch");
    RankingEval eval;
    eval.accuracy_by_source = accuracies;
    eval.similarity_ranking.resize(scores.size());
    std::iota(eval.similarity_ranking.begin(), eval.similarity_ranking.end(), std::size_t{0});
    std::stable_sort(eval.similarity_ranking.begin(), eval.similarity_ranking.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    eval.k_values.resize(scores.size());
    std::iota(eval.k_values.begin(), eval.k_values.end(), std::size_t{1});
    return eval;
}

double topk_relative_accuracy(const RankingEval& eval, std::size_t k) {
    const std::size_t s = eval.accuracy_by_source.size();
    if (k < 1 || k > s) throw std::invalid_argument("topk_relative_accuracy: k out of range");
    double selected = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        selected += eval.accuracy_by_source[eval.similarity_ranking[i]];

    // Best-k set by accuracy, ties to the lowest index.
    std::vector<std::size_t> by_acc(s);
    std::iota(by_acc.begin(), by_acc.end(), std::size_t{0});
    std::stable_sort(by_acc.begin(), by_acc.end(), [&](std::size_t a, std::size_t b) {
        return eval.accuracy_by_source[a] > eval.accuracy_by_source[b];
    });
    double best = 0.0;
    for (std::size_t i = 0; i < k; ++i) best += eval.accuracy_by_source[by_acc[i]];
    if (best == 0.0) throw std::invalid_argument("topk_relative_accuracy: zero best accuracy");
    return selected / best;
}

double mean_relative_accuracy(const RankingEval& eval) {
    const std::size_t s = eval.accuracy_by_source.size();
    if (s < 2) throw std::invalid_argument("mean_relative_accuracy: need at least 2 sources");
    double sum = 0.0;
    for (std::size_t k = 1; k <= s; ++k) sum += topk_relative_accuracy(eval, k);
    return sum / static_cast<double>(s);
}

double mean_relative_accuracy_excl_full(const RankingEval& eval) {
    const std::size_t s = eval.accuracy_by_source.size();
    if (s < 2) throw std::invalid_argument("mean_relative_accuracy: need at least 2 sources");
    double sum = 0.0;
    for (std::size_t k = 1; k < s; ++k) sum += topk_relative_accuracy(eval, k);
    return sum / static_cast<double>(s - 1);
}

std::vector<SchemeRow> scheme_comparison(const std::map<std::string, std::vector<double>>& results) {
    std::size_t len = 0;
    bool first = true;
    std::vector<SchemeRow> rows;
    for (const auto& [scheme, accs] : results) {
        if (first) {
            len = accs.size();
            first = false;
        } else if (accs.size() != len) {
            throw std::invalid_argument("scheme_comparison: ragged accuracy lists");
        }
        if (accs.empty()) throw std::invalid_argument("scheme_comparison: empty accuracy list");
        SchemeRow row;
        row.scheme = scheme;
        row.per_task = accs;
        row.mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
        rows.push_back(std::move(row));
    }
    return rows;  // std::map iteration keeps scheme-name order deterministic
}

void write_scheme_comparison_csv(const std::string& path, const std::vector<SchemeRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_scheme_comparison_csv: cannot open " + path);
    std::size_t ntask = rows.empty() ? 0 : rows.front().per_task.size();
    out << "scheme,mean";
    for (std::size_t t = 0; t < ntask; ++t) out << ",run" << t;
    out << '\n';
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const SchemeRow& r : rows) {
        out << r.scheme << ',' << fmt(r.mean);
        for (double v : r.per_task) out << ',' << fmt(v);
        out << '\n';
    }
}

}  // namespace taskdist
