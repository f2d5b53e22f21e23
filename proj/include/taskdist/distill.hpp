#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "taskdist/data.hpp"
#include "taskdist/model.hpp"
#include "taskdist/weighting.hpp"

namespace taskdist {

// Per-source output probabilities over the unlabeled set, computed once
// before training and immutable thereafter. Reads are counted so tests can
// verify zero-weight sources are never consulted.
struct PseudoLabelCache {
    std::map<std::string, Matrix> by_source;
    mutable std::map<std::string, std::size_t> reads;

    const Matrix& at(const std::string& source_id) const;
    bool contains(const std::string& source_id) const { return by_source.contains(source_id); }
};

PseudoLabelCache cache_pseudo_labels(const std::vector<const SourceModel*>& sources,
                                     const Matrix& unlabeled);

struct DistillConfig {
    double lambda = 0.8;
    SourceWeights weights;
    std::vector<std::string> source_ids;  // aligned with weights.alphas
    TrainHyper hyper;
    std::pair<std::size_t, std::size_t> batch_ratio{1, 1};  // labeled : unlabeled
    std::vector<std::size_t> hidden_dims{32};
    Activation activation = Activation::Tanh;
};

inline std::string aux_head_name(const std::string& source_id) { return "aux_" + source_id; }

struct StepLoss {
    double total = 0.0;
    double labeled = 0.0;                 // unweighted supervised CE
    std::vector<double> distill;          // unweighted CE per source (cfg order)
};

// loss = lambda * CE(target head on labeled) +
//        (1-lambda) * sum_s alpha_s * CE(aux head s on unlabeled vs cache).
// Sources with zero effective weight are not evaluated and need no head.
std::pair<StepLoss, Gradients> multi_distill_loss(const Mlp& target, const Matrix& labeled_x,
                                                  const Matrix& labeled_y, const Matrix& unlabeled_x,
                                                  const std::map<std::string, Matrix>& pseudo_batch,
                                                  const DistillConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;
    double loss_total = 0.0;
    double loss_labeled = 0.0;
    std::vector<double> loss_distill;  // per source, cfg order
    double test_accuracy = -1.0;       // -1 when no test set supplied
};

struct TrainResult {
    Mlp model;
    std::vector<EpochRecord> history;
};

// Trains the target model against a prebuilt cache; strips aux heads on
// completion so the returned model carries only the "target" head.
TrainResult train_target(const DataSplit& split, const PseudoLabelCache& cache,
                         const DistillConfig& cfg);

// Convenience overload that builds the cache with one forward pass per source.
TrainResult train_target(const DataSplit& split, const std::vector<const SourceModel*>& sources,
                         const DistillConfig& cfg);

// Supervised-only baseline (lambda = 1); never reads the unlabeled set.
TrainResult train_baseline_supervised(const DataSplit& split, DistillConfig cfg);

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history,
                       const std::vector<std::string>& source_ids);

}  // namespace taskdist
