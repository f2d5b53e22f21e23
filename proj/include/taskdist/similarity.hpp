#pragma once

#include <string>
#include <vector>

#include "taskdist/matrix.hpp"

namespace taskdist {

enum class RepKind { Feature, PseudoLabel };
enum class MetricKind { Parc, Rsa, Cka };

std::string to_string(RepKind k);
std::string to_string(MetricKind m);
RepKind rep_kind_from_string(const std::string& s);
MetricKind metric_kind_from_string(const std::string& s);

// Small labeled probe set used to score source models against the target task.
struct ProbeSet {
    Matrix inputs;         // n x input_dim
    Matrix labels_onehot;  // n x C_target, exactly one 1 per row

    std::size_t size() const { return inputs.rows(); }
    std::size_t num_classes() const { return labels_onehot.cols(); }
    bool single_class() const;
    void validate() const;
};

struct SourceRepresentation {
    RepKind kind = RepKind::Feature;
    Matrix values;  // n x d_s (features) or n x C_s (pseudo-labels)
};

struct SimilarityScore {
    std::string source_id;
    MetricKind metric = MetricKind::Parc;
    RepKind representation = RepKind::Feature;
    double value = 0.0;
    bool degenerate = false;
    std::string error;  // non-empty when per-source inference failed
};

// Spearman correlation between the lower triangles of the two Pearson
// distance matrices (representation rows vs one-hot label rows).
SimilarityScore parc(const SourceRepresentation& rep, const ProbeSet& probe);

// Same as parc but with both matrices z-normalized per column first.
SimilarityScore rsa(const SourceRepresentation& rep, const ProbeSet& probe);

// Linear-kernel CKA on column-centered matrices:
// ||Y^T X||_F^2 / (||X^T X||_F ||Y^T Y||_F). Equals the HSIC ratio exactly.
SimilarityScore cka_linear(const SourceRepresentation& rep, const ProbeSet& probe);

SimilarityScore compute_metric(MetricKind metric, const SourceRepresentation& rep,
                               const ProbeSet& probe);

// Frozen source model queried only for inference.
class SourceModel {
public:
    virtual ~SourceModel() = default;
    virtual std::string id() const = 0;
    virtual Matrix features(const Matrix& inputs) const = 0;
    virtual Matrix pseudo_labels(const Matrix& inputs) const = 0;
};

// One score per source, order preserved. A source whose inference throws is
// reported via the score's error field; the remaining sources are still scored.
std::vector<SimilarityScore> score_all_sources(const std::vector<const SourceModel*>& sources,
                                               const ProbeSet& probe, MetricKind metric,
                                               RepKind representation);

// Per-column z-normalization (mean 0, variance 1). Constant columns are
// dropped; *dropped_columns reports how many.
Matrix z_normalize_columns(const Matrix& m, std::size_t* dropped_columns = nullptr);

}  // namespace taskdist
