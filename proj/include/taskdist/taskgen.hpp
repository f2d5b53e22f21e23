#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "taskdist/data.hpp"
#include "taskdist/model.hpp"

namespace taskdist {

// Gaussian-mixture universe: every task is a labeled view of a subset of its
// clusters. Cluster-subset overlap is the ground-truth notion of relatedness.
struct Universe {
    Matrix centroids;  // num_clusters x dim
    double sigma = 0.0;
    std::uint64_t seed = 0;

    std::size_t num_clusters() const { return centroids.rows(); }
    std::size_t dim() const { return centroids.cols(); }
};

struct TaskSpec {
    std::vector<std::size_t> cluster_subset;
    std::vector<std::vector<std::size_t>> class_partition;  // cells over cluster_subset

    std::size_t num_classes() const { return class_partition.size(); }
    void validate(std::size_t num_clusters) const;
    bool operator==(const TaskSpec& other) const = default;
};

// Centroids uniform in [-1,1]^dim with pairwise distance >= 4*sigma enforced
// by rejection sampling.
Universe build_universe(std::uint64_t seed, std::size_t num_clusters, std::size_t dim,
                        double sigma);

// x ~ N(centroid_c, sigma^2 I), cluster uniform over the task subset, label =
// partition cell. Labeled/unlabeled/test drawn disjointly; probe is a
// class-stratified subset of the labeled set.
DataSplit sample_split(const Universe& universe, const TaskSpec& task, std::size_t n_total,
                       double labeled_fraction, std::size_t probe_size, std::uint64_t seed,
                       std::size_t n_test = 0);

// Jaccard index of the two cluster subsets.
double ground_truth_overlap(const TaskSpec& a, const TaskSpec& b);

// Frozen trained classifier over one synthetic task.
class SourceModelHandle : public SourceModel {
public:
    SourceModelHandle(std::string id, Mlp model, TaskSpec task, double test_accuracy)
        : id_(std::move(id)), model_(std::move(model)), task_(std::move(task)),
          test_accuracy_(test_accuracy) {}

    std::string id() const override { return id_; }
    Matrix features(const Matrix& inputs) const override;
    Matrix pseudo_labels(const Matrix& inputs) const override;

    const Mlp& model() const { return model_; }
    const TaskSpec& task() const { return task_; }
    double test_accuracy() const { return test_accuracy_; }

private:
    std::string id_;
    Mlp model_;
    TaskSpec task_;
    double test_accuracy_;
};

struct SourceTrainOptions {
    std::size_t n_total = 600;
    std::size_t n_test = 200;
    double accuracy_floor = 0.9;
    std::vector<std::vector<std::size_t>> hidden_dims_cycle{{8}, {16}, {32}, {64}};
};

// Trains one supervised model per task spec on its own data until its test
// accuracy reaches the floor or the epoch cap. Sources below the floor are
// reported on the warning stream and excluded.
std::vector<std::shared_ptr<SourceModelHandle>> train_source_models(
    const Universe& universe, const std::vector<TaskSpec>& task_specs, const TrainHyper& hyper,
    std::uint64_t seed, const SourceTrainOptions& opts = {});

// Removes sources whose task spec equals the target's exactly.
std::vector<std::shared_ptr<SourceModelHandle>> exclude_target_leakage(
    const std::vector<std::shared_ptr<SourceModelHandle>>& sources, const TaskSpec& target);

// Source tasks of the same subset size as the target, sharing round(f * m)
// target clusters for each overlap fraction f; fillers come from the
// remaining clusters. Deterministic per seed.
std::vector<TaskSpec> make_source_tasks(const Universe& universe, const TaskSpec& target,
                                        const std::vector<double>& overlap_fractions,
                                        std::size_t num_classes, std::uint64_t seed);

std::vector<const SourceModel*> as_source_pointers(
    const std::vector<std::shared_ptr<SourceModelHandle>>& sources);

}  // namespace taskdist
