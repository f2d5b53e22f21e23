#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "taskdist/distill.hpp"
#include "taskdist/eval.hpp"
#include "taskdist/io.hpp"
#include "taskdist/taskgen.hpp"

namespace taskdist {

// One entry of the config's scheme list, e.g. "weighted:p=12" or "softmax:T=2".
struct SchemeSpec {
    Scheme scheme = Scheme::Power;
    double param = 12.0;  // p or T where applicable
    std::string label;    // as written in the config

    static SchemeSpec parse(const std::string& text, double default_p, double default_temp);
};

struct PipelineConfig {
    std::vector<std::uint64_t> seeds{0};

    // universe
    std::size_t num_clusters = 10;
    std::size_t dim = 16;
    double sigma = 0.35;

    // target task(s); explicit spec wins over the generated ones
    std::optional<TaskSpec> target_task;
    std::size_t target_subset_size = 4;
    std::size_t target_classes = 2;
    std::size_t num_target_tasks = 1;

    // source tasks; explicit specs win over overlap-generated ones
    std::vector<TaskSpec> source_tasks;
    std::vector<double> overlaps{0.0, 0.25, 0.5, 0.5, 0.75, 1.0};
    std::size_t source_classes = 2;

    // data
    std::size_t n_total = 600;
    double labeled_fraction = 0.2;
    std::size_t probe_size = 0;  // 0 = min(labeled, 500)
    std::size_t n_test = 300;

    // metric / weighting
    MetricKind metric = MetricKind::Parc;
    RepKind representation = RepKind::Feature;
    std::vector<std::string> schemes{"weighted:p=12", "nearest", "equal",
                                     "inverse",       "random-weights", "random-selection"};
    double p = 12.0;
    double temperature = 1.0;
    std::size_t top_k = 0;  // 0 = no pre-selection

    // training
    double lambda = 0.8;
    TrainHyper hyper{0.01, 0.0001, 128, 40, 0};
    std::vector<std::size_t> target_hidden{32};
    Activation activation = Activation::Tanh;
    TrainHyper source_hyper{0.01, 0.0001, 128, 60, 0};
    SourceTrainOptions source_opts;

    bool run_single_source = true;  // per-source distillations for the analyses
    std::size_t replicas = 1;       // init replicas averaged per measured accuracy

    std::filesystem::path out_dir = "out";

    static PipelineConfig from_json_file(const std::filesystem::path& path);
    static PipelineConfig from_json_text(const std::string& text);
    std::string canonical_json() const;
    std::uint64_t config_hash() const;
};

// Everything measured for one (seed, target task) run.
struct RunRecord {
    std::uint64_t seed = 0;
    std::size_t target_index = 0;
    TaskSpec target;
    std::vector<TaskSpec> source_specs;
    std::vector<std::string> source_ids;
    std::vector<double> overlaps;                          // ground truth vs target
    std::map<std::string, std::vector<double>> scores;     // "metric/repr" -> per source
    std::vector<double> single_source_acc;                 // per source (empty if disabled)
    std::map<std::string, double> scheme_acc;              // scheme label -> test accuracy
    double baseline_acc = 0.0;
};

struct ExperimentResult {
    std::vector<RunRecord> runs;
};

// Derives a fresh seed stream from (base, tags); used to isolate RNG per run.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

std::string score_key(MetricKind metric, RepKind rep);

// Full in-memory pipeline: gen -> train sources -> score -> weigh -> distill
// -> measure, for every (seed, target) pair.
ExperimentResult run_experiment(const PipelineConfig& cfg);

// One (seed, target) run; exposed for tests and the acceptance suite.
RunRecord run_single(const PipelineConfig& cfg, std::uint64_t seed, std::size_t target_index);

// File-backed stages behind the CLI.
void cmd_gen(const PipelineConfig& cfg);
void cmd_train_sources(const PipelineConfig& cfg);
void cmd_score(const PipelineConfig& cfg);
void cmd_weigh(const PipelineConfig& cfg);
void cmd_distill(const PipelineConfig& cfg);
void cmd_eval(const PipelineConfig& cfg);
void cmd_pipeline(const PipelineConfig& cfg);

// Standalone scoring of externally produced FMAT representation matrices.
std::vector<SimilarityScore> score_external(const std::vector<std::filesystem::path>& fmat_files,
                                            const std::filesystem::path& labels_csv,
                                            MetricKind metric, RepKind representation);

}  // namespace taskdist
