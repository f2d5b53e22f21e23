#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "taskdist/matrix.hpp"
#include "taskdist/model.hpp"
#include "taskdist/similarity.hpp"
#include "taskdist/taskgen.hpp"
#include "taskdist/weighting.hpp"

namespace taskdist {

// FMAT: magic "FMAT", u32 LE rows, u32 LE cols, rows*cols float32 LE,
// row-major. float32 on disk, float64 in memory.
void write_fmat(const std::filesystem::path& path, const Matrix& m);
Matrix read_fmat(const std::filesystem::path& path);

// Labels on disk: CSV "index,label" with 0-based class ids.
void write_labels_csv(const std::filesystem::path& path, const std::vector<std::size_t>& labels);
std::vector<std::size_t> read_labels_csv(const std::filesystem::path& path);

Matrix labels_to_onehot(const std::vector<std::size_t>& labels, std::size_t num_classes = 0);
std::vector<std::size_t> onehot_to_labels(const Matrix& onehot);

// Scores CSV: source_id,metric,representation,value,degenerate
void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<SimilarityScore>& scores);
std::vector<SimilarityScore> read_scores_csv(const std::filesystem::path& path);

// Weights CSV: source_id,alpha,scheme,param
void write_weights_csv(const std::filesystem::path& path, const SourceWeights& weights,
                       const std::vector<std::string>& source_ids);
SourceWeights read_weights_csv(const std::filesystem::path& path,
                               std::vector<std::string>* source_ids = nullptr);

// Model checkpoint: a directory of named FMAT parameter matrices plus a
// manifest.json describing the architecture.
void save_checkpoint(const std::filesystem::path& dir, const Mlp& m);
Mlp load_checkpoint(const std::filesystem::path& dir);

// Universe / task specs as JSON documents.
void save_universe(const std::filesystem::path& path, const Universe& u);
Universe load_universe(const std::filesystem::path& path);
void save_task_specs(const std::filesystem::path& path, const TaskSpec& target,
                     const std::vector<TaskSpec>& sources);
void load_task_specs(const std::filesystem::path& path, TaskSpec& target,
                     std::vector<TaskSpec>& sources);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace taskdist
