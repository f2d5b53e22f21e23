#include "taskdist/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "taskdist/distill.hpp"
#include "taskdist/eval.hpp"

namespace taskdist {

void TaskSpec::validate(std::size_t num_clusters) const {
    if (cluster_subset.empty()) throw std::invalid_argument("TaskSpec: empty cluster subset");
    std::set<std::size_t> subset(cluster_subset.begin(), cluster_subset.end());
    if (subset.size() != cluster_subset.size())
        throw std::invalid_argument("TaskSpec: duplicate clusters in subset");
    for (std::size_t c : cluster_subset)
        if (c >= num_clusters) throw std::invalid_argument("TaskSpec: cluster index out of range");
    if (class_partition.size() < 2)
        throw std::invalid_argument("TaskSpec: need at least 2 classes");
    std::set<std::size_t> covered;
    for (const auto& cell : class_partition) {
        if (cell.empty()) throw std::invalid_argument("TaskSpec: empty partition cell");
        for (std::size_t c : cell) {
            if (!subset.contains(c))
                throw std::invalid_argument("TaskSpec: partition cell outside subset");
            if (!covered.insert(c).second)
                throw std::invalid_argument("TaskSpec: partition cells overlap");
        }
    }
    if (covered.size() != subset.size())
        throw std::invalid_argument("TaskSpec: partition does not cover the subset");
}

Universe build_universe(std::uint64_t seed, std::size_t num_clusters, std::size_t dim,
                        double sigma) {
    if (num_clusters < 2) throw std::invalid_argument("build_universe: need >= 2 clusters");
    if (dim < 2) throw std::invalid_argument("build_universe: need dim >= 2");
    if (!(sigma > 0.0)) throw std::invalid_argument("build_universe: sigma must be > 0");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    const double min_dist = 4.0 * sigma;
    const std::size_t max_attempts = 20000;

    Universe u;
    u.sigma = sigma;
    u.seed = seed;
    u.centroids = Matrix(num_clusters, dim);
    std::size_t placed = 0, attempts = 0;
    std::vector<double> candidate(dim);
    while (placed < num_clusters) {
        if (++attempts > max_attempts)
            throw std::runtime_error("build_universe: universe too crowded");
        for (double& v : candidate) v = coord(rng);
        bool ok = true;
        for (std::size_t i = 0; i < placed && ok; ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = candidate[j] - u.centroids(i, j);
                d2 += d * d;
            }
            ok = d2 >= min_dist * min_dist;
        }
        if (ok) {
            for (std::size_t j = 0; j < dim; ++j) u.centroids(placed, j) = candidate[j];
            ++placed;
        }
    }
    return u;
}

namespace {

// label (partition cell index) for a cluster
std::size_t cell_of(const TaskSpec& task, std::size_t cluster) {
    for (std::size_t c = 0; c < task.class_partition.size(); ++c)
        for (std::size_t k : task.class_partition[c])
            if (k == cluster) return c;
    throw std::logic_error("cell_of: cluster not in task");
}

struct Drawn {
    Matrix x;
    std::vector<std::size_t> labels;
};

Drawn draw(const Universe& u, const TaskSpec& task, std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, task.cluster_subset.size() - 1);
    std::normal_distribution<double> noise(0.0, u.sigma);
    Drawn d;
    d.x = Matrix(n, u.dim());
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cluster = task.cluster_subset[pick(rng)];
        for (std::size_t j = 0; j < u.dim(); ++j)
            d.x(i, j) = u.centroids(cluster, j) + noise(rng);
        d.labels[i] = cell_of(task, cluster);
    }
    return d;
}

Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
    Matrix m(labels.size(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) m(i, labels[i]) = 1.0;
    return m;
}

bool all_classes_present(const std::vector<std::size_t>& labels, std::size_t classes) {
    std::vector<char> seen(classes, 0);
    for (std::size_t l : labels) seen[l] = 1;
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

}  // namespace

DataSplit sample_split(const Universe& universe, const TaskSpec& task, std::size_t n_total,
                       double labeled_fraction, std::size_t probe_size, std::uint64_t seed,
                       std::size_t n_test) {
    task.validate(universe.num_clusters());
    if (!(labeled_fraction > 0.0) || labeled_fraction > 1.0)
        throw std::invalid_argument("sample_split: labeled_fraction must lie in (0,1]");
    if (n_total < 2) throw std::invalid_argument("sample_split: n_total too small");
    const std::size_t classes = task.num_classes();
    const auto n_labeled = static_cast<std::size_t>(
        std::lround(labeled_fraction * static_cast<double>(n_total)));
    if (n_labeled == 0) throw std::invalid_argument("sample_split: no labeled examples");
    if (probe_size == 0) probe_size = std::min<std::size_t>(n_labeled, 500);
    if (probe_size > n_labeled)
        throw std::invalid_argument("sample_split: probe_size exceeds labeled count");
    if (n_test == 0) n_test = std::max<std::size_t>(classes, n_total / 4);

    std::mt19937_64 rng(seed);
    const std::size_t max_retries = 10;
    for (std::size_t attempt = 0;; ++attempt) {
        Drawn pool = draw(universe, task, n_total, rng);
        Drawn test = draw(universe, task, n_test, rng);
        std::vector<std::size_t> labeled_labels(pool.labels.begin(),
                                                pool.labels.begin() + static_cast<long>(n_labeled));
        if (!all_classes_present(labeled_labels, classes) ||
            !all_classes_present(test.labels, classes)) {
            if (attempt + 1 >= max_retries)
                throw std::runtime_error("sample_split: failed to cover all classes");
            continue;
        }

        DataSplit split;
        split.labeled.inputs = Matrix(n_labeled, universe.dim());
        for (std::size_t i = 0; i < n_labeled; ++i)
            std::copy(pool.x.row(i).begin(), pool.x.row(i).end(),
                      split.labeled.inputs.row(i).begin());
        split.labeled.labels_onehot = one_hot(labeled_labels, classes);

        const std::size_t n_unlabeled = n_total - n_labeled;
        split.unlabeled = Matrix(n_unlabeled, universe.dim());
        for (std::size_t i = 0; i < n_unlabeled; ++i)
            std::copy(pool.x.row(n_labeled + i).begin(), pool.x.row(n_labeled + i).end(),
                      split.unlabeled.row(i).begin());

        split.test.inputs = std::move(test.x);
        split.test.labels_onehot = one_hot(test.labels, classes);

        // Class-stratified probe drawn from the labeled set.
        std::vector<std::vector<std::size_t>> by_class(classes);
        for (std::size_t i = 0; i < n_labeled; ++i) by_class[labeled_labels[i]].push_back(i);
        std::vector<std::size_t> probe_idx;
        std::size_t cursor = 0;
        while (probe_idx.size() < probe_size) {
            bool advanced = false;
            for (std::size_t c = 0; c < classes && probe_idx.size() < probe_size; ++c) {
                if (cursor < by_class[c].size()) {
                    probe_idx.push_back(by_class[c][cursor]);
                    advanced = true;
                }
            }
            if (!advanced) break;
            ++cursor;
        }
        std::sort(probe_idx.begin(), probe_idx.end());
        split.probe.inputs = Matrix(probe_idx.size(), universe.dim());
        split.probe.labels_onehot = Matrix(probe_idx.size(), classes);
        for (std::size_t i = 0; i < probe_idx.size(); ++i) {
            std::copy(split.labeled.inputs.row(probe_idx[i]).begin(),
                      split.labeled.inputs.row(probe_idx[i]).end(),
                      split.probe.inputs.row(i).begin());
            split.probe.labels_onehot(i, labeled_labels[probe_idx[i]]) = 1.0;
        }
        split.probe.validate();
        return split;
    }
}

double ground_truth_overlap(const TaskSpec& a, const TaskSpec& b) {
    std::set<std::size_t> sa(a.cluster_subset.begin(), a.cluster_subset.end());
    std::set<std::size_t> sb(b.cluster_subset.begin(), b.cluster_subset.end());
    std::size_t inter = 0;
    for (std::size_t c : sa) inter += sb.contains(c) ? 1 : 0;
    const std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Matrix SourceModelHandle::features(const Matrix& inputs) const {
    return forward(model_, inputs, nullptr).features;
}

Matrix SourceModelHandle::pseudo_labels(const Matrix& inputs) const {
    const std::vector<std::string> only_target{"target"};
    return forward(model_, inputs, &only_target).probs.at("target");
}

std::vector<std::shared_ptr<SourceModelHandle>> train_source_models(
    const Universe& universe, const std::vector<TaskSpec>& task_specs, const TrainHyper& hyper,
    std::uint64_t seed, const SourceTrainOptions& opts) {
    std::vector<std::shared_ptr<SourceModelHandle>> handles(task_specs.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(task_specs.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const TaskSpec& spec = task_specs[i];
        const std::uint64_t source_seed = seed + 1000003ULL * (i + 1);
        const DataSplit split = sample_split(universe, spec, opts.n_total, 1.0,
                                             std::min<std::size_t>(opts.n_total, 100), source_seed,
                                             opts.n_test);

        TrainHyper source_hyper = hyper;
        source_hyper.seed = source_seed;
        const std::vector<std::size_t>& hidden =
            opts.hidden_dims_cycle[i % opts.hidden_dims_cycle.size()];

        // Supervised loop with early stop at the accuracy floor.
        Mlp model = init_mlp(universe.dim(), hidden,
                             {{"target", spec.num_classes()}}, source_seed);
        const std::size_t nl = split.labeled.size();
        const std::size_t batch = std::min(source_hyper.batch_size, nl);
        std::mt19937_64 shuffle_rng(source_seed ^ 0x9e3779b97f4a7c15ULL);
        std::vector<std::size_t> idx(nl);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        double acc = 0.0;
        for (std::size_t epoch = 0; epoch < std::max<std::size_t>(1, source_hyper.epochs);
             ++epoch) {
            std::shuffle(idx.begin(), idx.end(), shuffle_rng);
            for (std::size_t begin = 0; begin < nl; begin += batch) {
                const std::size_t end = std::min(nl, begin + batch);
                Matrix x(end - begin, universe.dim());
                Matrix y(end - begin, spec.num_classes());
                for (std::size_t r = begin; r < end; ++r) {
                    std::copy(split.labeled.inputs.row(idx[r]).begin(),
                              split.labeled.inputs.row(idx[r]).end(), x.row(r - begin).begin());
                    std::copy(split.labeled.labels_onehot.row(idx[r]).begin(),
                              split.labeled.labels_onehot.row(idx[r]).end(),
                              y.row(r - begin).begin());
                }
                const std::map<std::string, const Matrix*> t{{"target", &y}};
                const std::map<std::string, double> c{{"target", 1.0}};
                BackwardResult br = backward(model, x, t, c);
                sgd_step(model, br.grads, source_hyper);
            }
            acc = test_accuracy(model, split.test);
            if (acc >= opts.accuracy_floor) break;
        }

        if (acc < opts.accuracy_floor) {
#pragma omp critical
            std::cerr << "warning: source " << i << " reached test accuracy " << acc << " (< "
                      << opts.accuracy_floor << "); excluding\n";
            continue;
        }
        handles[i] = std::make_shared<SourceModelHandle>("src" + std::to_string(i),
                                                         std::move(model), spec, acc);
    }

    std::vector<std::shared_ptr<SourceModelHandle>> out;
    for (auto& h : handles)
        if (h) out.push_back(std::move(h));
    return out;
}

std::vector<std::shared_ptr<SourceModelHandle>> exclude_target_leakage(
    const std::vector<std::shared_ptr<SourceModelHandle>>& sources, const TaskSpec& target) {
    std::vector<std::shared_ptr<SourceModelHandle>> out;
    for (const auto& s : sources)
        if (!(s->task() == target)) out.push_back(s);
    return out;
}

std::vector<TaskSpec> make_source_tasks(const Universe& universe, const TaskSpec& target,
                                        const std::vector<double>& overlap_fractions,
                                        std::size_t num_classes, std::uint64_t seed) {
    const std::size_t m = target.cluster_subset.size();
    if (num_classes < 2 || num_classes > m)
        throw std::invalid_argument("make_source_tasks: bad class count");
    std::vector<std::size_t> others;
    {
        std::set<std::size_t> tset(target.cluster_subset.begin(), target.cluster_subset.end());
        for (std::size_t c = 0; c < universe.num_clusters(); ++c)
            if (!tset.contains(c)) others.push_back(c);
    }

    std::mt19937_64 rng(seed);
    std::vector<TaskSpec> specs;
    for (std::size_t s = 0; s < overlap_fractions.size(); ++s) {
        const double f = overlap_fractions[s];
        if (f < 0.0 || f > 1.0)
            throw std::invalid_argument("make_source_tasks: overlap fraction out of [0,1]");
        const auto shared = static_cast<std::size_t>(
            std::lround(f * static_cast<double>(m)));
        if (m - shared > others.size())
            throw std::invalid_argument("make_source_tasks: not enough filler clusters");

        std::vector<std::size_t> tgt = target.cluster_subset;
        std::shuffle(tgt.begin(), tgt.end(), rng);
        std::vector<std::size_t> fill = others;
        std::shuffle(fill.begin(), fill.end(), rng);

        TaskSpec spec;
        spec.cluster_subset.assign(tgt.begin(), tgt.begin() + static_cast<long>(shared));
        spec.cluster_subset.insert(spec.cluster_subset.end(), fill.begin(),
                                   fill.begin() + static_cast<long>(m - shared));
        std::sort(spec.cluster_subset.begin(), spec.cluster_subset.end());

        // Round-robin class partition over the subset.
        spec.class_partition.assign(num_classes, {});
        for (std::size_t i = 0; i < spec.cluster_subset.size(); ++i)
            spec.class_partition[i % num_classes].push_back(spec.cluster_subset[i]);
        // A full-overlap source must stay a distinct task, not a copy of the
        // target: rotate the round-robin assignment until the partition differs.
        for (std::size_t shift = 1; spec == target && shift < spec.cluster_subset.size(); ++shift) {
            spec.class_partition.assign(num_classes, {});
            for (std::size_t i = 0; i < spec.cluster_subset.size(); ++i)
                spec.class_partition[(i + shift) % num_classes].push_back(spec.cluster_subset[i]);
        }
        spec.validate(universe.num_clusters());
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<const SourceModel*> as_source_pointers(
    const std::vector<std::shared_ptr<SourceModelHandle>>& sources) {
    std::vector<const SourceModel*> out;
    out.reserve(sources.size());
    for (const auto& s : sources) out.push_back(s.get());
    return out;
}

}  // namespace taskdist
