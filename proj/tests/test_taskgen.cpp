#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "taskdist/taskgen.hpp"

using namespace taskdist;

namespace {

TaskSpec make_task(std::vector<std::size_t> subset,
                   std::vector<std::vector<std::size_t>> partition) {
    TaskSpec t;
    t.cluster_subset = std::move(subset);
    t.class_partition = std::move(partition);
    return t;
}

}  // namespace

TEST_CASE("build_universe determinism, bounds and separation") {
    const Universe u = build_universe(5, 6, 4, 0.1);
    CHECK(u.num_clusters() == 6);
    CHECK(u.dim() == 4);
    for (double v : u.centroids.values()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j) {
            double d2 = 0;
            for (std::size_t k = 0; k < 4; ++k) {
                const double diff = u.centroids(i, k) - u.centroids(j, k);
                d2 += diff * diff;
            }
            CHECK(std::sqrt(d2) >= 4 * u.sigma);
        }
    const Universe again = build_universe(5, 6, 4, 0.1);
    CHECK(u.centroids.values() == again.centroids.values());

    const Universe tiny = build_universe(1, 2, 2, 0.05);
    CHECK(tiny.centroids.rows() == 2);
    CHECK(tiny.centroids.cols() == 2);

    // sigma so large that 4-sigma separation cannot fit in [-1,1]^2
    CHECK_THROWS(build_universe(0, 12, 2, 1.5));
}

TEST_CASE("sample_split sizes and label validity") {
    const Universe u = build_universe(2, 6, 3, 0.1);
    const TaskSpec task = make_task({0, 2, 4}, {{0, 4}, {2}});
    const DataSplit s = sample_split(u, task, 1000, 0.2, 50, 9, 200);
    CHECK(s.labeled.size() == 200);
    CHECK(s.unlabeled.rows() == 800);
    CHECK(s.probe.size() == 50);
    CHECK(s.test.size() == 200);
    CHECK(s.labeled.labels_onehot.cols() == 2);
    for (std::size_t i = 0; i < s.labeled.size(); ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < 2; ++j) sum += s.labeled.labels_onehot(i, j);
        CHECK(sum == 1.0);
    }

    const DataSplit five = sample_split(u, task, 1000, 0.05, 10, 9, 0);
    CHECK(five.labeled.size() == 50);
    CHECK(five.unlabeled.rows() == 950);

    CHECK_THROWS(sample_split(u, task, 100, 0.2, 50, 9, 0));  // probe > labeled
}

TEST_CASE("sample_split is deterministic and probe is class-stratified") {
    const Universe u = build_universe(3, 8, 3, 0.1);
    const TaskSpec task = make_task({1, 3, 5, 7}, {{1, 5}, {3, 7}});
    const DataSplit a = sample_split(u, task, 600, 0.2, 40, 77, 100);
    const DataSplit b = sample_split(u, task, 600, 0.2, 40, 77, 100);
    CHECK(a.labeled.inputs.values() == b.labeled.inputs.values());
    CHECK(a.unlabeled.values() == b.unlabeled.values());

    std::vector<std::size_t> counts(2, 0);
    for (std::size_t i = 0; i < a.probe.size(); ++i)
        for (std::size_t j = 0; j < 2; ++j)
            if (a.probe.labels_onehot(i, j) == 1.0) ++counts[j];
    CHECK(counts[0] + counts[1] == 40);
    CHECK(counts[0] >= 10);
    CHECK(counts[1] >= 10);
}

TEST_CASE("ground_truth_overlap hand values") {
    const TaskSpec a = make_task({0, 1}, {{0}, {1}});
    CHECK(ground_truth_overlap(a, a) == doctest::Approx(1.0));
    const TaskSpec b = make_task({2, 3}, {{2}, {3}});
    CHECK(ground_truth_overlap(a, b) == doctest::Approx(0.0));
    const TaskSpec c = make_task({1, 2}, {{1}, {2}});
    CHECK(ground_truth_overlap(a, c) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("make_source_tasks respects overlap fractions and leaves no leakage") {
    const Universe u = build_universe(11, 10, 4, 0.1);
    const TaskSpec target = make_task({0, 1, 2, 3}, {{0, 2}, {1, 3}});
    const std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
    const auto sources = make_source_tasks(u, target, fractions, 2, 13);
    REQUIRE(sources.size() == fractions.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
        sources[i].validate(u.num_clusters());
        CHECK(sources[i].cluster_subset.size() == 4);
        std::set<std::size_t> tset(target.cluster_subset.begin(), target.cluster_subset.end());
        std::size_t shared = 0;
        for (std::size_t c : sources[i].cluster_subset) shared += tset.count(c);
        CHECK(double(shared) == doctest::Approx(std::round(fractions[i] * 4.0)));
        // the full-overlap source shares all clusters but must not equal the
        // target task, or leakage exclusion would drop it
        CHECK(!(sources[i] == target));
    }
    const auto again = make_source_tasks(u, target, fractions, 2, 13);
    CHECK(again == sources);
}

TEST_CASE("train_source_models produces frozen accurate models") {
    const Universe u = build_universe(21, 4, 3, 0.08);
    const TaskSpec task = make_task({0, 1}, {{0}, {1}});
    SourceTrainOptions opts;
    opts.n_total = 300;
    opts.n_test = 100;
    const TrainHyper hyper{0.05, 0.0001, 64, 40, 0};
    const auto sources = train_source_models(u, {task}, hyper, 3, opts);
    REQUIRE(sources.size() == 1);
    CHECK(sources[0]->test_accuracy() >= 0.9);

    Matrix probe(5, 3, 0.1);
    CHECK(sources[0]->features(probe).values() == sources[0]->features(probe).values());
    CHECK(sources[0]->pseudo_labels(probe).values() ==
          sources[0]->pseudo_labels(probe).values());

    const auto again = train_source_models(u, {task}, hyper, 3, opts);
    CHECK(sources[0]->model().heads.at("target").weights.values() ==
          again[0]->model().heads.at("target").weights.values());
}

TEST_CASE("exclude_target_leakage removes exact task matches only") {
    const Universe u = build_universe(31, 6, 3, 0.08);
    const TaskSpec target = make_task({0, 1}, {{0}, {1}});
    const TaskSpec same = target;
    const TaskSpec overlapping = make_task({0, 2}, {{0}, {2}});
    SourceTrainOptions opts;
    opts.n_total = 300;
    opts.n_test = 100;
    const TrainHyper hyper{0.05, 0.0001, 64, 40, 0};
    const auto sources = train_source_models(u, {same, overlapping}, hyper, 5, opts);
    REQUIRE(sources.size() == 2);
    const auto kept = exclude_target_leakage(sources, target);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0]->task() == overlapping);
    CHECK(exclude_target_leakage(kept, overlapping).empty());
}

TEST_CASE("task spec validation rejects malformed partitions") {
    TaskSpec bad = make_task({0, 1}, {{0}, {2}});  // cluster 2 not in subset
    CHECK_THROWS(bad.validate(6));
    TaskSpec dup = make_task({0, 1}, {{0, 1}, {1}});  // cluster used twice
    CHECK_THROWS(dup.validate(6));
    TaskSpec good = make_task({0, 1, 2}, {{0, 2}, {1}});
    good.validate(6);
}
