#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "taskdist/pipeline.hpp"

using namespace taskdist;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("taskdist_pipe_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Tiny but complete configuration that runs in a couple of seconds.
PipelineConfig tiny_config(const fs::path& out) {
    PipelineConfig cfg;
    cfg.seeds = {3};
    cfg.num_clusters = 6;
    cfg.dim = 4;
    cfg.sigma = 0.15;
    cfg.target_subset_size = 3;
    cfg.target_classes = 2;
    cfg.overlaps = {0.0, 0.5, 1.0};
    cfg.source_classes = 2;
    cfg.n_total = 200;
    cfg.labeled_fraction = 0.2;
    cfg.n_test = 100;
    cfg.schemes = {"weighted:p=12", "equal"};
    cfg.hyper = TrainHyper{0.05, 0.0001, 64, 8, 0};
    cfg.target_hidden = {8};
    cfg.source_hyper = TrainHyper{0.05, 0.0001, 64, 30, 0};
    cfg.source_opts.n_total = 300;
    cfg.source_opts.n_test = 100;
    cfg.source_opts.accuracy_floor = 0.0;
    cfg.source_opts.hidden_dims_cycle = {{8}};
    cfg.out_dir = out;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("derive_seed is deterministic and argument-sensitive") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
    CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

TEST_CASE("scheme spec parsing") {
    const SchemeSpec w = SchemeSpec::parse("weighted:p=7", 12.0, 1.0);
    CHECK(w.scheme == Scheme::Power);
    CHECK(w.param == 7.0);
    CHECK(w.label == "weighted:p=7");

    const SchemeSpec d = SchemeSpec::parse("weighted", 12.0, 1.0);
    CHECK(d.param == 12.0);

    const SchemeSpec s = SchemeSpec::parse("softmax:T=2.5", 12.0, 1.0);
    CHECK(s.scheme == Scheme::Softmax);
    CHECK(s.param == 2.5);

    CHECK(SchemeSpec::parse("nearest", 12.0, 1.0).scheme == Scheme::Nearest);
    CHECK(SchemeSpec::parse("equal", 12.0, 1.0).scheme == Scheme::Equal);
    CHECK(SchemeSpec::parse("inverse", 12.0, 1.0).scheme == Scheme::Inverse);
    CHECK(SchemeSpec::parse("random-weights", 12.0, 1.0).scheme == Scheme::RandomSimplex);
    CHECK(SchemeSpec::parse("random-selection", 12.0, 1.0).scheme == Scheme::RandomSelection);
    CHECK_THROWS(SchemeSpec::parse("bogus", 12.0, 1.0));
}

TEST_CASE("config json parsing applies values and rejects unknown keys") {
    const PipelineConfig cfg = PipelineConfig::from_json_text(R"({
        "seeds": [7, 8],
        "universe": {"num_clusters": 5, "dim": 3, "sigma": 0.2},
        "target": {"subset_size": 3, "num_classes": 3, "count": 2},
        "overlaps": [0.0, 1.0],
        "data": {"n_total": 400, "labeled_fraction": 0.1},
        "metric": "rsa",
        "representation": "pseudo",
        "lambda": 0.5,
        "replicas": 2
    })");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{7, 8});
    CHECK(cfg.num_clusters == 5);
    CHECK(cfg.sigma == 0.2);
    CHECK(cfg.target_classes == 3);
    CHECK(cfg.num_target_tasks == 2);
    CHECK(cfg.n_total == 400);
    CHECK(cfg.labeled_fraction == 0.1);
    CHECK(cfg.metric == MetricKind::Rsa);
    CHECK(cfg.representation == RepKind::PseudoLabel);
    CHECK(cfg.lambda == 0.5);
    CHECK(cfg.replicas == 2);

    CHECK_THROWS(PipelineConfig::from_json_text(R"({"seeeds": [1]})"));
    CHECK_THROWS(PipelineConfig::from_json_text(R"({"universe": {"dims": 3}})"));
    CHECK_THROWS(PipelineConfig::from_json_text("not json"));
}

TEST_CASE("canonical json and config hash are stable under key order") {
    const PipelineConfig a = PipelineConfig::from_json_text(R"({"seed": 5, "lambda": 0.5})");
    const PipelineConfig b = PipelineConfig::from_json_text(R"({"lambda": 0.5, "seed": 5})");
    CHECK(a.canonical_json() == b.canonical_json());
    CHECK(a.config_hash() == b.config_hash());
    const PipelineConfig c = PipelineConfig::from_json_text(R"({"seed": 6, "lambda": 0.5})");
    CHECK(a.config_hash() != c.config_hash());
}

TEST_CASE("run_single is deterministic and fills every record field") {
    TempDir tmp;
    const PipelineConfig cfg = tiny_config(tmp.path);
    const RunRecord a = run_single(cfg, 3, 0);
    const RunRecord b = run_single(cfg, 3, 0);

    CHECK(a.source_ids.size() == a.overlaps.size());
    CHECK(a.scores.size() == 6);  // 3 metrics x 2 representations
    for (const auto& [key, values] : a.scores) CHECK(values.size() == a.source_ids.size());
    CHECK(a.single_source_acc.size() == a.source_ids.size());
    CHECK(a.scheme_acc.size() == 2);
    CHECK(a.baseline_acc > 0.0);

    CHECK(a.source_ids == b.source_ids);
    CHECK(a.scores.at(score_key(MetricKind::Parc, RepKind::Feature)) ==
          b.scores.at(score_key(MetricKind::Parc, RepKind::Feature)));
    CHECK(a.single_source_acc == b.single_source_acc);
    CHECK(a.scheme_acc == b.scheme_acc);
    CHECK(a.baseline_acc == b.baseline_acc);
}

TEST_CASE("cmd_pipeline writes a complete, reproducible report bundle") {
    TempDir tmp;
    PipelineConfig cfg = tiny_config(tmp.path / "run1");
    cmd_pipeline(cfg);

    const fs::path reports = tmp.path / "run1" / "reports";
    for (const char* name :
         {"table2_correlations.csv", "table3_topk.csv", "table8_mean_rel_acc.csv",
          "fig1_schemes.csv", "fig3_scatter.csv"})
        CHECK(fs::exists(reports / name));

    cfg.out_dir = tmp.path / "run2";
    cmd_pipeline(cfg);
    for (const char* name :
         {"table2_correlations.csv", "table3_topk.csv", "table8_mean_rel_acc.csv",
          "fig1_schemes.csv", "fig3_scatter.csv"})
        CHECK(slurp(tmp.path / "run1" / "reports" / name) ==
              slurp(tmp.path / "run2" / "reports" / name));
}

TEST_CASE("staged commands chain through the filesystem") {
    TempDir tmp;
    const PipelineConfig cfg = tiny_config(tmp.path / "staged");
    cmd_gen(cfg);
    CHECK(fs::exists(tmp.path / "staged" / "manifest.json"));
    cmd_train_sources(cfg);
    cmd_score(cfg);
    cmd_weigh(cfg);
    cmd_distill(cfg);
    cmd_eval(cfg);
    CHECK(fs::exists(tmp.path / "staged" / "reports" / "table2_correlations.csv"));
}

TEST_CASE("stage commands report missing prerequisites") {
    TempDir tmp;
    const PipelineConfig cfg = tiny_config(tmp.path / "empty");
    CHECK_THROWS(cmd_score(cfg));
    CHECK_THROWS(cmd_distill(cfg));
}

TEST_CASE("score_external scores fmat files against labels") {
    TempDir tmp;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dist(-1, 1);

    std::vector<std::size_t> labels(20);
    for (std::size_t i = 0; i < 20; ++i) labels[i] = i % 2;
    write_labels_csv(tmp.path / "labels.csv", labels);

    // one representation aligned with the labels, one random
    Matrix aligned(20, 2);
    for (std::size_t i = 0; i < 20; ++i) aligned(i, labels[i]) = 1.0;
    Matrix noise(20, 4);
    for (auto& v : noise.values()) v = dist(rng);
    write_fmat(tmp.path / "aligned.fmat", aligned);
    write_fmat(tmp.path / "noise.fmat", noise);

    const auto scores =
        score_external({tmp.path / "aligned.fmat", tmp.path / "noise.fmat"},
                       tmp.path / "labels.csv", MetricKind::Parc, RepKind::Feature);
    REQUIRE(scores.size() == 2);
    CHECK(scores[0].source_id == "aligned");
    CHECK(scores[0].value == doctest::Approx(1.0));
    CHECK(scores[1].value < scores[0].value);
}
