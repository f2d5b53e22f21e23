#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "taskdist/pipeline.hpp"

using namespace taskdist;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string metric;
    std::string repr;
    std::string scheme;
    double p = -1.0;
    double temp = -1.0;
    double lambda = -1.0;
    double labeled_fraction = -1.0;
    std::int64_t seed = -1;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config_path, "JSON config file");
    app->add_option("--out", f.out_dir, "output directory (overrides config)");
    app->add_option("--seed", f.seed, "base seed (overrides config)");
    app->add_option("--metric", f.metric, "parc | rsa | cka");
    app->add_option("--repr", f.repr, "feature | pseudo");
    app->add_option("--scheme", f.scheme, "weighting scheme, e.g. weighted:p=12");
    app->add_option("--p", f.p, "power-weighting exponent");
    app->add_option("--temp", f.temp, "softmax temperature");
    app->add_option("--lambda", f.lambda, "supervised/distillation mix in [0,1]");
    app->add_option("--labeled-fraction", f.labeled_fraction, "labeled share of the target pool");
}

PipelineConfig resolve_config(const CommonFlags& f) {
    PipelineConfig cfg = f.config_path.empty() ? PipelineConfig{}
                                               : PipelineConfig::from_json_file(f.config_path);
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (f.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(f.seed)};
    if (!f.metric.empty()) cfg.metric = metric_kind_from_string(f.metric);
    if (!f.repr.empty()) cfg.representation = rep_kind_from_string(f.repr);
    if (!f.scheme.empty()) cfg.schemes = {f.scheme};
    if (f.p >= 0.0) cfg.p = f.p;
    if (f.temp >= 0.0) cfg.temperature = f.temp;
    if (f.lambda >= 0.0) cfg.lambda = f.lambda;
    if (f.labeled_fraction >= 0.0) cfg.labeled_fraction = f.labeled_fraction;
    for (const std::string& s : cfg.schemes) SchemeSpec::parse(s, cfg.p, cfg.temperature);
    return cfg;
}

int run_stage(const char* stage, void (*fn)(const PipelineConfig&), const CommonFlags& f) {
    try {
        fn(resolve_config(f));
    } catch (const std::exception& e) {
        std::cerr << "taskdist " << stage << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"task-similarity driven source selection and distillation workbench"};
    app.require_subcommand(1);

    CommonFlags gen_f, train_f, score_f, weigh_f, distill_f, eval_f, pipe_f;
    add_common(app.add_subcommand("gen", "generate universe, tasks and data splits"), gen_f);
    add_common(app.add_subcommand("train-sources", "train the source models"), train_f);
    add_common(app.add_subcommand("score", "score sources against the probe set"), score_f);
    add_common(app.add_subcommand("weigh", "turn scores into source weights"), weigh_f);
    add_common(app.add_subcommand("distill", "train the target with weighted distillation"),
               distill_f);
    add_common(app.add_subcommand("eval", "produce the report CSVs from stage artifacts"), eval_f);
    add_common(app.add_subcommand("pipeline", "run every stage in memory for all seeds"), pipe_f);

    CommonFlags ext_f;
    std::vector<std::string> ext_fmats;
    std::string ext_labels;
    CLI::App* ext = app.add_subcommand(
        "score-files", "score externally produced FMAT representation matrices");
    ext->add_option("--fmat", ext_fmats, "representation matrices, one per source")->required();
    ext->add_option("--labels", ext_labels, "probe labels CSV (index,label)")->required();
    ext->add_option("--metric", ext_f.metric, "parc | rsa | cka");
    ext->add_option("--repr", ext_f.repr, "feature | pseudo");

    CLI11_PARSE(app, argc, argv);

    if (app.got_subcommand("gen")) return run_stage("gen", cmd_gen, gen_f);
    if (app.got_subcommand("train-sources"))
        return run_stage("train-sources", cmd_train_sources, train_f);
    if (app.got_subcommand("score")) return run_stage("score", cmd_score, score_f);
    if (app.got_subcommand("weigh")) return run_stage("weigh", cmd_weigh, weigh_f);
    if (app.got_subcommand("distill")) return run_stage("distill", cmd_distill, distill_f);
    if (app.got_subcommand("eval")) return run_stage("eval", cmd_eval, eval_f);
    if (app.got_subcommand("pipeline")) return run_stage("pipeline", cmd_pipeline, pipe_f);

    try {
        const MetricKind metric =
            ext_f.metric.empty() ? MetricKind::Parc : metric_kind_from_string(ext_f.metric);
        const RepKind repr =
            ext_f.repr.empty() ? RepKind::Feature : rep_kind_from_string(ext_f.repr);
        std::vector<std::filesystem::path> files(ext_fmats.begin(), ext_fmats.end());
        const auto scores = score_external(files, ext_labels, metric, repr);
        std::cout << "source_id,metric,representation,value,degenerate\n";
        for (const SimilarityScore& s : scores)
            std::cout << s.source_id << ',' << to_string(s.metric) << ','
                      << to_string(s.representation) << ',' << format_double(s.value) << ','
                      << (s.degenerate ? 1 : 0) << '\n';
    } catch (const std::exception& e) {
        std::cerr << "taskdist score-files: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
