#include "taskdist/pipeline.hpp"

#include "taskdist/rankstats.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace taskdist {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    // splitmix64 over the mixed inputs
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string score_key(MetricKind metric, RepKind rep) {
    return to_string(metric) + "/" + to_string(rep);
}

SchemeSpec SchemeSpec::parse(const std::string& text, double default_p, double default_temp) {
    SchemeSpec spec;
    spec.label = text;
    std::string name = text;
    std::string param;
    if (const auto colon = text.find(':'); colon != std::string::npos) {
        name = text.substr(0, colon);
        param = text.substr(colon + 1);
    }
    spec.scheme = scheme_from_string(name);
    switch (spec.scheme) {
        case Scheme::Power: spec.param = default_p; break;
        case Scheme::Softmax: spec.param = default_temp; break;
        default: spec.param = 0.0; break;
    }
    if (!param.empty()) {
        // accept "p=12", "T=2" or a bare number
        if (const auto eq = param.find('='); eq != std::string::npos) param = param.substr(eq + 1);
        spec.param = std::stod(param);
    }
    return spec;
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key))
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
}

TaskSpec task_spec_from_json(const json& j, const std::string& where) {
    reject_unknown_keys(j, {"clusters", "classes"}, where);
    TaskSpec t;
    t.cluster_subset = j.at("clusters").get<std::vector<std::size_t>>();
    t.class_partition = j.at("classes").get<std::vector<std::vector<std::size_t>>>();
    return t;
}

json task_spec_to_json(const TaskSpec& t) {
    return {{"clusters", t.cluster_subset}, {"classes", t.class_partition}};
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    const json j = json::parse(text);
    PipelineConfig cfg;
    reject_unknown_keys(
        j,
        {"version", "seed", "seeds", "universe", "target", "target_task", "source_tasks",
         "overlaps", "source_classes", "data", "metric", "representation", "schemes", "p", "temp",
         "top_k", "lambda", "hyper", "target_hidden", "activation", "source",
         "run_single_source", "replicas", "out_dir"},
        "top level");
    if (j.contains("version") && j.at("version").get<int>() != 1)
        throw std::invalid_argument("config: unsupported version");

    if (j.contains("seed")) cfg.seeds = {j.at("seed").get<std::uint64_t>()};
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw std::invalid_argument("config: empty seed list");

    if (j.contains("universe")) {
        const json& u = j.at("universe");
        reject_unknown_keys(u, {"num_clusters", "dim", "sigma"}, "universe");
        cfg.num_clusters = u.value("num_clusters", cfg.num_clusters);
        cfg.dim = u.value("dim", cfg.dim);
        cfg.sigma = u.value("sigma", cfg.sigma);
    }
    if (j.contains("target")) {
        const json& t = j.at("target");
        reject_unknown_keys(t, {"subset_size", "num_classes", "count"}, "target");
        cfg.target_subset_size = t.value("subset_size", cfg.target_subset_size);
        cfg.target_classes = t.value("num_classes", cfg.target_classes);
        cfg.num_target_tasks = t.value("count", cfg.num_target_tasks);
    }
    if (j.contains("target_task"))
        cfg.target_task = task_spec_from_json(j.at("target_task"), "target_task");
    if (j.contains("source_tasks")) {
        cfg.source_tasks.clear();
        for (const json& s : j.at("source_tasks"))
            cfg.source_tasks.push_back(task_spec_from_json(s, "source_tasks"));
    }
    if (j.contains("overlaps")) cfg.overlaps = j.at("overlaps").get<std::vector<double>>();
    cfg.source_classes = j.value("source_classes", cfg.source_classes);

    if (j.contains("data")) {
        const json& d = j.at("data");
        reject_unknown_keys(d, {"n_total", "labeled_fraction", "probe_size", "n_test"}, "data");
        cfg.n_total = d.value("n_total", cfg.n_total);
        cfg.labeled_fraction = d.value("labeled_fraction", cfg.labeled_fraction);
        cfg.probe_size = d.value("probe_size", cfg.probe_size);
        cfg.n_test = d.value("n_test", cfg.n_test);
    }
    if (j.contains("metric")) cfg.metric = metric_kind_from_string(j.at("metric").get<std::string>());
    if (j.contains("representation"))
        cfg.representation = rep_kind_from_string(j.at("representation").get<std::string>());
    if (j.contains("schemes")) cfg.schemes = j.at("schemes").get<std::vector<std::string>>();
    cfg.p = j.value("p", cfg.p);
    cfg.temperature = j.value("temp", cfg.temperature);
    cfg.top_k = j.value("top_k", cfg.top_k);
    cfg.lambda = j.value("lambda", cfg.lambda);
    if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
        throw std::invalid_argument("config: lambda must lie in [0,1]");

    if (j.contains("hyper")) {
        const json& h = j.at("hyper");
        reject_unknown_keys(h, {"lr", "weight_decay", "batch_size", "epochs"}, "hyper");
        cfg.hyper.learning_rate = h.value("lr", cfg.hyper.learning_rate);
        cfg.hyper.weight_decay = h.value("weight_decay", cfg.hyper.weight_decay);
        cfg.hyper.batch_size = h.value("batch_size", cfg.hyper.batch_size);
        cfg.hyper.epochs = h.value("epochs", cfg.hyper.epochs);
    }
    if (j.contains("target_hidden"))
        cfg.target_hidden = j.at("target_hidden").get<std::vector<std::size_t>>();
    if (j.contains("activation"))
        cfg.activation = activation_from_string(j.at("activation").get<std::string>());
    if (j.contains("source")) {
        const json& s = j.at("source");
        reject_unknown_keys(
            s, {"n_total", "n_test", "accuracy_floor", "epochs", "lr", "hidden_dims_cycle"},
            "source");
        cfg.source_opts.n_total = s.value("n_total", cfg.source_opts.n_total);
        cfg.source_opts.n_test = s.value("n_test", cfg.source_opts.n_test);
        cfg.source_opts.accuracy_floor = s.value("accuracy_floor", cfg.source_opts.accuracy_floor);
        cfg.source_hyper.epochs = s.value("epochs", cfg.source_hyper.epochs);
        cfg.source_hyper.learning_rate = s.value("lr", cfg.source_hyper.learning_rate);
        if (s.contains("hidden_dims_cycle"))
            cfg.source_opts.hidden_dims_cycle =
                s.at("hidden_dims_cycle").get<std::vector<std::vector<std::size_t>>>();
    }
    cfg.run_single_source = j.value("run_single_source", cfg.run_single_source);
    cfg.replicas = j.value("replicas", cfg.replicas);
    if (cfg.replicas == 0) throw std::invalid_argument("config: replicas must be positive");
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();

    for (const std::string& s : cfg.schemes)
        SchemeSpec::parse(s, cfg.p, cfg.temperature);  // validate early
    return cfg;
}

PipelineConfig PipelineConfig::from_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string PipelineConfig::canonical_json() const {
    json j;
    j["version"] = 1;
    j["seeds"] = seeds;
    j["universe"] = {{"num_clusters", num_clusters}, {"dim", dim}, {"sigma", sigma}};
    j["target"] = {{"subset_size", target_subset_size},
                   {"num_classes", target_classes},
                   {"count", num_target_tasks}};
    if (target_task) j["target_task"] = task_spec_to_json(*target_task);
    json src = json::array();
    for (const TaskSpec& t : source_tasks) src.push_back(task_spec_to_json(t));
    j["source_tasks"] = src;
    j["overlaps"] = overlaps;
    j["source_classes"] = source_classes;
    j["data"] = {{"n_total", n_total},
                 {"labeled_fraction", labeled_fraction},
                 {"probe_size", probe_size},
                 {"n_test", n_test}};
    j["metric"] = to_string(metric);
    j["representation"] = to_string(representation);
    j["schemes"] = schemes;
    j["p"] = p;
    j["temp"] = temperature;
    j["top_k"] = top_k;
    j["lambda"] = lambda;
    j["hyper"] = {{"lr", hyper.learning_rate},
                  {"weight_decay", hyper.weight_decay},
                  {"batch_size", hyper.batch_size},
                  {"epochs", hyper.epochs}};
    j["target_hidden"] = target_hidden;
    j["activation"] = to_string(activation);
    j["source"] = {{"n_total", source_opts.n_total},
                   {"n_test", source_opts.n_test},
                   {"accuracy_floor", source_opts.accuracy_floor},
                   {"epochs", source_hyper.epochs},
                   {"lr", source_hyper.learning_rate},
                   {"hidden_dims_cycle", source_opts.hidden_dims_cycle}};
    j["run_single_source"] = run_single_source;
    j["replicas"] = replicas;
    return j.dump();
}

std::uint64_t PipelineConfig::config_hash() const {
    // FNV-1a over the canonical dump
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_json()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

TaskSpec generate_target(const Universe& universe, const PipelineConfig& cfg, std::uint64_t seed,
                         std::size_t target_index) {
    if (cfg.target_task) return *cfg.target_task;
    if (cfg.target_subset_size > universe.num_clusters())
        throw std::invalid_argument("target subset larger than universe");
    std::mt19937_64 rng(derive_seed(seed, 21, target_index));
    std::vector<std::size_t> clusters(universe.num_clusters());
    std::iota(clusters.begin(), clusters.end(), std::size_t{0});
    std::shuffle(clusters.begin(), clusters.end(), rng);
    TaskSpec t;
    t.cluster_subset.assign(clusters.begin(),
                            clusters.begin() + static_cast<long>(cfg.target_subset_size));
    std::sort(t.cluster_subset.begin(), t.cluster_subset.end());
    t.class_partition.assign(cfg.target_classes, {});
    for (std::size_t i = 0; i < t.cluster_subset.size(); ++i)
        t.class_partition[i % cfg.target_classes].push_back(t.cluster_subset[i]);
    t.validate(universe.num_clusters());
    return t;
}

SourceWeights scheme_weights(const SchemeSpec& spec, const std::vector<double>& raw_scores,
                             const std::vector<double>& normalized, std::uint64_t seed) {
    switch (spec.scheme) {
        case Scheme::Power: return power_weights(normalized, spec.param);
        case Scheme::Softmax: return softmax_weights(raw_scores, spec.param);
        case Scheme::Nearest: return nearest_weights(raw_scores);
        default: return baseline_weights(spec.scheme, normalized, seed);
    }
}

// Expands weights computed on a top-k subset back to full length.
SourceWeights apply_topk(const SchemeSpec& spec, const std::vector<double>& raw,
                         const std::vector<double>& normalized, std::size_t top_k,
                         std::uint64_t seed) {
    if (top_k == 0 || top_k >= raw.size()) return scheme_weights(spec, raw, normalized, seed);
    const auto keep = topk_indices(raw, top_k);
    std::vector<double> sub_raw, sub_norm;
    for (std::size_t i : keep) {
        sub_raw.push_back(raw[i]);
        sub_norm.push_back(normalized[i]);
    }
    SourceWeights sub = scheme_weights(spec, sub_raw, sub_norm, seed);
    SourceWeights full = sub;
    full.alphas.assign(raw.size(), 0.0);
    for (std::size_t i = 0; i < keep.size(); ++i) full.alphas[keep[i]] = sub.alphas[i];
    return full;
}

}  // namespace

RunRecord run_single(const PipelineConfig& cfg, std::uint64_t seed, std::size_t target_index) {
    RunRecord rec;
    rec.seed = seed;
    rec.target_index = target_index;

    const Universe universe =
        build_universe(derive_seed(seed, 11), cfg.num_clusters, cfg.dim, cfg.sigma);
    rec.target = generate_target(universe, cfg, seed, target_index);
    rec.source_specs = cfg.source_tasks.empty()
                           ? make_source_tasks(universe, rec.target, cfg.overlaps,
                                               cfg.source_classes,
                                               derive_seed(seed, 31, target_index))
                           : cfg.source_tasks;

    const DataSplit split =
        sample_split(universe, rec.target, cfg.n_total, cfg.labeled_fraction, cfg.probe_size,
                     derive_seed(seed, 41, target_index), cfg.n_test);

    TrainHyper source_hyper = cfg.source_hyper;
    auto sources = train_source_models(universe, rec.source_specs, source_hyper,
                                       derive_seed(seed, 51, target_index), cfg.source_opts);
    sources = exclude_target_leakage(sources, rec.target);
    if (sources.empty()) throw std::runtime_error("run_single: no usable source models");
    const auto ptrs = as_source_pointers(sources);

    for (const auto& s : sources) {
        rec.source_ids.push_back(s->id());
        rec.overlaps.push_back(ground_truth_overlap(s->task(), rec.target));
    }

    for (MetricKind metric : {MetricKind::Parc, MetricKind::Rsa, MetricKind::Cka}) {
        for (RepKind rep : {RepKind::Feature, RepKind::PseudoLabel}) {
            const auto scores = score_all_sources(ptrs, split.probe, metric, rep);
            std::vector<double> vals;
            for (const SimilarityScore& s : scores) vals.push_back(s.value);
            rec.scores.emplace(score_key(metric, rep), std::move(vals));
        }
    }

    const PseudoLabelCache cache = cache_pseudo_labels(ptrs, split.unlabeled);

    DistillConfig base;
    base.lambda = cfg.lambda;
    base.hyper = cfg.hyper;
    base.hidden_dims = cfg.target_hidden;
    base.activation = cfg.activation;
    base.source_ids = rec.source_ids;

    if (cfg.run_single_source) {
        for (std::size_t s = 0; s < sources.size(); ++s) {
            DistillConfig dc = base;
            dc.weights.scheme = Scheme::Nearest;
            dc.weights.alphas.assign(sources.size(), 0.0);
            dc.weights.alphas[s] = 1.0;
            double acc = 0.0;
            for (std::size_t r = 0; r < cfg.replicas; ++r) {
                dc.hyper.seed = derive_seed(seed, 61, target_index * 97 + r);
                const TrainResult tr = train_target(split, cache, dc);
                acc += test_accuracy(tr.model, split.test);
            }
            rec.single_source_acc.push_back(acc / static_cast<double>(cfg.replicas));
        }
    }

    const std::vector<double>& raw = rec.scores.at(score_key(cfg.metric, cfg.representation));
    const std::vector<double> normalized = normalize_scores(raw);
    for (std::size_t i = 0; i < cfg.schemes.size(); ++i) {
        const SchemeSpec spec = SchemeSpec::parse(cfg.schemes[i], cfg.p, cfg.temperature);
        DistillConfig dc = base;
        dc.weights = apply_topk(spec, raw, normalized, cfg.top_k,
                                derive_seed(seed, 71, target_index * 1000 + i));
        double acc = 0.0;
        for (std::size_t r = 0; r < cfg.replicas; ++r) {
            dc.hyper.seed = derive_seed(seed, 81, target_index * 97 + r);
            const TrainResult tr = train_target(split, cache, dc);
            acc += test_accuracy(tr.model, split.test);
        }
        rec.scheme_acc.emplace(spec.label, acc / static_cast<double>(cfg.replicas));
    }

    DistillConfig bc = base;
    double bacc = 0.0;
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
        bc.hyper.seed = derive_seed(seed, 91, target_index * 97 + r);
        const TrainResult baseline = train_baseline_supervised(split, bc);
        bacc += test_accuracy(baseline.model, split.test);
    }
    rec.baseline_acc = bacc / static_cast<double>(cfg.replicas);
    return rec;
}

ExperimentResult run_experiment(const PipelineConfig& cfg) {
    ExperimentResult result;
    for (std::uint64_t seed : cfg.seeds)
        for (std::size_t t = 0; t < cfg.num_target_tasks; ++t)
            result.runs.push_back(run_single(cfg, seed, t));
    return result;
}

// ---------------------------------------------------------------------------
// file-backed stages

namespace {

void write_manifest(const PipelineConfig& cfg, const std::string& stage) {
    fs::create_directories(cfg.out_dir);
    const fs::path path = cfg.out_dir / "manifest.json";
    json j;
    if (fs::exists(path)) {
        std::ifstream in(path);
        j = json::parse(in);
    }
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(cfg.config_hash()));
    j[stage] = {{"config_hash", hash}, {"seed", cfg.seeds.front()}, {"version", 1}};
    std::ofstream out(path, std::ios::binary);
    out << j.dump(2) << '\n';
}

void require_stage_file(const fs::path& path, const std::string& producing_stage) {
    if (!fs::exists(path))
        throw std::runtime_error("missing prerequisite file " + path.string() + "; run the '" +
                                 producing_stage + "' stage first");
}

struct StageContext {
    Universe universe;
    TaskSpec target;
    std::vector<TaskSpec> source_specs;
};

StageContext load_stage_context(const PipelineConfig& cfg) {
    require_stage_file(cfg.out_dir / "universe.json", "gen");
    require_stage_file(cfg.out_dir / "tasks.json", "gen");
    StageContext ctx;
    ctx.universe = load_universe(cfg.out_dir / "universe.json");
    load_task_specs(cfg.out_dir / "tasks.json", ctx.target, ctx.source_specs);
    return ctx;
}

DataSplit load_split_files(const PipelineConfig& cfg) {
    const fs::path d = cfg.out_dir / "data";
    for (const char* f : {"labeled.fmat", "labeled_labels.csv", "unlabeled.fmat", "probe.fmat",
                          "probe_labels.csv", "test.fmat", "test_labels.csv"})
        require_stage_file(d / f, "gen");
    DataSplit split;
    split.labeled.inputs = read_fmat(d / "labeled.fmat");
    const auto ll = read_labels_csv(d / "labeled_labels.csv");
    const auto tl = read_labels_csv(d / "test_labels.csv");
    const auto pl = read_labels_csv(d / "probe_labels.csv");
    std::size_t classes = 0;
    for (auto v : ll) classes = std::max(classes, v + 1);
    for (auto v : tl) classes = std::max(classes, v + 1);
    split.labeled.labels_onehot = labels_to_onehot(ll, classes);
    split.unlabeled = read_fmat(d / "unlabeled.fmat");
    split.probe.inputs = read_fmat(d / "probe.fmat");
    split.probe.labels_onehot = labels_to_onehot(pl, classes);
    split.test.inputs = read_fmat(d / "test.fmat");
    split.test.labels_onehot = labels_to_onehot(tl, classes);
    return split;
}

std::vector<std::shared_ptr<SourceModelHandle>> load_sources(const PipelineConfig& cfg) {
    const fs::path meta_path = cfg.out_dir / "sources" / "meta.json";
    require_stage_file(meta_path, "train-sources");
    std::ifstream in(meta_path);
    const json meta = json::parse(in);
    std::vector<std::shared_ptr<SourceModelHandle>> out;
    for (const json& js : meta.at("sources")) {
        TaskSpec task;
        task.cluster_subset = js.at("task").at("clusters").get<std::vector<std::size_t>>();
        task.class_partition =
            js.at("task").at("classes").get<std::vector<std::vector<std::size_t>>>();
        Mlp model = load_checkpoint(cfg.out_dir / "sources" / js.at("dir").get<std::string>());
        out.push_back(std::make_shared<SourceModelHandle>(js.at("id").get<std::string>(),
                                                          std::move(model), task,
                                                          js.at("test_accuracy").get<double>()));
    }
    return out;
}

void write_split_files(const PipelineConfig& cfg, const DataSplit& split) {
    const fs::path d = cfg.out_dir / "data";
    fs::create_directories(d);
    write_fmat(d / "labeled.fmat", split.labeled.inputs);
    write_labels_csv(d / "labeled_labels.csv", onehot_to_labels(split.labeled.labels_onehot));
    write_fmat(d / "unlabeled.fmat", split.unlabeled);
    write_fmat(d / "probe.fmat", split.probe.inputs);
    write_labels_csv(d / "probe_labels.csv", onehot_to_labels(split.probe.labels_onehot));
    write_fmat(d / "test.fmat", split.test.inputs);
    write_labels_csv(d / "test_labels.csv", onehot_to_labels(split.test.labels_onehot));
}

}  // namespace

void cmd_gen(const PipelineConfig& cfg) {
    const std::uint64_t seed = cfg.seeds.front();
    const Universe universe =
        build_universe(derive_seed(seed, 11), cfg.num_clusters, cfg.dim, cfg.sigma);
    const TaskSpec target = generate_target(universe, cfg, seed, 0);
    const std::vector<TaskSpec> source_specs =
        cfg.source_tasks.empty()
            ? make_source_tasks(universe, target, cfg.overlaps, cfg.source_classes,
                                derive_seed(seed, 31, 0))
            : cfg.source_tasks;
    const DataSplit split = sample_split(universe, target, cfg.n_total, cfg.labeled_fraction,
                                         cfg.probe_size, derive_seed(seed, 41, 0), cfg.n_test);
    fs::create_directories(cfg.out_dir);
    save_universe(cfg.out_dir / "universe.json", universe);
    save_task_specs(cfg.out_dir / "tasks.json", target, source_specs);
    write_split_files(cfg, split);
    write_manifest(cfg, "gen");
}

void cmd_train_sources(const PipelineConfig& cfg) {
    const std::uint64_t seed = cfg.seeds.front();
    const StageContext ctx = load_stage_context(cfg);
    auto sources = train_source_models(ctx.universe, ctx.source_specs, cfg.source_hyper,
                                       derive_seed(seed, 51, 0), cfg.source_opts);
    sources = exclude_target_leakage(sources, ctx.target);
    const fs::path dir = cfg.out_dir / "sources";
    fs::create_directories(dir);
    json meta;
    meta["format"] = "taskdist-sources";
    json list = json::array();
    for (const auto& s : sources) {
        const std::string sub = s->id();
        save_checkpoint(dir / sub, s->model());
        list.push_back({{"id", s->id()},
                        {"dir", sub},
                        {"test_accuracy", s->test_accuracy()},
                        {"task",
                         {{"clusters", s->task().cluster_subset},
                          {"classes", s->task().class_partition}}}});
    }
    meta["sources"] = list;
    std::ofstream out(dir / "meta.json", std::ios::binary);
    out << meta.dump(2) << '\n';
    write_manifest(cfg, "train-sources");
}

void cmd_score(const PipelineConfig& cfg) {
    const DataSplit split = load_split_files(cfg);
    const auto sources = load_sources(cfg);
    const auto scores =
        score_all_sources(as_source_pointers(sources), split.probe, cfg.metric, cfg.representation);
    write_scores_csv(cfg.out_dir / "scores.csv", scores);
    write_manifest(cfg, "score");
}

void cmd_weigh(const PipelineConfig& cfg) {
    require_stage_file(cfg.out_dir / "scores.csv", "score");
    const auto scores = read_scores_csv(cfg.out_dir / "scores.csv");
    std::vector<std::string> ids;
    std::vector<double> raw;
    for (const SimilarityScore& s : scores) {
        ids.push_back(s.source_id);
        raw.push_back(s.value);
    }
    const SchemeSpec spec = SchemeSpec::parse(cfg.schemes.front(), cfg.p, cfg.temperature);
    const SourceWeights w =
        apply_topk(spec, raw, normalize_scores(raw), cfg.top_k, derive_seed(cfg.seeds.front(), 71, 0));
    write_weights_csv(cfg.out_dir / "weights.csv", w, ids);
    write_manifest(cfg, "weigh");
}

void cmd_distill(const PipelineConfig& cfg) {
    require_stage_file(cfg.out_dir / "weights.csv", "weigh");
    const DataSplit split = load_split_files(cfg);
    const auto sources = load_sources(cfg);
    std::vector<std::string> ids;
    DistillConfig dc;
    dc.weights = read_weights_csv(cfg.out_dir / "weights.csv", &ids);
    dc.source_ids = ids;
    dc.lambda = cfg.lambda;
    dc.hyper = cfg.hyper;
    dc.hyper.seed = derive_seed(cfg.seeds.front(), 81, 0);
    dc.hidden_dims = cfg.target_hidden;
    dc.activation = cfg.activation;
    const TrainResult tr = train_target(split, as_source_pointers(sources), dc);
    const fs::path dir = cfg.out_dir / "distill";
    fs::create_directories(dir);
    write_history_csv((dir / "history.csv").string(), tr.history, ids);
    save_checkpoint(dir / "model", tr.model);
    const double acc = test_accuracy(tr.model, split.test);
    std::ofstream out(dir / "metrics.json", std::ios::binary);
    out << json{{"test_accuracy", acc}}.dump(2) << '\n';
    write_manifest(cfg, "distill");
}

namespace {

void write_reports(const PipelineConfig& cfg, const ExperimentResult& result) {
    const fs::path dir = cfg.out_dir / "reports";
    fs::create_directories(dir);
    const std::size_t nruns = result.runs.size();

    std::vector<std::string> keys;
    for (MetricKind m : {MetricKind::Parc, MetricKind::Rsa, MetricKind::Cka})
        for (RepKind r : {RepKind::Feature, RepKind::PseudoLabel}) keys.push_back(score_key(m, r));

    if (cfg.run_single_source) {
        // similarity-vs-accuracy correlations, one row per metric/repr/statistic
        {
            std::ofstream out(dir / "table2_correlations.csv", std::ios::binary);
            out << "metric,representation,correlation";
            for (std::size_t r = 0; r < nruns; ++r) out << ",run" << r;
            out << ",mean\n";
            for (const std::string& key : keys) {
                const auto slash = key.find('/');
                for (const char* stat : {"spearman", "pearson", "kendall"}) {
                    out << key.substr(0, slash) << ',' << key.substr(slash + 1) << ',' << stat;
                    double sum = 0.0;
                    for (const RunRecord& run : result.runs) {
                        const auto& scores = run.scores.at(key);
                        bool deg = false;
                        double v = 0.0;
                        if (std::string(stat) == "spearman")
                            v = spearman(scores, run.single_source_acc, &deg);
                        else if (std::string(stat) == "pearson")
                            v = pearson(scores, run.single_source_acc, &deg);
                        else
                            v = kendall_tau(scores, run.single_source_acc, &deg);
                        out << ',' << format_double(v);
                        sum += v;
                    }
                    out << ',' << format_double(sum / static_cast<double>(nruns)) << '\n';
                }
            }
        }
        // top-k relative accuracy
        {
            std::ofstream out(dir / "table3_topk.csv", std::ios::binary);
            out << "metric,representation,k";
            for (std::size_t r = 0; r < nruns; ++r) out << ",run" << r;
            out << ",mean\n";
            std::size_t nsrc = result.runs.front().single_source_acc.size();
            for (const RunRecord& run : result.runs)
                nsrc = std::min(nsrc, run.single_source_acc.size());
            for (const std::string& key : keys) {
                const auto slash = key.find('/');
                for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{5}}) {
                    if (k > nsrc) continue;
                    out << key.substr(0, slash) << ',' << key.substr(slash + 1) << ',' << k;
                    double sum = 0.0;
                    for (const RunRecord& run : result.runs) {
                        const auto eval =
                            make_ranking_eval(run.scores.at(key), run.single_source_acc);
                        const double v = topk_relative_accuracy(eval, k);
                        out << ',' << format_double(v);
                        sum += v;
                    }
                    out << ',' << format_double(sum / static_cast<double>(nruns)) << '\n';
                }
            }
        }
        // mean relative accuracy over k, both k-range readings
        {
            std::ofstream out(dir / "table8_mean_rel_acc.csv", std::ios::binary);
            out << "metric,representation,mean_rel_acc_all_k,mean_rel_acc_k_lt_S\n";
            for (const std::string& key : keys) {
                const auto slash = key.find('/');
                double sum_all = 0.0, sum_excl = 0.0;
                for (const RunRecord& run : result.runs) {
                    const auto eval = make_ranking_eval(run.scores.at(key), run.single_source_acc);
                    sum_all += mean_relative_accuracy(eval);
                    sum_excl += mean_relative_accuracy_excl_full(eval);
                }
                out << key.substr(0, slash) << ',' << key.substr(slash + 1) << ','
                    << format_double(sum_all / static_cast<double>(nruns)) << ','
                    << format_double(sum_excl / static_cast<double>(nruns)) << '\n';
            }
        }
        // per-source scatter of overlap, score and distilled accuracy
        {
            std::ofstream out(dir / "fig3_scatter.csv", std::ios::binary);
            out << "seed,target_index,source_id,overlap,score,accuracy\n";
            const std::string key = score_key(cfg.metric, cfg.representation);
            for (const RunRecord& run : result.runs)
                for (std::size_t s = 0; s < run.source_ids.size(); ++s)
                    out << run.seed << ',' << run.target_index << ',' << run.source_ids[s] << ','
                        << format_double(run.overlaps[s]) << ','
                        << format_double(run.scores.at(key)[s]) << ','
                        << format_double(run.single_source_acc[s]) << '\n';
        }
    }

    // scheme comparison incl. supervised baseline
    {
        std::map<std::string, std::vector<double>> by_scheme;
        for (const RunRecord& run : result.runs) {
            for (const auto& [label, acc] : run.scheme_acc) by_scheme[label].push_back(acc);
            by_scheme["supervised-baseline"].push_back(run.baseline_acc);
        }
        write_scheme_comparison_csv((dir / "fig1_schemes.csv").string(),
                                    scheme_comparison(by_scheme));
    }
}

}  // namespace

void cmd_eval(const PipelineConfig& cfg) {
    // Stage mode: rebuild the single-target analysis from on-disk artifacts.
    require_stage_file(cfg.out_dir / "scores.csv", "score");
    const DataSplit split = load_split_files(cfg);
    const auto sources = load_sources(cfg);
    const auto ptrs = as_source_pointers(sources);
    const PseudoLabelCache cache = cache_pseudo_labels(ptrs, split.unlabeled);

    RunRecord rec;
    rec.seed = cfg.seeds.front();
    for (const auto& s : sources) rec.source_ids.push_back(s->id());
    {
        StageContext ctx = load_stage_context(cfg);
        rec.target = ctx.target;
        for (const auto& s : sources)
            rec.overlaps.push_back(ground_truth_overlap(s->task(), rec.target));
    }
    for (MetricKind metric : {MetricKind::Parc, MetricKind::Rsa, MetricKind::Cka})
        for (RepKind rep : {RepKind::Feature, RepKind::PseudoLabel}) {
            const auto scores = score_all_sources(ptrs, split.probe, metric, rep);
            std::vector<double> vals;
            for (const SimilarityScore& s : scores) vals.push_back(s.value);
            rec.scores.emplace(score_key(metric, rep), std::move(vals));
        }

    DistillConfig base;
    base.lambda = cfg.lambda;
    base.hyper = cfg.hyper;
    base.hidden_dims = cfg.target_hidden;
    base.activation = cfg.activation;
    base.source_ids = rec.source_ids;
    for (std::size_t s = 0; s < sources.size(); ++s) {
        DistillConfig dc = base;
        dc.weights.scheme = Scheme::Nearest;
        dc.weights.alphas.assign(sources.size(), 0.0);
        dc.weights.alphas[s] = 1.0;
        dc.hyper.seed = derive_seed(rec.seed, 61, 0);
        const TrainResult tr = train_target(split, cache, dc);
        rec.single_source_acc.push_back(test_accuracy(tr.model, split.test));
    }
    {
        std::ofstream out(cfg.out_dir / "single_source_acc.csv", std::ios::binary);
        out << "source_id,accuracy\n";
        for (std::size_t s = 0; s < rec.source_ids.size(); ++s)
            out << rec.source_ids[s] << ',' << format_double(rec.single_source_acc[s]) << '\n';
    }
    const std::vector<double>& raw = rec.scores.at(score_key(cfg.metric, cfg.representation));
    const std::vector<double> normalized = normalize_scores(raw);
    for (std::size_t i = 0; i < cfg.schemes.size(); ++i) {
        const SchemeSpec spec = SchemeSpec::parse(cfg.schemes[i], cfg.p, cfg.temperature);
        DistillConfig dc = base;
        dc.weights = apply_topk(spec, raw, normalized, cfg.top_k, derive_seed(rec.seed, 71, i));
        dc.hyper.seed = derive_seed(rec.seed, 81, 0);
        const TrainResult tr = train_target(split, cache, dc);
        rec.scheme_acc.emplace(spec.label, test_accuracy(tr.model, split.test));
    }
    DistillConfig bc = base;
    bc.hyper.seed = derive_seed(rec.seed, 91, 0);
    rec.baseline_acc = test_accuracy(train_baseline_supervised(split, bc).model, split.test);

    ExperimentResult result;
    result.runs.push_back(std::move(rec));
    write_reports(cfg, result);
    write_manifest(cfg, "eval");
}

void cmd_pipeline(const PipelineConfig& cfg) {
    const ExperimentResult result = run_experiment(cfg);
    fs::create_directories(cfg.out_dir);

    for (const RunRecord& run : result.runs) {
        const fs::path dir =
            cfg.out_dir / "runs" /
            ("seed" + std::to_string(run.seed) + "_task" + std::to_string(run.target_index));
        fs::create_directories(dir);
        save_task_specs(dir / "tasks.json", run.target, run.source_specs);

        std::vector<SimilarityScore> scores;
        for (const auto& [key, vals] : run.scores) {
            const auto slash = key.find('/');
            for (std::size_t s = 0; s < vals.size(); ++s) {
                SimilarityScore sc;
                sc.source_id = run.source_ids[s];
                sc.metric = metric_kind_from_string(key.substr(0, slash));
                sc.representation = rep_kind_from_string(key.substr(slash + 1));
                sc.value = vals[s];
                scores.push_back(std::move(sc));
            }
        }
        write_scores_csv(dir / "scores.csv", scores);

        if (cfg.run_single_source) {
            std::ofstream out(dir / "single_source_acc.csv", std::ios::binary);
            out << "source_id,accuracy\n";
            for (std::size_t s = 0; s < run.source_ids.size(); ++s)
                out << run.source_ids[s] << ',' << format_double(run.single_source_acc[s]) << '\n';
        }
        {
            std::ofstream out(dir / "schemes.csv", std::ios::binary);
            out << "scheme,test_accuracy\n";
            for (const auto& [label, acc] : run.scheme_acc)
                out << label << ',' << format_double(acc) << '\n';
            out << "supervised-baseline," << format_double(run.baseline_acc) << '\n';
        }
    }

    write_reports(cfg, result);
    write_manifest(cfg, "pipeline");
}

std::vector<SimilarityScore> score_external(const std::vector<fs::path>& fmat_files,
                                            const fs::path& labels_csv, MetricKind metric,
                                            RepKind representation) {
    const auto labels = read_labels_csv(labels_csv);
    ProbeSet probe;
    probe.labels_onehot = labels_to_onehot(labels);
    probe.inputs = Matrix(labels.size(), 1);  // metrics only consult the labels
    std::vector<SimilarityScore> out;
    for (const fs::path& f : fmat_files) {
        SourceRepresentation rep;
        rep.kind = representation;
        rep.values = read_fmat(f);
        SimilarityScore s = compute_metric(metric, rep, probe);
        s.source_id = f.stem().string();
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace taskdist
