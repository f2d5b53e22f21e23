#include "taskdist/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

namespace taskdist {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'M', 'A', 'T'};

void write_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("fmat: truncated payload");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_fmat(const fs::path& path, const Matrix& m) {
    m.require_finite("write_fmat");
    if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
        m.cols() > std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument("write_fmat: dimensions exceed u32");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_fmat: cannot open " + path.string());
    out.write(kMagic, 4);
    write_u32le(out, static_cast<std::uint32_t>(m.rows()));
    write_u32le(out, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.values()) {
        const float f = static_cast<float>(v);
        static_assert(sizeof(float) == 4);
        char b[4];
        std::memcpy(b, &f, 4);  // little-endian host assumed; asserted in tests
        out.write(b, 4);
    }
    if (!out) throw std::runtime_error("write_fmat: write failed for " + path.string());
}

Matrix read_fmat(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_fmat: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("read_fmat: bad magic in " + path.string());
    const std::uint64_t rows = read_u32le(in);
    const std::uint64_t cols = read_u32le(in);
    const std::uint64_t count = rows * cols;
    if (cols != 0 && count / cols != rows)
        throw std::runtime_error("read_fmat: rows*cols overflow");
    if (count > (std::uint64_t{1} << 32))
        throw std::runtime_error("read_fmat: payload too large");
    std::vector<double> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        char b[4];
        in.read(b, 4);
        if (!in) throw std::runtime_error("read_fmat: truncated payload");
        float f;
        std::memcpy(&f, b, 4);
        values[i] = static_cast<double>(f);
    }
    // trailing bytes indicate a malformed file
    in.peek();
    if (!in.eof()) throw std::runtime_error("read_fmat: trailing bytes in " + path.string());
    return Matrix(rows, cols, std::move(values));
}

void write_labels_csv(const fs::path& path, const std::vector<std::size_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_labels_csv: cannot open " + path.string());
    out << "index,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

std::vector<std::size_t> read_labels_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_labels_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "index,label")
        throw std::runtime_error("read_labels_csv: bad header in " + path.string());
    std::vector<std::size_t> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("read_labels_csv: malformed line: " + line);
        const std::size_t index = std::stoull(line.substr(0, comma));
        if (index != labels.size())
            throw std::runtime_error("read_labels_csv: indices must be dense and 0-based");
        labels.push_back(std::stoull(line.substr(comma + 1)));
    }
    return labels;
}

Matrix labels_to_onehot(const std::vector<std::size_t>& labels, std::size_t num_classes) {
    if (labels.empty()) throw std::invalid_argument("labels_to_onehot: empty labels");
    if (num_classes == 0) {
        for (std::size_t l : labels) num_classes = std::max(num_classes, l + 1);
    }
    Matrix m(labels.size(), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes)
            throw std::invalid_argument("labels_to_onehot: label out of range");
        m(i, labels[i]) = 1.0;
    }
    return m;
}

std::vector<std::size_t> onehot_to_labels(const Matrix& onehot) {
    std::vector<std::size_t> labels(onehot.rows());
    for (std::size_t i = 0; i < onehot.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < onehot.cols(); ++c)
            if (onehot(i, c) > onehot(i, best)) best = c;
        labels[i] = best;
    }
    return labels;
}

void write_scores_csv(const fs::path& path, const std::vector<SimilarityScore>& scores) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_scores_csv: cannot open " + path.string());
    out << "source_id,metric,representation,value,degenerate\n";
    for (const SimilarityScore& s : scores)
        out << s.source_id << ',' << to_string(s.metric) << ',' << to_string(s.representation)
            << ',' << format_double(s.value) << ',' << (s.degenerate ? 1 : 0) << '\n';
}

std::vector<SimilarityScore> read_scores_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_scores_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "source_id,metric,representation,value,degenerate")
        throw std::runtime_error("read_scores_csv: bad header");
    std::vector<SimilarityScore> scores;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, metric, rep, value, degenerate;
        if (!std::getline(ss, id, ',') || !std::getline(ss, metric, ',') ||
            !std::getline(ss, rep, ',') || !std::getline(ss, value, ',') ||
            !std::getline(ss, degenerate))
            throw std::runtime_error("read_scores_csv: malformed line: " + line);
        SimilarityScore s;
        s.source_id = id;
        s.metric = metric_kind_from_string(metric);
        s.representation = rep_kind_from_string(rep);
        s.value = std::stod(value);
        s.degenerate = degenerate == "1";
        scores.push_back(std::move(s));
    }
    return scores;
}

void write_weights_csv(const fs::path& path, const SourceWeights& weights,
                       const std::vector<std::string>& source_ids) {
    if (weights.alphas.size() != source_ids.size())
        throw std::invalid_argument("write_weights_csv: ids/alphas length mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_weights_csv: cannot open " + path.string());
    out << "source_id,alpha,scheme,param\n";
    for (std::size_t i = 0; i < source_ids.size(); ++i)
        out << source_ids[i] << ',' << format_double(weights.alphas[i]) << ','
            << to_string(weights.scheme) << ',' << format_double(weights.param) << '\n';
}

SourceWeights read_weights_csv(const fs::path& path, std::vector<std::string>* source_ids) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_weights_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "source_id,alpha,scheme,param")
        throw std::runtime_error("read_weights_csv: bad header");
    SourceWeights w;
    if (source_ids) source_ids->clear();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, alpha, scheme, param;
        if (!std::getline(ss, id, ',') || !std::getline(ss, alpha, ',') ||
            !std::getline(ss, scheme, ',') || !std::getline(ss, param))
            throw std::runtime_error("read_weights_csv: malformed line: " + line);
        if (source_ids) source_ids->push_back(id);
        w.alphas.push_back(std::stod(alpha));
        w.scheme = scheme_from_string(scheme);
        w.param = std::stod(param);
    }
    w.validate();
    return w;
}

void save_checkpoint(const fs::path& dir, const Mlp& m) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "taskdist-checkpoint";
    manifest["version"] = 1;
    manifest["input_dim"] = m.input_dim;
    manifest["feature_dim"] = m.feature_dim;
    json layers = json::array();
    for (std::size_t l = 0; l < m.feature_layers.size(); ++l) {
        const DenseLayer& layer = m.feature_layers[l];
        const std::string stem = "layer" + std::to_string(l);
        write_fmat(dir / (stem + "_w.fmat"), layer.weights);
        write_fmat(dir / (stem + "_b.fmat"), Matrix(1, layer.bias.size(), layer.bias));
        layers.push_back({{"activation", to_string(layer.activation)},
                          {"weights", stem + "_w.fmat"},
                          {"bias", stem + "_b.fmat"}});
    }
    manifest["feature_layers"] = layers;
    json heads = json::object();
    for (const auto& [name, head] : m.heads) {
        const std::string stem = "head_" + name;
        write_fmat(dir / (stem + "_w.fmat"), head.weights);
        write_fmat(dir / (stem + "_b.fmat"), Matrix(1, head.bias.size(), head.bias));
        heads[name] = {{"weights", stem + "_w.fmat"}, {"bias", stem + "_b.fmat"}};
    }
    manifest["heads"] = heads;
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
}

Mlp load_checkpoint(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("load_checkpoint: cannot open manifest in " + dir.string());
    json manifest = json::parse(in);
    if (manifest.value("format", "") != "taskdist-checkpoint")
        throw std::runtime_error("load_checkpoint: not a checkpoint manifest");
    Mlp m;
    m.input_dim = manifest.at("input_dim").get<std::size_t>();
    m.feature_dim = manifest.at("feature_dim").get<std::size_t>();
    for (const json& jl : manifest.at("feature_layers")) {
        DenseLayer layer;
        layer.activation = activation_from_string(jl.at("activation").get<std::string>());
        layer.weights = read_fmat(dir / jl.at("weights").get<std::string>());
        const Matrix b = read_fmat(dir / jl.at("bias").get<std::string>());
        layer.bias.assign(b.values().begin(), b.values().end());
        m.feature_layers.push_back(std::move(layer));
    }
    for (const auto& [name, jh] : manifest.at("heads").items()) {
        Head head;
        head.weights = read_fmat(dir / jh.at("weights").get<std::string>());
        const Matrix b = read_fmat(dir / jh.at("bias").get<std::string>());
        head.bias.assign(b.values().begin(), b.values().end());
        m.heads.emplace(name, std::move(head));
    }
    return m;
}

namespace {

json task_to_json(const TaskSpec& t) {
    return {{"clusters", t.cluster_subset}, {"classes", t.class_partition}};
}

TaskSpec task_from_json(const json& j) {
    TaskSpec t;
    t.cluster_subset = j.at("clusters").get<std::vector<std::size_t>>();
    t.class_partition = j.at("classes").get<std::vector<std::vector<std::size_t>>>();
    return t;
}

}  // namespace

void save_universe(const fs::path& path, const Universe& u) {
    json j;
    j["format"] = "taskdist-universe";
    j["version"] = 1;
    j["seed"] = u.seed;
    j["sigma"] = u.sigma;
    j["num_clusters"] = u.num_clusters();
    j["dim"] = u.dim();
    j["centroids"] = u.centroids.values();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_universe: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

Universe load_universe(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_universe: cannot open " + path.string());
    json j = json::parse(in);
    if (j.value("format", "") != "taskdist-universe")
        throw std::runtime_error("load_universe: not a universe document");
    Universe u;
    u.seed = j.at("seed").get<std::uint64_t>();
    u.sigma = j.at("sigma").get<double>();
    u.centroids = Matrix(j.at("num_clusters").get<std::size_t>(), j.at("dim").get<std::size_t>(),
                         j.at("centroids").get<std::vector<double>>());
    return u;
}

void save_task_specs(const fs::path& path, const TaskSpec& target,
                     const std::vector<TaskSpec>& sources) {
    json j;
    j["format"] = "taskdist-tasks";
    j["version"] = 1;
    j["target"] = task_to_json(target);
    json src = json::array();
    for (const TaskSpec& s : sources) src.push_back(task_to_json(s));
    j["sources"] = src;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_task_specs: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

void load_task_specs(const fs::path& path, TaskSpec& target, std::vector<TaskSpec>& sources) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_task_specs: cannot open " + path.string());
    json j = json::parse(in);
    if (j.value("format", "") != "taskdist-tasks")
        throw std::runtime_error("load_task_specs: not a tasks document");
    target = task_from_json(j.at("target"));
    sources.clear();
    for (const json& s : j.at("sources")) sources.push_back(task_from_json(s));
}

}  // namespace taskdist
