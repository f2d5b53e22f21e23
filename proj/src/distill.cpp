#include "taskdist/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "taskdist/eval.hpp"

namespace taskdist {

const Matrix& PseudoLabelCache::at(const std::string& source_id) const {
    auto it = by_source.find(source_id);
    if (it == by_source.end())
        throw std::invalid_argument("PseudoLabelCache: no entry for source '" + source_id + "'");
    ++reads[source_id];
    return it->second;
}

PseudoLabelCache cache_pseudo_labels(const std::vector<const SourceModel*>& sources,
                                     const Matrix& unlabeled) {
    PseudoLabelCache cache;
    for (const SourceModel* src : sources) {
        try {
            Matrix probs = src->pseudo_labels(unlabeled);
            if (probs.rows() != unlabeled.rows())
                throw std::runtime_error("pseudo-label row count mismatch");
            cache.by_source.emplace(src->id(), std::move(probs));
            cache.reads[src->id()] = 0;
        } catch (const std::exception& e) {
            throw std::runtime_error("cache_pseudo_labels: source '" + src->id() +
                                     "' failed: " + e.what());
        }
    }
    return cache;
}

namespace {

struct ActiveSource {
    std::size_t index;  // into cfg.source_ids
    std::string id;
    double coeff;  // (1 - lambda) * alpha
};

std::vector<ActiveSource> active_sources(const DistillConfig& cfg) {
    std::vector<ActiveSource> act;
    if (cfg.source_ids.empty()) return act;
    if (cfg.weights.alphas.size() != cfg.source_ids.size())
        throw std::invalid_argument("DistillConfig: weights/source_ids length mismatch");
    cfg.weights.validate();
    for (std::size_t s = 0; s < cfg.source_ids.size(); ++s) {
        const double c = (1.0 - cfg.lambda) * cfg.weights.alphas[s];
        if (c > 0.0) act.push_back({s, cfg.source_ids[s], c});
    }
    return act;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
    Matrix out(end - begin, m.cols());
    for (std::size_t r = begin; r < end; ++r) {
        auto src = m.row(idx[r]);
        auto dst = out.row(r - begin);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

}  // namespace

std::pair<StepLoss, Gradients> multi_distill_loss(const Mlp& target, const Matrix& labeled_x,
                                                  const Matrix& labeled_y, const Matrix& unlabeled_x,
                                                  const std::map<std::string, Matrix>& pseudo_batch,
                                                  const DistillConfig& cfg) {
    if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
        throw std::invalid_argument("multi_distill_loss: lambda must lie in [0,1]");
    const auto act = active_sources(cfg);

    StepLoss sl;
    sl.distill.assign(cfg.source_ids.size(), 0.0);
    Gradients grads = zero_gradients(target);

    if (cfg.lambda > 0.0) {
        const std::map<std::string, const Matrix*> t{{"target", &labeled_y}};
        const std::map<std::string, double> c{{"target", cfg.lambda}};
        BackwardResult br = backward(target, labeled_x, t, c);
        sl.labeled = br.head_loss.at("target");
        accumulate(grads, br.grads);
    }

    if (!act.empty()) {
        std::map<std::string, const Matrix*> t;
        std::map<std::string, double> c;
        for (const ActiveSource& a : act) {
            const std::string head = aux_head_name(a.id);
            if (!target.heads.contains(head))
                throw std::invalid_argument("multi_distill_loss: missing aux head for source '" +
                                            a.id + "'");
            auto it = pseudo_batch.find(a.id);
            if (it == pseudo_batch.end())
                throw std::invalid_argument("multi_distill_loss: missing pseudo-labels for '" +
                                            a.id + "'");
            t.emplace(head, &it->second);
            c.emplace(head, a.coeff);
        }
        BackwardResult br = backward(target, unlabeled_x, t, c);
        for (const ActiveSource& a : act)
            sl.distill[a.index] = br.head_loss.at(aux_head_name(a.id));
        accumulate(grads, br.grads);
    }

    sl.total = cfg.lambda * sl.labeled;
    for (const ActiveSource& a : act) sl.total += a.coeff * sl.distill[a.index];
    return {std::move(sl), std::move(grads)};
}

TrainResult train_target(const DataSplit& split, const PseudoLabelCache& cache,
                         const DistillConfig& cfg) {
    if (split.labeled.size() == 0)
        throw std::invalid_argument("train_target: empty labeled set");
    if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
        throw std::invalid_argument("train_target: lambda must lie in [0,1]");
    const auto act = active_sources(cfg);
    const bool semi = !act.empty();
    if (semi && split.unlabeled.rows() == 0)
        throw std::invalid_argument("train_target: empty unlabeled set with lambda < 1");

    std::map<std::string, std::size_t> head_specs{{"target", split.labeled.labels_onehot.cols()}};
    for (const ActiveSource& a : act)
        head_specs.emplace(aux_head_name(a.id), cache.at(a.id).cols());

    TrainResult out;
    out.model = init_mlp(split.labeled.inputs.cols(), cfg.hidden_dims, head_specs,
                         cfg.hyper.seed, cfg.activation);

    const std::size_t nl = split.labeled.size();
    const std::size_t nu = split.unlabeled.rows();
    const auto [rl, ru] = cfg.batch_ratio;
    if (rl == 0 || ru == 0)
        throw std::invalid_argument("train_target: batch ratio counts must be >= 1");

    std::size_t bl, bu = 0, steps_per_epoch;
    if (semi) {
        bl = std::max<std::size_t>(1, cfg.hyper.batch_size * rl / (rl + ru));
        bu = std::max<std::size_t>(1, cfg.hyper.batch_size - bl);
        bl = std::min(bl, nl);
        bu = std::min(bu, nu);
        steps_per_epoch = (nu + bu - 1) / bu;
    } else {
        bl = std::min(cfg.hyper.batch_size, nl);
        steps_per_epoch = (nl + bl - 1) / bl;
    }

    std::mt19937_64 shuffle_rng(cfg.hyper.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> labeled_idx(nl), unlabeled_idx(nu);
    std::iota(labeled_idx.begin(), labeled_idx.end(), std::size_t{0});
    std::iota(unlabeled_idx.begin(), unlabeled_idx.end(), std::size_t{0});
    std::shuffle(labeled_idx.begin(), labeled_idx.end(), shuffle_rng);
    std::size_t labeled_cursor = 0;

    for (std::size_t epoch = 0; epoch < cfg.hyper.epochs; ++epoch) {
        if (semi) std::shuffle(unlabeled_idx.begin(), unlabeled_idx.end(), shuffle_rng);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_distill.assign(cfg.source_ids.size(), 0.0);

        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            if (labeled_cursor + bl > nl) {
                std::shuffle(labeled_idx.begin(), labeled_idx.end(), shuffle_rng);
                labeled_cursor = 0;
            }
            const Matrix xl =
                gather_rows(split.labeled.inputs, labeled_idx, labeled_cursor, labeled_cursor + bl);
            const Matrix yl = gather_rows(split.labeled.labels_onehot, labeled_idx, labeled_cursor,
                                          labeled_cursor + bl);
            labeled_cursor += bl;

            Matrix xu;
            std::map<std::string, Matrix> pseudo_batch;
            if (semi) {
                const std::size_t begin = step * bu;
                const std::size_t end = std::min(nu, begin + bu);
                xu = gather_rows(split.unlabeled, unlabeled_idx, begin, end);
                for (const ActiveSource& a : act)
                    pseudo_batch.emplace(a.id, gather_rows(cache.at(a.id), unlabeled_idx, begin, end));
            }

            auto [sl, grads] = multi_distill_loss(out.model, xl, yl, xu, pseudo_batch, cfg);
            sgd_step(out.model, grads, cfg.hyper);

            rec.loss_total += sl.total;
            rec.loss_labeled += sl.labeled;
            for (std::size_t s = 0; s < sl.distill.size(); ++s)
                rec.loss_distill[s] += sl.distill[s];
        }

        const double inv = 1.0 / static_cast<double>(steps_per_epoch);
        rec.loss_total *= inv;
        rec.loss_labeled *= inv;
        for (double& d : rec.loss_distill) d *= inv;
        if (split.test.size() > 0) rec.test_accuracy = test_accuracy(out.model, split.test);
        out.history.push_back(std::move(rec));
    }

    // Discard auxiliary heads; only the target head is used for inference.
    std::erase_if(out.model.heads, [](const auto& kv) { return kv.first != "target"; });
    return out;
}

TrainResult train_target(const DataSplit& split, const std::vector<const SourceModel*>& sources,
                         const DistillConfig& cfg) {
    const PseudoLabelCache cache = cache_pseudo_labels(sources, split.unlabeled);
    return train_target(split, cache, cfg);
}

TrainResult train_baseline_supervised(const DataSplit& split, DistillConfig cfg) {
    cfg.lambda = 1.0;
    cfg.weights = SourceWeights{};
    cfg.source_ids.clear();
    const PseudoLabelCache empty_cache;
    return train_target(split, empty_cache, cfg);
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history,
                       const std::vector<std::string>& source_ids) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path);
    out << "epoch,loss_total,loss_labeled";
    for (const std::string& id : source_ids) out << ",loss_distill_" << id;
    out << ",test_acc\n";
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const EpochRecord& r : history) {
        out << r.epoch << ',' << fmt(r.loss_total) << ',' << fmt(r.loss_labeled);
        for (double d : r.loss_distill) out << ',' << fmt(d);
        out << ',' << fmt(r.test_accuracy) << '\n';
    }
}

}  // namespace taskdist
