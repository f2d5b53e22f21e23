#include "taskdist/similarity.hpp"

#include <cmath>
#include <stdexcept>

#include "taskdist/rankstats.hpp"

namespace taskdist {

std::string to_string(RepKind k) {
    return k == RepKind::Feature ? "feature" : "pseudo";
}

std::string to_string(MetricKind m) {
    switch (m) {
        case MetricKind::Parc: return "parc";
        case MetricKind::Rsa: return "rsa";
        case MetricKind::Cka: return "cka";
    }
    return "?";
}

RepKind rep_kind_from_string(const std::string& s) {
    if (s == "feature") return RepKind::Feature;
    if (s == "pseudo") return RepKind::PseudoLabel;
    throw std::invalid_argument("unknown representation kind: " + s);
}

MetricKind metric_kind_from_string(const std::string& s) {
    if (s == "parc") return MetricKind::Parc;
    if (s == "rsa") return MetricKind::Rsa;
    if (s == "cka") return MetricKind::Cka;
    throw std::invalid_argument("unknown metric: " + s);
}

bool ProbeSet::single_class() const {
    for (std::size_t c = 0; c < labels_onehot.cols(); ++c) {
        double col_sum = 0.0;
        for (std::size_t i = 0; i < labels_onehot.rows(); ++i) col_sum += labels_onehot(i, c);
        if (col_sum > 0.0 && col_sum < static_cast<double>(labels_onehot.rows())) return false;
    }
    return true;
}

void ProbeSet::validate() const {
    if (inputs.rows() < 2) throw std::invalid_argument("ProbeSet: need at least 2 examples");
    if (labels_onehot.rows() != inputs.rows())
        throw std::invalid_argument("ProbeSet: inputs/labels row mismatch");
    for (std::size_t i = 0; i < labels_onehot.rows(); ++i) {
        double s = 0.0;
        std::size_t ones = 0;
        for (std::size_t c = 0; c < labels_onehot.cols(); ++c) {
            const double v = labels_onehot(i, c);
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("ProbeSet: labels must be one-hot");
            if (v == 1.0) ++ones;
            s += v;
        }
        if (ones != 1 || s != 1.0)
            throw std::invalid_argument("ProbeSet: each label row must have exactly one 1");
    }
}

namespace {

void check_sizes(const SourceRepresentation& rep, const ProbeSet& probe, const char* what) {
    if (rep.values.rows() != probe.size())
        throw std::invalid_argument(std::string(what) + ": representation row count != probe size");
}

SimilarityScore degenerate_score(MetricKind metric, RepKind kind) {
    SimilarityScore s;
    s.metric = metric;
    s.representation = kind;
    s.value = 0.0;
    s.degenerate = true;
    return s;
}

// Common PARC/RSA tail: distance matrices, lower triangles, Spearman.
SimilarityScore triangle_spearman(MetricKind metric, const SourceRepresentation& rep,
                                  const Matrix& rep_values, const Matrix& label_values,
                                  bool pre_degenerate) {
    SimilarityScore s;
    s.metric = metric;
    s.representation = rep.kind;
    bool deg = pre_degenerate;
    const Matrix d_rep = pairwise_pearson_distance(rep_values, &deg);
    const Matrix d_lab = pairwise_pearson_distance(label_values, &deg);
    s.value = spearman(lower_triangle(d_rep), lower_triangle(d_lab), &deg);
    s.degenerate = deg;
    if (s.degenerate) s.value = 0.0;
    return s;
}

}  // namespace

Matrix z_normalize_columns(const Matrix& m, std::size_t* dropped_columns) {
    const std::size_t n = m.rows();
    std::vector<std::size_t> keep;
    std::vector<double> mean(m.cols(), 0.0), sd(m.cols(), 0.0);
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += m(i, j);
        mean[j] = s / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = m(i, j) - mean[j];
            ss += d * d;
        }
        const double var = ss / static_cast<double>(n);
        if (var >= kVarianceEpsilon) {
            sd[j] = std::sqrt(var);
            keep.push_back(j);
        }
    }
    if (dropped_columns) *dropped_columns = m.cols() - keep.size();
    Matrix out(n, keep.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t jj = 0; jj < keep.size(); ++jj) {
            const std::size_t j = keep[jj];
            out(i, jj) = (m(i, j) - mean[j]) / sd[j];
        }
    return out;
}

SimilarityScore parc(const SourceRepresentation& rep, const ProbeSet& probe) {
    check_sizes(rep, probe, "parc");
    probe.validate();
    if (probe.single_class()) return degenerate_score(MetricKind::Parc, rep.kind);
    return triangle_spearman(MetricKind::Parc, rep, rep.values, probe.labels_onehot, false);
}

SimilarityScore rsa(const SourceRepresentation& rep, const ProbeSet& probe) {
    check_sizes(rep, probe, "rsa");
    probe.validate();
    if (probe.single_class()) return degenerate_score(MetricKind::Rsa, rep.kind);
    std::size_t dropped_x = 0, dropped_y = 0;
    const Matrix zx = z_normalize_columns(rep.values, &dropped_x);
    const Matrix zy = z_normalize_columns(probe.labels_onehot, &dropped_y);
    if (zx.cols() < 2 || zy.cols() < 2) return degenerate_score(MetricKind::Rsa, rep.kind);
    return triangle_spearman(MetricKind::Rsa, rep, zx, zy, dropped_x + dropped_y > 0);
}

SimilarityScore cka_linear(const SourceRepresentation& rep, const ProbeSet& probe) {
    check_sizes(rep, probe, "cka_linear");
    probe.validate();
    SimilarityScore s;
    s.metric = MetricKind::Cka;
    s.representation = rep.kind;
    if (probe.single_class()) return degenerate_score(MetricKind::Cka, rep.kind);

    // Column-center both matrices so the closed form matches the HSIC ratio.
    auto center = [](const Matrix& m) {
        Matrix c(m.rows(), m.cols());
        for (std::size_t j = 0; j < m.cols(); ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
            mean /= static_cast<double>(m.rows());
            for (std::size_t i = 0; i < m.rows(); ++i) c(i, j) = m(i, j) - mean;
        }
        return c;
    };
    const Matrix x = center(rep.values);
    const Matrix y = center(probe.labels_onehot);

    auto frob = [](const Matrix& m) {
        double s2 = 0.0;
        for (double v : m.values()) s2 += v * v;
        return std::sqrt(s2);
    };
    const Matrix ytx = matmul_tn(y, x);
    double num = 0.0;
    for (double v : ytx.values()) num += v * v;
    const double nx = frob(matmul_tn(x, x));
    const double ny = frob(matmul_tn(y, y));
    if (nx == 0.0 || ny == 0.0) return degenerate_score(MetricKind::Cka, rep.kind);
    s.value = num / (nx * ny);
    if (s.value > 1.0 && s.value < 1.0 + 1e-9) s.value = 1.0;
    return s;
}

SimilarityScore compute_metric(MetricKind metric, const SourceRepresentation& rep,
                               const ProbeSet& probe) {
    switch (metric) {
        case MetricKind::Parc: return parc(rep, probe);
        case MetricKind::Rsa: return rsa(rep, probe);
        case MetricKind::Cka: return cka_linear(rep, probe);
    }
    throw std::logic_error("compute_metric: unknown metric");
}

std::vector<SimilarityScore> score_all_sources(const std::vector<const SourceModel*>& sources,
                                               const ProbeSet& probe, MetricKind metric,
                                               RepKind representation) {
    std::vector<SimilarityScore> scores(sources.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(sources.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const SourceModel* src = sources[i];
        SimilarityScore s;
        try {
            SourceRepresentation rep;
            rep.kind = representation;
            rep.values = representation == RepKind::Feature ? src->features(probe.inputs)
                                                            : src->pseudo_labels(probe.inputs);
            s = compute_metric(metric, rep, probe);
        } catch (const std::exception& e) {
            s.metric = metric;
            s.representation = representation;
            s.value = 0.0;
            s.degenerate = true;
            s.error = e.what();
        }
        s.source_id = src->id();
        scores[i] = s;
    }
    return scores;
}

}  // namespace taskdist
