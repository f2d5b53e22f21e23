#pragma once

#include "taskdist/matrix.hpp"
#include "taskdist/similarity.hpp"

namespace taskdist {

struct LabeledSet {
    Matrix inputs;
    Matrix labels_onehot;

    std::size_t size() const { return inputs.rows(); }
};

// Target-task data: small labeled set, larger unlabeled set, probe subset of
// the labeled set, and a held-out test set.
struct DataSplit {
    LabeledSet labeled;
    Matrix unlabeled;
    ProbeSet probe;
    LabeledSet test;
};

}  // namespace taskdist
