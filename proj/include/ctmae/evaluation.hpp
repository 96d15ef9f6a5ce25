#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctmae {

// Rows are true classes, columns predictions.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<long> counts; // row-major classes x classes

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int n_classes);
    static ConfusionMatrix from_predictions(const std::vector<int>& truth,
                                            const std::vector<int>& predicted, int n_classes);

    long at(int true_class, int predicted) const;
    long& at(int true_class, int predicted);
    long total() const;
    long support(int true_class) const;
    long predicted_count(int predicted) const;
};

// Mean per-class recall; classes with zero support are left out of the mean.
double balanced_accuracy(const ConfusionMatrix& cm);

// Support-weighted mean of per-class F1; a class with precision+recall = 0
// contributes F1 = 0.
double weighted_f1(const ConfusionMatrix& cm);

struct Split {
    std::vector<int> train;
    std::vector<int> validation;
    uint64_t seed = 0;
};

struct SplitPlan {
    std::vector<Split> splits;
};

// Five stratified 70:30 splits seeded seed_base..seed_base+4. Per class,
// round-half-up(0.7 n_i) goes to train; the total is then nudged by moving
// single samples in whichever class stays closest to its own 70% target
// (largest class on ties) until the overall train count is
// round-half-up(0.7 N).
SplitPlan make_splits(const std::vector<int>& labels, uint64_t seed_base);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation, n - 1
};

Aggregate aggregate(const std::vector<double>& values);

// One line per split "id,balanced_accuracy,weighted_f1,val_loss" plus a
// final "aggregate,mean ± std,..." line.
struct SplitMetrics {
    double balanced_accuracy = 0.0;
    double weighted_f1 = 0.0;
    double val_loss = 0.0;
};

std::string format_metrics_report(const std::vector<SplitMetrics>& per_split);

} // namespace ctmae
