#include "ctmae/evaluation.hpp"

#include "ctmae/errors.hpp"
#include "ctmae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace ctmae {

ConfusionMatrix::ConfusionMatrix(int n_classes) : classes(n_classes) {
    require(n_classes >= 1, Errc::invalid_bounds, "confusion matrix needs at least one class");
    counts.assign(static_cast<size_t>(n_classes) * n_classes, 0);
}

ConfusionMatrix ConfusionMatrix::from_predictions(const std::vector<int>& truth,
                                                  const std::vector<int>& predicted, int n_classes) {
    require(truth.size() == predicted.size(), Errc::shape_mismatch,
            "truth and prediction lists differ in length");
    ConfusionMatrix cm(n_classes);
    for (size_t i = 0; i < truth.size(); ++i) {
        int t = truth[i], p = predicted[i];
        if (t < 0 || t >= n_classes || p < 0 || p >= n_classes)
            fail(Errc::label_out_of_range, "label pair (" + std::to_string(t) + "," +
                                               std::to_string(p) + ") outside " +
                                               std::to_string(n_classes) + " classes");
        ++cm.at(t, p);
    }
    return cm;
}

long ConfusionMatrix::at(int t, int p) const {
    return counts[static_cast<size_t>(t) * classes + static_cast<size_t>(p)];
}
long& ConfusionMatrix::at(int t, int p) {
    return counts[static_cast<size_t>(t) * classes + static_cast<size_t>(p)];
}
long ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), 0l); }
long ConfusionMatrix::support(int t) const {
    long s = 0;
    for (int p = 0; p < classes; ++p) s += at(t, p);
    return s;
}
long ConfusionMatrix::predicted_count(int p) const {
    long s = 0;
    for (int t = 0; t < classes; ++t) s += at(t, p);
    return s;
}

double balanced_accuracy(const ConfusionMatrix& cm) {
    double sum = 0.0;
    int represented = 0;
    for (int c = 0; c < cm.classes; ++c) {
        long s = cm.support(c);
        if (s == 0) continue;
        sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(s);
        ++represented;
    }
    require(represented > 0, Errc::invalid_bounds, "confusion matrix is empty");
    return sum / represented;
}

double weighted_f1(const ConfusionMatrix& cm) {
    const long n = cm.total();
    require(n > 0, Errc::invalid_bounds, "confusion matrix is empty");
    double sum = 0.0;
    for (int c = 0; c < cm.classes; ++c) {
        const long support = cm.support(c);
        if (support == 0) continue;
        const long predicted = cm.predicted_count(c);
        const double recall = static_cast<double>(cm.at(c, c)) / support;
        const double precision =
            predicted == 0 ? 0.0 : static_cast<double>(cm.at(c, c)) / predicted;
        const double f1 =
            precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        sum += (static_cast<double>(support) / n) * f1;
    }
    return sum;
}

namespace {

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

Split make_one_split(const std::vector<int>& labels, int n_classes, uint64_t seed) {
    std::vector<std::vector<int>> by_class(static_cast<size_t>(n_classes));
    for (size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));

    std::vector<int> take(static_cast<size_t>(n_classes));
    int total_take = 0;
    for (int c = 0; c < n_classes; ++c) {
        take[static_cast<size_t>(c)] = round_half_up(0.7 * by_class[static_cast<size_t>(c)].size());
        total_take += take[static_cast<size_t>(c)];
    }
    const int target = round_half_up(0.7 * static_cast<double>(labels.size()));

    // Move single samples until the overall 70% target holds, each time in
    // the class that stays nearest its own target (largest class on ties).
    while (total_take != target) {
        const int dir = target > total_take ? 1 : -1;
        int best = -1;
        double best_err = 0.0;
        for (int c = 0; c < n_classes; ++c) {
            const int n_c = static_cast<int>(by_class[static_cast<size_t>(c)].size());
            const int cand = take[static_cast<size_t>(c)] + dir;
            if (cand < 0 || cand > n_c) continue;
            const double err = std::abs(cand - 0.7 * n_c);
            if (best < 0 || err < best_err ||
                (err == best_err && n_c > static_cast<int>(by_class[static_cast<size_t>(best)].size()))) {
                best = c;
                best_err = err;
            }
        }
        require(best >= 0, Errc::invalid_bounds, "split adjustment has no candidate class");
        take[static_cast<size_t>(best)] += dir;
        total_take += dir;
    }

    Split split;
    split.seed = seed;
    for (int c = 0; c < n_classes; ++c) {
        auto& members = by_class[static_cast<size_t>(c)];
        Rng rng(mix_seed(seed, static_cast<uint64_t>(c)));
        for (size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[rng.below(i)]);
        for (size_t i = 0; i < members.size(); ++i)
            (static_cast<int>(i) < take[static_cast<size_t>(c)] ? split.train : split.validation)
                .push_back(members[i]);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

} // namespace

SplitPlan make_splits(const std::vector<int>& labels, uint64_t seed_base) {
    require(!labels.empty(), Errc::empty_manifest, "no labels to split");
    int n_classes = 0;
    for (int l : labels) {
        require(l >= 0, Errc::label_out_of_range, "negative label");
        n_classes = std::max(n_classes, l + 1);
    }
    for (int c = 0; c < n_classes; ++c)
        require(std::count(labels.begin(), labels.end(), c) > 0, Errc::zero_class_count,
                "class " + std::to_string(c) + " has no samples");

    SplitPlan plan;
    for (uint64_t s = 0; s < 5; ++s)
        plan.splits.push_back(make_one_split(labels, n_classes, seed_base + s));
    return plan;
}

Aggregate aggregate(const std::vector<double>& values) {
    require(!values.empty(), Errc::invalid_bounds, "nothing to aggregate");
    Aggregate a;
    for (double v : values) a.mean += v;
    a.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return a;
}

std::string format_metrics_report(const std::vector<SplitMetrics>& per_split) {
    require(!per_split.empty(), Errc::invalid_bounds, "no split metrics to report");
    std::string out;
    char line[256];
    std::vector<double> ba, f1, vl;
    for (size_t i = 0; i < per_split.size(); ++i) {
        const auto& m = per_split[i];
        std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%.6f\n", i, m.balanced_accuracy,
                      m.weighted_f1, m.val_loss);
        out += line;
        ba.push_back(m.balanced_accuracy);
        f1.push_back(m.weighted_f1);
        vl.push_back(m.val_loss);
    }
    auto a = aggregate(ba), b = aggregate(f1), c = aggregate(vl);
    std::snprintf(line, sizeof(line),
                  "aggregate,%.6f ± %.6f,%.6f ± %.6f,%.6f ± %.6f\n", a.mean, a.stddev, b.mean,
                  b.stddev, c.mean, c.stddev);
    out += line;
    return out;
}

} // namespace ctmae
