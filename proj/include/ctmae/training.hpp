#pragma once

#include "ctmae/dense.hpp"
#include "ctmae/errors.hpp"
#include "ctmae/evaluation.hpp"
#include "ctmae/manifest.hpp"
#include "ctmae/model.hpp"
#include "ctmae/nifti.hpp"
#include "ctmae/patching.hpp"
#include "ctmae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <vector>

namespace ctmae {

enum class LossVariant { standard_mae, lung_aware };

const char* mode_name(Mode mode);
const char* loss_variant_name(LossVariant variant);

struct RunConfig {
    Mode modality = Mode::pretrain;
    int batch_size = 8;
    double base_lr = 1e-3;
    double weight_decay = 0.05;
    int total_iters = 300;
    double warmup_fraction = 0.1;
    LossVariant loss_variant = LossVariant::standard_mae;
    double alpha = 0.01;
    double lung_threshold = 0.25;
    double mask_ratio = 0.75;
    uint64_t seed = 0;
    bool augment = true;
    int checkpoint_every = 500;

    void validate() const;
    std::string describe() const;
};

// Published training configurations (batch / lr / weight decay / iters).
RunConfig paper_pt(); // 64 / 3e-4 / 5e-2 / 198000, augmented
RunConfig paper_ft(); // 12 / 1e-4 / 1e-4 / 95
RunConfig paper_lp(); // 12 / 1e-2 / 1e-2 / 620
// Scaled-down counterparts sized for a single-core smoke run.
RunConfig desk_pt();
RunConfig desk_ft();
RunConfig desk_lp();

// Linear warmup over the first floor(warmup_fraction * total_iters) steps,
// then a cosine decay to ~0 at the last step.
double lr_at(int iter, const RunConfig& cfg);

template <class S>
struct AdamWState {
    std::map<std::string, MatX<S>> m;
    std::map<std::string, MatX<S>> v;
    long step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Decoupled decay p <- p * (1 - lr * wd), then bias-corrected Adam. Moments
// appear lazily the first time a tensor is updated.
template <class S>
void adamw_step(ParamMap<S>& params, const ParamMap<S>& grads, AdamWState<S>& state, double lr,
                double weight_decay, const std::vector<std::string>& trainable) {
    ++state.step;
    const S b1 = static_cast<S>(kAdamBeta1), b2 = static_cast<S>(kAdamBeta2);
    const S c1 = static_cast<S>(1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step)));
    const S c2 = static_cast<S>(1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step)));
    for (const auto& name : trainable) {
        auto pit = params.find(name);
        require(pit != params.end(), Errc::shape_mismatch, "no parameter named " + name);
        auto git = grads.find(name);
        require(git != grads.end(), Errc::shape_mismatch, "no gradient for " + name);
        MatX<S>& p = pit->second;
        const MatX<S>& g = git->second;
        require(g.rows() == p.rows() && g.cols() == p.cols(), Errc::shape_mismatch,
                "gradient shape mismatch for " + name);
        auto mit = state.m.find(name);
        if (mit == state.m.end()) {
            mit = state.m.emplace(name, MatX<S>::Zero(p.rows(), p.cols())).first;
            state.v.emplace(name, MatX<S>::Zero(p.rows(), p.cols()));
        }
        MatX<S>& m = mit->second;
        MatX<S>& v = state.v.at(name);
        require(m.rows() == p.rows() && m.cols() == p.cols(), Errc::shape_mismatch,
                "stale optimizer moment for " + name);
        p *= static_cast<S>(1.0 - lr * weight_decay);
        m = b1 * m + (S(1) - b1) * g;
        v = (b2 * v.array() + (S(1) - b2) * g.array().square()).matrix();
        p.array() -= static_cast<S>(lr) * (m.array() / c1) / ((v.array() / c2).sqrt() + static_cast<S>(kAdamEps));
    }
}

// w_i = N / n_i; any empty class is an error.
std::vector<double> class_weights(const std::vector<int>& counts);
std::vector<int> label_counts(const std::vector<int>& labels, int n_classes);

// 4-way ILD labels to the binary task: {0,1} -> 0, {2,3} -> 1.
std::vector<int> binary_merge(const std::vector<int>& labels4);

// Mean absolute error over the masked rows only.
template <class S>
ad::Value<S> mae_loss(ad::Value<S> recon, const MatX<S>& target, const MaskSelection& sel) {
    return ad::mean_abs_error(recon, target, sel.masked);
}

// L = E_lung + alpha * E_non_lung where each term is the mean absolute error
// over that set's masked rows (0 for an empty set).
template <class S>
ad::Value<S> lung_aware_loss(ad::Value<S> recon, const MatX<S>& target, const MaskSelection& sel,
                             const LungPartition& part, double alpha) {
    require(alpha >= 0.0, Errc::negative_alpha, "alpha must be non-negative");
    require(static_cast<Eigen::Index>(part.lung.size() + part.non_lung.size()) == recon.rows(),
            Errc::shape_mismatch, "lung partition does not cover the patch grid");
    std::vector<int> in_lung, in_non;
    std::set_intersection(sel.masked.begin(), sel.masked.end(), part.lung.begin(), part.lung.end(),
                          std::back_inserter(in_lung));
    std::set_intersection(sel.masked.begin(), sel.masked.end(), part.non_lung.begin(),
                          part.non_lung.end(), std::back_inserter(in_non));
    auto e_lung = ad::mean_abs_error(recon, target, std::move(in_lung));
    auto e_non = ad::mean_abs_error(recon, target, std::move(in_non));
    return ad::add(e_lung, ad::scale(e_non, static_cast<S>(alpha)));
}

struct AugmentDraw {
    bool flip[3] = {false, false, false};
    double jitter = 1.0;
};

// Three coin-flip axis mirrors plus an intensity scale in [0.95, 1.05].
AugmentDraw draw_augment(Rng& rng);
// Flips apply to volume and mask alike; the jitter rescales the volume only
// and re-clamps it to [0, 1].
void apply_augment(Volume& volume, MaskVolume& mask, const AugmentDraw& draw);
void augment(Volume& volume, MaskVolume& mask, uint64_t seed);

struct DatasetItem {
    Volume volume;
    MaskVolume mask;
    int label = -1;
    std::string id;
};

// Preprocessed cubes resident in memory; every volume is side^3 in [0, 1].
struct Dataset {
    int side = 0;
    std::vector<DatasetItem> items;

    std::vector<int> labels() const;
};

Dataset load_dataset(const std::vector<ManifestEntry>& entries, int side, bool require_labels);

// Same items with labels collapsed by binary_merge.
Dataset binary_view(const Dataset& data);

struct LossRecord {
    int iter = 0;
    double lr = 0.0;
    double loss = 0.0;
};

// One "iter,lr,loss" line per record, full double precision.
std::string format_loss_curve(const std::vector<LossRecord>& records);
void write_loss_curve(const std::string& path, const std::vector<LossRecord>& records);

// Invoked at every checkpoint cadence boundary and after the final step.
using CheckpointHook = std::function<void(int iter, const ParamMap<float>& params,
                                          const AdamWState<float>& opt)>;

struct PretrainResult {
    ParamMap<float> params;
    AdamWState<float> opt;
    std::vector<LossRecord> curve;
};

// Masked-autoencoder loop: sample a batch, augment, patchify, mask, encode
// visible, reconstruct, minimize the configured loss variant.
PretrainResult pretrain(const Dataset& data, const ModelConfig& mc, const RunConfig& rc,
                        const CheckpointHook& hook = nullptr);

struct EpochRecord {
    int epoch = 0;
    double val_loss = 0.0;
    double val_balanced_accuracy = 0.0;
    double val_weighted_f1 = 0.0;
};

struct EvalOutcome {
    double loss = 0.0;
    ConfusionMatrix confusion;
};

// Forward-only pass over the listed items with the given class weights.
EvalOutcome evaluate_classifier(const Dataset& data, const std::vector<int>& idx,
                                const ModelConfig& mc, const ParamMap<float>& params,
                                const std::vector<double>& weights);

struct FinetuneResult {
    ParamMap<float> params;
    AdamWState<float> opt;
    std::vector<LossRecord> curve;
    std::vector<EpochRecord> epochs;
    ConfusionMatrix confusion;
    SplitMetrics metrics; // final validation numbers
};

// Weighted cross-entropy training of the classification path. Modality FT
// updates everything, LP only the head; class weights come from the training
// indices alone.
FinetuneResult train_classifier(const Dataset& data, const std::vector<int>& train_idx,
                                const std::vector<int>& val_idx, const ModelConfig& mc,
                                const RunConfig& rc, const ParamMap<float>& init,
                                const CheckpointHook& hook = nullptr);

// Carry every tensor over except the classification head, which is freshly
// initialized for new_cfg's class count.
ParamMap<float> adapt_head(const ParamMap<float>& params, const ModelConfig& old_cfg,
                           const ModelConfig& new_cfg, uint64_t seed);

struct ProtocolResult {
    SplitPlan plan;
    std::vector<SplitMetrics> per_split;
    std::vector<ConfusionMatrix> confusions;
    std::string report;
};

// The evaluation protocol: five stratified 70:30 splits, one classifier run
// per split starting from `init`, aggregated into the metrics report.
ProtocolResult run_split_protocol(const Dataset& data, const ModelConfig& mc, const RunConfig& rc,
                                  const ParamMap<float>& init, uint64_t split_seed_base);

} // namespace ctmae
