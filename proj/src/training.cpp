#include "ctmae/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <utility>

namespace ctmae {

const char* mode_name(Mode mode) {
    switch (mode) {
    case Mode::pretrain: return "pretrain";
    case Mode::finetune: return "finetune";
    case Mode::linear_probe: return "linear_probe";
    }
    return "?";
}

const char* loss_variant_name(LossVariant variant) {
    return variant == LossVariant::standard_mae ? "standard_mae" : "lung_aware";
}

void RunConfig::validate() const {
    require(batch_size >= 1, Errc::config_error, "batch_size must be positive");
    require(base_lr > 0.0, Errc::config_error, "base_lr must be positive");
    require(weight_decay >= 0.0, Errc::config_error, "weight_decay must be non-negative");
    require(total_iters >= 1, Errc::config_error, "total_iters must be positive");
    require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, Errc::config_error,
            "warmup_fraction must lie in [0, 1)");
    require(alpha >= 0.0, Errc::negative_alpha, "alpha must be non-negative");
    require(lung_threshold >= 0.0 && lung_threshold <= 1.0, Errc::invalid_bounds,
            "lung_threshold must lie in [0, 1]");
    require(mask_ratio > 0.0 && mask_ratio < 1.0, Errc::bad_ratio,
            "mask_ratio must lie strictly inside (0, 1)");
    require(checkpoint_every >= 1, Errc::config_error, "checkpoint_every must be positive");
}

std::string RunConfig::describe() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "modality=%s;batch=%d;lr=%g;wd=%g;iters=%d;warmup=%g;loss=%s;alpha=%g;"
                  "lung_threshold=%g;mask_ratio=%g;seed=%llu;augment=%d;checkpoint_every=%d",
                  mode_name(modality), batch_size, base_lr, weight_decay, total_iters,
                  warmup_fraction, loss_variant_name(loss_variant), alpha, lung_threshold,
                  mask_ratio, static_cast<unsigned long long>(seed), augment ? 1 : 0,
                  checkpoint_every);
    return buf;
}

RunConfig paper_pt() {
    RunConfig c;
    c.modality = Mode::pretrain;
    c.batch_size = 64;
    c.base_lr = 3e-4;
    c.weight_decay = 5e-2;
    c.total_iters = 198000;
    c.warmup_fraction = 0.1;
    c.augment = true;
    return c;
}

RunConfig paper_ft() {
    RunConfig c;
    c.modality = Mode::finetune;
    c.batch_size = 12;
    c.base_lr = 1e-4;
    c.weight_decay = 1e-4;
    c.total_iters = 95;
    c.warmup_fraction = 0.1;
    c.augment = false;
    return c;
}

RunConfig paper_lp() {
    RunConfig c;
    c.modality = Mode::linear_probe;
    c.batch_size = 12;
    c.base_lr = 1e-2;
    c.weight_decay = 1e-2;
    c.total_iters = 620;
    c.warmup_fraction = 0.1;
    c.augment = false;
    return c;
}

// Desk presets are tuned on the synthetic corpus (4 classes x 10 scans,
// side 32): pretraining drops the reconstruction loss by ~60% in 300 iters,
// and finetuning needs the large batch and the long schedule to climb off
// the uniform-logit plateau of the tiny class signal.
RunConfig desk_pt() {
    RunConfig c;
    c.modality = Mode::pretrain;
    c.batch_size = 8;
    c.base_lr = 3e-3;
    c.weight_decay = 5e-2;
    c.total_iters = 300;
    c.warmup_fraction = 0.1;
    c.augment = true;
    return c;
}

RunConfig desk_ft() {
    RunConfig c;
    c.modality = Mode::finetune;
    c.batch_size = 32;
    c.base_lr = 3e-3;
    c.weight_decay = 1e-4;
    c.total_iters = 600;
    c.warmup_fraction = 0.05;
    c.augment = false;
    return c;
}

RunConfig desk_lp() {
    RunConfig c;
    c.modality = Mode::linear_probe;
    c.batch_size = 32;
    c.base_lr = 1e-2;
    c.weight_decay = 1e-2;
    c.total_iters = 300;
    c.warmup_fraction = 0.05;
    c.augment = false;
    return c;
}

double lr_at(int iter, const RunConfig& cfg) {
    const int warm = static_cast<int>(std::floor(cfg.warmup_fraction * cfg.total_iters));
    if (iter < warm) return cfg.base_lr * (iter + 1) / warm;
    const double span = cfg.total_iters - warm;
    return cfg.base_lr * 0.5 * (1.0 + std::cos(M_PI * (iter - warm) / span));
}

std::vector<double> class_weights(const std::vector<int>& counts) {
    long total = 0;
    for (int n : counts) {
        require(n >= 1, Errc::zero_class_count, "every class needs at least one sample");
        total += n;
    }
    std::vector<double> weights(counts.size());
    for (size_t i = 0; i < counts.size(); ++i)
        weights[i] = static_cast<double>(total) / counts[i];
    return weights;
}

std::vector<int> label_counts(const std::vector<int>& labels, int n_classes) {
    std::vector<int> counts(static_cast<size_t>(n_classes), 0);
    for (int l : labels) {
        require(l >= 0 && l < n_classes, Errc::label_out_of_range,
                "label " + std::to_string(l) + " outside 0.." + std::to_string(n_classes - 1));
        ++counts[static_cast<size_t>(l)];
    }
    return counts;
}

std::vector<int> binary_merge(const std::vector<int>& labels4) {
    std::vector<int> out;
    out.reserve(labels4.size());
    for (int l : labels4) {
        require(l >= 0 && l <= 3, Errc::label_out_of_range,
                "4-way label " + std::to_string(l) + " outside 0..3");
        out.push_back(l < 2 ? 0 : 1);
    }
    return out;
}

AugmentDraw draw_augment(Rng& rng) {
    AugmentDraw d;
    for (int axis = 0; axis < 3; ++axis) d.flip[axis] = rng.coin();
    d.jitter = 0.95 + 0.1 * rng.uniform01();
    return d;
}

namespace {

template <class Grid>
void flip_axis(Grid& grid, const std::array<int, 3>& dims, int axis) {
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                int c[3] = {x, y, z};
                if (c[axis] >= dims[axis] - 1 - c[axis]) continue;
                int m[3] = {x, y, z};
                m[axis] = dims[axis] - 1 - c[axis];
                std::swap(grid.at(c[0], c[1], c[2]), grid.at(m[0], m[1], m[2]));
            }
}

} // namespace

void apply_augment(Volume& volume, MaskVolume& mask, const AugmentDraw& draw) {
    require(volume.header.dims == mask.dims, Errc::dim_mismatch,
            "augment needs matching volume and mask dims");
    for (int axis = 0; axis < 3; ++axis)
        if (draw.flip[axis]) {
            flip_axis(volume, volume.header.dims, axis);
            flip_axis(mask, mask.dims, axis);
        }
    const float j = static_cast<float>(draw.jitter);
    for (float& v : volume.data) v = std::min(1.0f, std::max(0.0f, v * j));
}

void augment(Volume& volume, MaskVolume& mask, uint64_t seed) {
    Rng rng(seed);
    apply_augment(volume, mask, draw_augment(rng));
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(item.label);
    return out;
}

Dataset load_dataset(const std::vector<ManifestEntry>& entries, int side, bool require_labels) {
    require(!entries.empty(), Errc::data_error, "empty dataset");
    Dataset data;
    data.side = side;
    for (const auto& entry : entries) {
        DatasetItem item;
        item.volume = read_nifti(entry.volume_path);
        const auto& dims = item.volume.header.dims;
        if (dims[0] != side || dims[1] != side || dims[2] != side)
            fail(Errc::data_error, entry.volume_path + ": expected a " + std::to_string(side) +
                                       "^3 cube, got " + std::to_string(dims[0]) + "x" +
                                       std::to_string(dims[1]) + "x" + std::to_string(dims[2]));
        for (float v : item.volume.data)
            if (!(v >= -1e-6f && v <= 1.0f + 1e-6f))
                fail(Errc::data_error, entry.volume_path + ": intensities must be in [0, 1]");
        item.mask = read_mask(entry.mask_path, dims);
        item.label = entry.label;
        if (require_labels && item.label < 0)
            fail(Errc::data_error, entry.volume_path + ": missing label");
        item.id = entry.volume_path;
        data.items.push_back(std::move(item));
    }
    return data;
}

Dataset binary_view(const Dataset& data) {
    Dataset out = data;
    auto merged = binary_merge(out.labels());
    for (size_t i = 0; i < out.items.size(); ++i) out.items[i].label = merged[i];
    return out;
}

std::string format_loss_curve(const std::vector<LossRecord>& records) {
    std::string out;
    char line[128];
    for (const auto& r : records) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", r.iter, r.lr, r.loss);
        out += line;
    }
    return out;
}

void write_loss_curve(const std::string& path, const std::vector<LossRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_failure, "cannot open " + path);
    out << format_loss_curve(records);
    require(out.good(), Errc::io_failure, "write failed on " + path);
}

namespace {

// Seed-stream tags, one per independent random decision in the loops.
constexpr uint64_t kTagBatch = 0xB47C8ULL;
constexpr uint64_t kTagAugment = 0xA06F1ULL;
constexpr uint64_t kTagMask = 0x3A5CEULL;

void check_dataset_model(const Dataset& data, const ModelConfig& mc) {
    require(!data.items.empty(), Errc::data_error, "empty dataset");
    require(data.side == mc.side, Errc::config_error,
            "dataset side " + std::to_string(data.side) + " does not match model side " +
                std::to_string(mc.side));
}

std::vector<float> to_float(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

int argmax_row(const MatXf& row) {
    int best = 0;
    for (int c = 1; c < row.cols(); ++c)
        if (row(0, c) > row(0, best)) best = c;
    return best;
}

} // namespace

PretrainResult pretrain(const Dataset& data, const ModelConfig& mc, const RunConfig& rc,
                        const CheckpointHook& hook) {
    mc.validate();
    rc.validate();
    require(rc.modality == Mode::pretrain, Errc::config_error, "run modality must be pretrain");
    check_dataset_model(data, mc);

    const PatchGrid grid = mc.grid();
    const auto trainable = trainable_subset(mc, Mode::pretrain);
    PretrainResult result;
    result.params = init_params<float>(mc, rc.seed);

    for (int iter = 0; iter < rc.total_iters; ++iter) {
        ad::Tape<float> tape;
        auto bm = bind_model(tape, mc, result.params, trainable);
        Rng batch_rng(mix_seed(rc.seed, static_cast<uint64_t>(iter), kTagBatch));

        ad::Value<float> loss{};
        for (int slot = 0; slot < rc.batch_size; ++slot) {
            const auto& pick = data.items[batch_rng.below(data.items.size())];
            Volume vol = pick.volume;
            MaskVolume msk = pick.mask;
            if (rc.augment)
                augment(vol, msk,
                        mix_seed(rc.seed, static_cast<uint64_t>(iter), static_cast<uint64_t>(slot),
                                 kTagAugment));
            const MatXf rows = patchify(vol, grid);
            const auto sel = sample_mask(grid.n_patches(), rc.mask_ratio,
                                         mix_seed(rc.seed, static_cast<uint64_t>(iter),
                                                  static_cast<uint64_t>(slot), kTagMask));
            auto pred = pretrain_forward(bm, ad::constant(tape, rows), sel);
            auto item_loss = rc.loss_variant == LossVariant::standard_mae
                                 ? mae_loss(pred, rows, sel)
                                 : lung_aware_loss(pred, rows, sel,
                                                   lung_partition(msk, grid, rc.lung_threshold),
                                                   rc.alpha);
            loss = slot == 0 ? item_loss : ad::add(loss, item_loss);
        }
        loss = ad::scale(loss, 1.0f / static_cast<float>(rc.batch_size));

        tape.backward(loss.id);
        ParamMap<float> grads;
        for (const auto& name : trainable) grads.emplace(name, tape.grad(bm.params.at(name).id));
        const double lr = lr_at(iter, rc);
        adamw_step(result.params, grads, result.opt, lr, rc.weight_decay, trainable);
        result.curve.push_back({iter, lr, static_cast<double>(loss.scalar())});

        if (hook && ((iter + 1) % rc.checkpoint_every == 0 || iter + 1 == rc.total_iters))
            hook(iter + 1, result.params, result.opt);
    }
    return result;
}

EvalOutcome evaluate_classifier(const Dataset& data, const std::vector<int>& idx,
                                const ModelConfig& mc, const ParamMap<float>& params,
                                const std::vector<double>& weights) {
    require(!idx.empty(), Errc::data_error, "nothing to evaluate");
    const PatchGrid grid = mc.grid();
    ad::Tape<float> tape;
    auto bm = bind_model(tape, mc, params, {});
    const auto wts = to_float(weights);

    std::vector<ad::Value<float>> logit_rows;
    std::vector<int> truth, predicted;
    for (int i : idx) {
        require(i >= 0 && i < static_cast<int>(data.items.size()), Errc::index_out_of_range,
                "dataset index " + std::to_string(i));
        const auto& item = data.items[static_cast<size_t>(i)];
        auto logits = classify(bm, ad::constant(tape, patchify(item.volume, grid)));
        logit_rows.push_back(logits);
        truth.push_back(item.label);
        predicted.push_back(argmax_row(logits.val()));
    }
    auto loss = ad::cross_entropy_weighted(ad::concat_rows(logit_rows), truth, wts);
    EvalOutcome out;
    out.loss = static_cast<double>(loss.scalar());
    out.confusion = ConfusionMatrix::from_predictions(truth, predicted, mc.n_classes);
    return out;
}

FinetuneResult train_classifier(const Dataset& data, const std::vector<int>& train_idx,
                                const std::vector<int>& val_idx, const ModelConfig& mc,
                                const RunConfig& rc, const ParamMap<float>& init,
                                const CheckpointHook& hook) {
    mc.validate();
    rc.validate();
    require(rc.modality == Mode::finetune || rc.modality == Mode::linear_probe, Errc::config_error,
            "run modality must be finetune or linear_probe");
    check_dataset_model(data, mc);
    require(!train_idx.empty(), Errc::data_error, "empty training split");
    require(!val_idx.empty(), Errc::data_error, "empty validation split");
    for (int i : train_idx)
        require(i >= 0 && i < static_cast<int>(data.items.size()), Errc::index_out_of_range,
                "train index " + std::to_string(i));

    std::vector<int> train_labels;
    for (int i : train_idx) train_labels.push_back(data.items[static_cast<size_t>(i)].label);
    const auto weights = class_weights(label_counts(train_labels, mc.n_classes));
    const auto wts = to_float(weights);

    const PatchGrid grid = mc.grid();
    const auto trainable = trainable_subset(mc, rc.modality);
    const int steps_per_epoch =
        (static_cast<int>(train_idx.size()) + rc.batch_size - 1) / rc.batch_size;

    FinetuneResult result;
    result.params = init;

    for (int iter = 0; iter < rc.total_iters; ++iter) {
        ad::Tape<float> tape;
        auto bm = bind_model(tape, mc, result.params, trainable);
        Rng batch_rng(mix_seed(rc.seed, static_cast<uint64_t>(iter), kTagBatch));

        std::vector<ad::Value<float>> logit_rows;
        std::vector<int> batch_labels;
        for (int slot = 0; slot < rc.batch_size; ++slot) {
            const int i = train_idx[batch_rng.below(train_idx.size())];
            const auto& item = data.items[static_cast<size_t>(i)];
            Volume vol = item.volume;
            MaskVolume msk = item.mask;
            if (rc.augment)
                augment(vol, msk,
                        mix_seed(rc.seed, static_cast<uint64_t>(iter), static_cast<uint64_t>(slot),
                                 kTagAugment));
            logit_rows.push_back(classify(bm, ad::constant(tape, patchify(vol, grid))));
            batch_labels.push_back(item.label);
        }
        auto loss = ad::cross_entropy_weighted(ad::concat_rows(logit_rows), batch_labels, wts);

        tape.backward(loss.id);
        ParamMap<float> grads;
        for (const auto& name : trainable) grads.emplace(name, tape.grad(bm.params.at(name).id));
        const double lr = lr_at(iter, rc);
        adamw_step(result.params, grads, result.opt, lr, rc.weight_decay, trainable);
        result.curve.push_back({iter, lr, static_cast<double>(loss.scalar())});

        const bool last = iter + 1 == rc.total_iters;
        if ((iter + 1) % steps_per_epoch == 0 || last) {
            auto val = evaluate_classifier(data, val_idx, mc, result.params, weights);
            EpochRecord rec;
            rec.epoch = (iter + 1 + steps_per_epoch - 1) / steps_per_epoch;
            rec.val_loss = val.loss;
            rec.val_balanced_accuracy = balanced_accuracy(val.confusion);
            rec.val_weighted_f1 = weighted_f1(val.confusion);
            result.epochs.push_back(rec);
            if (last) {
                result.confusion = val.confusion;
                result.metrics = {rec.val_balanced_accuracy, rec.val_weighted_f1, rec.val_loss};
            }
        }
        if (hook && ((iter + 1) % rc.checkpoint_every == 0 || last))
            hook(iter + 1, result.params, result.opt);
    }
    return result;
}

ParamMap<float> adapt_head(const ParamMap<float>& params, const ModelConfig& old_cfg,
                           const ModelConfig& new_cfg, uint64_t seed) {
    ModelConfig same_classes = new_cfg;
    same_classes.n_classes = old_cfg.n_classes;
    require(same_classes.describe() == old_cfg.describe(), Errc::config_error,
            "adapt_head can only change the class count");
    ParamMap<float> out = init_params<float>(new_cfg, seed);
    for (auto& [name, tensor] : out) {
        if (name == "head.w" || name == "head.b") continue;
        auto it = params.find(name);
        require(it != params.end(), Errc::shape_mismatch, "missing tensor " + name);
        require(it->second.rows() == tensor.rows() && it->second.cols() == tensor.cols(),
                Errc::shape_mismatch, "tensor " + name + " has the wrong shape");
        tensor = it->second;
    }
    return out;
}

ProtocolResult run_split_protocol(const Dataset& data, const ModelConfig& mc, const RunConfig& rc,
                                  const ParamMap<float>& init, uint64_t split_seed_base) {
    ProtocolResult result;
    result.plan = make_splits(data.labels(), split_seed_base);
    for (const auto& split : result.plan.splits) {
        RunConfig per_split = rc;
        per_split.seed = mix_seed(rc.seed, split.seed);
        auto run = train_classifier(data, split.train, split.validation, mc, per_split, init);
        result.per_split.push_back(run.metrics);
        result.confusions.push_back(run.confusion);
    }
    result.report = format_metrics_report(result.per_split);
    return result;
}

} // namespace ctmae
