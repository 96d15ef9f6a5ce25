#pragma once

#include "ctmae/autodiff.hpp"
#include "ctmae/dense.hpp"
#include "ctmae/errors.hpp"
#include "ctmae/patching.hpp"
#include "ctmae/rng.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ctmae {

struct ModelConfig {
    int side = 32;
    int patch = 8;
    int enc_dim = 64;
    int enc_layers = 2;
    int enc_heads = 4;
    int dec_dim = 32;
    int dec_layers = 1;
    int dec_heads = 4;
    int mlp_ratio = 4;
    int n_classes = 4;
    // When set, the encoder runs over every patch and masking removes
    // embeddings afterwards; the default encodes visible patches only.
    bool mask_after_encode = false;

    PatchGrid grid() const { return PatchGrid(side, patch); }

    void validate() const {
        grid(); // side/patch divisibility
        require(enc_dim >= 1 && enc_layers >= 0 && dec_dim >= 1 && dec_layers >= 0,
                Errc::config_error, "model dimensions must be positive");
        require(mlp_ratio >= 1, Errc::config_error, "mlp_ratio must be at least 1");
        require(n_classes >= 2, Errc::config_error, "need at least 2 classes");
        require(enc_heads >= 1 && enc_dim % enc_heads == 0, Errc::head_divisibility,
                "enc_dim must divide into enc_heads");
        require(dec_heads >= 1 && dec_dim % dec_heads == 0, Errc::head_divisibility,
                "dec_dim must divide into dec_heads");
    }

    std::string describe() const {
        return "side=" + std::to_string(side) + ";patch=" + std::to_string(patch) +
               ";enc=" + std::to_string(enc_dim) + "/" + std::to_string(enc_layers) + "/" +
               std::to_string(enc_heads) + ";dec=" + std::to_string(dec_dim) + "/" +
               std::to_string(dec_layers) + "/" + std::to_string(dec_heads) +
               ";mlp=" + std::to_string(mlp_ratio) + ";classes=" + std::to_string(n_classes) +
               ";mask_after_encode=" + (mask_after_encode ? "1" : "0");
    }
    uint64_t hash() const { return fnv1a_str(describe()); }
};

inline ModelConfig desk_model() { return ModelConfig{}; }

inline ModelConfig paper_model() {
    ModelConfig c;
    c.side = 128;
    c.patch = 16;
    c.enc_dim = 768;
    c.enc_layers = 12;
    c.enc_heads = 12;
    c.dec_dim = 384;
    c.dec_layers = 4;
    c.dec_heads = 12;
    c.mlp_ratio = 4;
    c.n_classes = 4;
    return c;
}

// Small enough for finite-difference gradient checks.
inline ModelConfig tiny_model() {
    ModelConfig c;
    c.side = 16;
    c.patch = 8;
    c.enc_dim = 16;
    c.enc_layers = 1;
    c.enc_heads = 2;
    c.dec_dim = 16;
    c.dec_layers = 1;
    c.dec_heads = 2;
    c.mlp_ratio = 2;
    c.n_classes = 4;
    return c;
}

enum class Mode { pretrain, finetune, linear_probe };

template <class S>
using ParamMap = std::map<std::string, MatX<S>>;

struct TensorShape {
    std::string name;
    int rows;
    int cols;
};

// Canonical tensor directory; checkpoints and optimizer state follow it.
inline std::vector<TensorShape> param_shapes(const ModelConfig& cfg) {
    cfg.validate();
    const int pd = cfg.grid().patch_dim();
    std::vector<TensorShape> out;
    auto push = [&](const std::string& n, int r, int c) { out.push_back({n, r, c}); };

    auto push_block = [&](const std::string& prefix, int dim, int mlp) {
        push(prefix + "norm1.g", 1, dim);
        push(prefix + "norm1.b", 1, dim);
        for (const char* w : {"wq", "wk", "wv", "wo"}) push(prefix + "attn." + w, dim, dim);
        for (const char* b : {"bq", "bk", "bv", "bo"}) push(prefix + "attn." + b, 1, dim);
        push(prefix + "norm2.g", 1, dim);
        push(prefix + "norm2.b", 1, dim);
        push(prefix + "mlp.w1", dim, mlp * dim);
        push(prefix + "mlp.b1", 1, mlp * dim);
        push(prefix + "mlp.w2", mlp * dim, dim);
        push(prefix + "mlp.b2", 1, dim);
    };

    push("patch_embed.w", pd, cfg.enc_dim);
    push("patch_embed.b", 1, cfg.enc_dim);
    push("cls_token", 1, cfg.enc_dim);
    for (int l = 0; l < cfg.enc_layers; ++l)
        push_block("enc." + std::to_string(l) + ".", cfg.enc_dim, cfg.mlp_ratio);
    push("enc.norm.g", 1, cfg.enc_dim);
    push("enc.norm.b", 1, cfg.enc_dim);

    push("dec_embed.w", cfg.enc_dim, cfg.dec_dim);
    push("dec_embed.b", 1, cfg.dec_dim);
    push("mask_token", 1, cfg.dec_dim);
    for (int l = 0; l < cfg.dec_layers; ++l)
        push_block("dec." + std::to_string(l) + ".", cfg.dec_dim, cfg.mlp_ratio);
    if (cfg.dec_layers > 0) {
        push("dec.norm.g", 1, cfg.dec_dim);
        push("dec.norm.b", 1, cfg.dec_dim);
    }
    push("dec_pred.w", cfg.dec_dim, pd);
    push("dec_pred.b", 1, pd);

    push("head.norm.g", 1, cfg.enc_dim);
    push("head.norm.b", 1, cfg.enc_dim);
    push("head.w", cfg.enc_dim, cfg.n_classes);
    push("head.b", 1, cfg.n_classes);
    return out;
}

inline std::vector<std::string> linear_probe_params() {
    return {"head.norm.g", "head.norm.b", "head.w", "head.b"};
}

inline std::vector<std::string> trainable_subset(const ModelConfig& cfg, Mode mode) {
    if (mode == Mode::linear_probe) return linear_probe_params();
    std::vector<std::string> all;
    for (const auto& s : param_shapes(cfg)) all.push_back(s.name);
    return all;
}

// Gains start at 1, biases at 0, everything else truncated normal
// sigma 0.02 clipped at 2 sigma. Per-tensor seeding keeps the draw
// independent of directory order.
template <class S>
ParamMap<S> init_params(const ModelConfig& cfg, uint64_t seed) {
    ParamMap<S> params;
    for (const auto& shape : param_shapes(cfg)) {
        MatX<S> m(shape.rows, shape.cols);
        const auto dot = shape.name.rfind('.');
        const std::string last = dot == std::string::npos ? shape.name : shape.name.substr(dot + 1);
        if (last == "g") {
            m.setOnes();
        } else if (!last.empty() && last[0] == 'b') {
            m.setZero();
        } else {
            Rng rng(mix_seed(seed, fnv1a_str(shape.name)));
            for (int i = 0; i < shape.rows; ++i)
                for (int j = 0; j < shape.cols; ++j)
                    m(i, j) = static_cast<S>(rng.truncated_normal(0.02));
        }
        params.emplace(shape.name, std::move(m));
    }
    return params;
}

// Fixed 3D positional table over the patch grid, n^3 rows. The dim splits
// into three equal per-axis bands of standard sine/cosine pairs keyed by the
// patch coordinate along that axis; leftover dims stay zero.
template <class S>
MatX<S> sinusoidal_pos3d(int n_per_axis, int dim) {
    require(n_per_axis >= 1 && dim >= 1, Errc::config_error, "positional table needs positive dims");
    const int n = n_per_axis;
    const int band = dim / 3;
    MatX<S> table = MatX<S>::Zero(static_cast<Eigen::Index>(n) * n * n, dim);
    if (band == 0) return table;
    for (int pz = 0; pz < n; ++pz)
        for (int py = 0; py < n; ++py)
            for (int px = 0; px < n; ++px) {
                const int k = px + n * (py + n * pz);
                const int coord[3] = {px, py, pz};
                for (int axis = 0; axis < 3; ++axis)
                    for (int j = 0; j < band; ++j) {
                        const double omega = std::pow(10000.0, -2.0 * (j / 2) / band);
                        const double arg = coord[axis] * omega;
                        table(k, axis * band + j) =
                            static_cast<S>(j % 2 == 0 ? std::sin(arg) : std::cos(arg));
                    }
            }
    return table;
}

// Parameters placed on a tape as leaves, ready for forward passes. Tensors
// in `trainable` receive gradients; the rest are frozen constants.
template <class S>
struct BoundModel {
    const ModelConfig* cfg = nullptr;
    ad::Tape<S>* tape = nullptr;
    std::map<std::string, ad::Value<S>> params;
    MatX<S> pos_enc; // n_patches x enc_dim
    MatX<S> pos_dec; // n_patches x dec_dim

    ad::Value<S> at(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) fail(Errc::config_error, "model has no tensor named " + name);
        return it->second;
    }
};

template <class S>
BoundModel<S> bind_model(ad::Tape<S>& tape, const ModelConfig& cfg, const ParamMap<S>& params,
                   const std::vector<std::string>& trainable) {
    cfg.validate();
    const auto shapes = param_shapes(cfg);
    require(params.size() == shapes.size(), Errc::shape_mismatch,
            "parameter map does not match the model directory");
    std::set<std::string> train(trainable.begin(), trainable.end());
    BoundModel<S> m;
    m.cfg = &cfg;
    m.tape = &tape;
    for (const auto& shape : shapes) {
        auto it = params.find(shape.name);
        if (it == params.end()) fail(Errc::shape_mismatch, "missing tensor " + shape.name);
        if (it->second.rows() != shape.rows || it->second.cols() != shape.cols)
            fail(Errc::shape_mismatch, "tensor " + shape.name + " has the wrong shape");
        m.params.emplace(shape.name, ad::leaf(tape, it->second, train.count(shape.name) > 0));
    }
    const int n = cfg.grid().n_per_axis();
    m.pos_enc = sinusoidal_pos3d<S>(n, cfg.enc_dim);
    m.pos_dec = sinusoidal_pos3d<S>(n, cfg.dec_dim);
    return m;
}

namespace detail {

template <class S>
MatX<S> rows_at(const MatX<S>& m, const std::vector<int>& idx) {
    MatX<S> out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
}

template <class S>
ad::Value<S> transformer_block(BoundModel<S>& m, ad::Value<S> x, const std::string& prefix,
                               int heads) {
    auto h = ad::layernorm(x, m.at(prefix + "norm1.g"), m.at(prefix + "norm1.b"));
    auto attn = ad::multihead_attention(h, m.at(prefix + "attn.wq"), m.at(prefix + "attn.bq"),
                                        m.at(prefix + "attn.wk"), m.at(prefix + "attn.bk"),
                                        m.at(prefix + "attn.wv"), m.at(prefix + "attn.bv"),
                                        m.at(prefix + "attn.wo"), m.at(prefix + "attn.bo"), heads);
    x = ad::add(x, attn);
    auto h2 = ad::layernorm(x, m.at(prefix + "norm2.g"), m.at(prefix + "norm2.b"));
    auto up = ad::gelu(ad::add_rowvec(ad::matmul(h2, m.at(prefix + "mlp.w1")), m.at(prefix + "mlp.b1")));
    auto down = ad::add_rowvec(ad::matmul(up, m.at(prefix + "mlp.w2")), m.at(prefix + "mlp.b2"));
    return ad::add(x, down);
}

inline void check_keep(const std::vector<int>& keep, int n) {
    require(!keep.empty(), Errc::index_out_of_range, "keep list is empty");
    int prev = -1;
    for (int k : keep) {
        if (k < 0 || k >= n)
            fail(Errc::index_out_of_range, "patch index " + std::to_string(k) + " outside 0.." +
                                               std::to_string(n - 1));
        if (k <= prev) fail(Errc::index_out_of_range, "keep list must be strictly increasing");
        prev = k;
    }
}

} // namespace detail

// Embed the kept patch rows, add their positional rows (CLS position is all
// zeros), run the pre-norm encoder stack, finish with the encoder layernorm.
template <class S>
ad::Value<S> encode(BoundModel<S>& m, ad::Value<S> patch_rows, const std::vector<int>& keep,
                    bool with_cls) {
    const ModelConfig& cfg = *m.cfg;
    const PatchGrid grid = cfg.grid();
    if (patch_rows.rows() != grid.n_patches() || patch_rows.cols() != grid.patch_dim())
        fail(Errc::shape_mismatch, "expected " + std::to_string(grid.n_patches()) + "x" +
                                       std::to_string(grid.patch_dim()) + " patch rows");
    detail::check_keep(keep, grid.n_patches());

    ad::Tape<S>& t = *m.tape;
    auto x = ad::add_rowvec(ad::matmul(ad::gather_rows(patch_rows, keep), m.at("patch_embed.w")),
                            m.at("patch_embed.b"));
    x = ad::add(x, ad::constant(t, detail::rows_at(m.pos_enc, keep)));
    if (with_cls) x = ad::concat_rows(m.at("cls_token"), x);
    for (int l = 0; l < cfg.enc_layers; ++l)
        x = detail::transformer_block(m, x, "enc." + std::to_string(l) + ".", cfg.enc_heads);
    return ad::layernorm(x, m.at("enc.norm.g"), m.at("enc.norm.b"));
}

// Project encoded visible rows into the decoder width, splice mask tokens at
// the masked indices, add decoder positions, decode, and predict one voxel
// row per patch. With zero decoder layers this is an affine map of its input.
template <class S>
ad::Value<S> decode_reconstruct(BoundModel<S>& m, ad::Value<S> encoded_visible,
                                const MaskSelection& sel) {
    const ModelConfig& cfg = *m.cfg;
    const int n = cfg.grid().n_patches();
    const int v = static_cast<int>(sel.visible.size());
    const int k = static_cast<int>(sel.masked.size());
    require(v + k == n, Errc::shape_mismatch, "selection does not cover the patch grid");
    if (encoded_visible.rows() != v || encoded_visible.cols() != cfg.enc_dim)
        fail(Errc::shape_mismatch, "expected " + std::to_string(v) + "x" +
                                       std::to_string(cfg.enc_dim) + " encoded rows");

    std::vector<int> perm(static_cast<size_t>(n), -1);
    for (int i = 0; i < v; ++i) perm[static_cast<size_t>(sel.visible[static_cast<size_t>(i)])] = i;
    for (int j = 0; j < k; ++j) {
        int& slot = perm[static_cast<size_t>(sel.masked[static_cast<size_t>(j)])];
        require(slot == -1, Errc::shape_mismatch, "selection lists overlap");
        slot = v + j;
    }
    for (int s : perm) require(s >= 0, Errc::shape_mismatch, "selection misses a patch index");

    ad::Tape<S>& t = *m.tape;
    auto vis = ad::add_rowvec(ad::matmul(encoded_visible, m.at("dec_embed.w")), m.at("dec_embed.b"));
    auto stacked = k > 0 ? ad::concat_rows(vis, ad::repeat_row(m.at("mask_token"), k)) : vis;
    auto seq = ad::add(ad::gather_rows(stacked, perm), ad::constant(t, m.pos_dec));
    for (int l = 0; l < cfg.dec_layers; ++l)
        seq = detail::transformer_block(m, seq, "dec." + std::to_string(l) + ".", cfg.dec_heads);
    if (cfg.dec_layers > 0) seq = ad::layernorm(seq, m.at("dec.norm.g"), m.at("dec.norm.b"));
    return ad::add_rowvec(ad::matmul(seq, m.at("dec_pred.w")), m.at("dec_pred.b"));
}

// Reconstruction rows for all patches under the configured masking location.
template <class S>
ad::Value<S> pretrain_forward(BoundModel<S>& m, ad::Value<S> patch_rows, const MaskSelection& sel) {
    if (!m.cfg->mask_after_encode) {
        auto enc = encode(m, patch_rows, sel.visible, false);
        return decode_reconstruct(m, enc, sel);
    }
    std::vector<int> all(static_cast<size_t>(m.cfg->grid().n_patches()));
    std::iota(all.begin(), all.end(), 0);
    auto enc_all = encode(m, patch_rows, all, false);
    return decode_reconstruct(m, ad::gather_rows(enc_all, sel.visible), sel);
}

// CLS-token classification: encode everything with CLS, normalize the CLS
// row, project to class logits (1 x n_classes).
template <class S>
ad::Value<S> classify(BoundModel<S>& m, ad::Value<S> patch_rows) {
    std::vector<int> all(static_cast<size_t>(m.cfg->grid().n_patches()));
    std::iota(all.begin(), all.end(), 0);
    auto enc = encode(m, patch_rows, all, true);
    auto cls = ad::gather_rows(enc, std::vector<int>{0});
    auto normed = ad::layernorm(cls, m.at("head.norm.g"), m.at("head.norm.b"));
    return ad::add_rowvec(ad::matmul(normed, m.at("head.w")), m.at("head.b"));
}

} // namespace ctmae
