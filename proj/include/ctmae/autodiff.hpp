#pragma once

#include "ctmae/dense.hpp"
#include "ctmae/errors.hpp"

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ctmae::ad {

template <class Scalar>
using Mat = ctmae::MatX<Scalar>;

// Reverse-mode tape over dense row-major matrices. Nodes are appended in
// creation order, so every parent id is smaller than its consumer's id and a
// single reverse sweep visits the graph in topological order. Gradients
// accumulate additively at fan-out. One tape serves one forward/backward
// pass and is single-threaded; separate runs use separate tapes.
template <class Scalar>
class Tape {
public:
    using M = Mat<Scalar>;

    struct Node {
        M value;
        M grad;              // allocated on first contribution
        bool needs_grad = false;
        bool has_grad = false;
        std::function<void(Tape&)> backward; // empty for leaves
    };

    int add_leaf(M value, bool needs_grad) {
        check_finite(value);
        nodes_.push_back(Node{std::move(value), M(), needs_grad, false, nullptr});
        return static_cast<int>(nodes_.size()) - 1;
    }

    // The caller builds the backward closure against next_id() so it can read
    // its own gradient once inserted.
    int next_id() const { return static_cast<int>(nodes_.size()); }

    int add_node(M value, bool needs_grad, std::function<void(Tape&)> backward) {
        check_finite(value);
        nodes_.push_back(Node{std::move(value), M(), needs_grad, false, std::move(backward)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const M& value(int id) const { return nodes_[id].value; }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }

    // Gradient of a node, zeros if it never received a contribution.
    M grad(int id) const {
        const Node& n = nodes_[id];
        if (n.has_grad) return n.grad;
        return M::Zero(n.value.rows(), n.value.cols());
    }

    const M& grad_ref(int id) const { return nodes_[id].grad; }

    // Accumulate into a parent's gradient, skipping parents outside the
    // differentiated subgraph.
    template <class Expr>
    void accumulate(int id, const Expr& contribution) {
        Node& n = nodes_[id];
        if (!n.needs_grad) return;
        if (!n.has_grad) {
            n.grad = M::Zero(n.value.rows(), n.value.cols());
            n.has_grad = true;
        }
        n.grad += contribution;
    }

    void backward(int loss_id) {
        const Node& loss = nodes_[loss_id];
        if (loss.value.rows() != 1 || loss.value.cols() != 1)
            fail(Errc::non_scalar_loss, "backward needs a 1x1 loss, got " +
                                            std::to_string(loss.value.rows()) + "x" +
                                            std::to_string(loss.value.cols()));
        if (!loss.needs_grad) return; // loss does not depend on any tracked tensor
        accumulate(loss_id, M::Ones(1, 1));
        for (int id = loss_id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.needs_grad && n.has_grad && n.backward) n.backward(*this);
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    static void check_finite(const M& value) {
#ifndef NDEBUG
        assert(value.allFinite() && "non-finite value produced on the tape");
#else
        (void)value;
#endif
    }

    std::vector<Node> nodes_;
};

// Lightweight handle to a tape node.
template <class Scalar>
struct Value {
    Tape<Scalar>* tape = nullptr;
    int id = -1;

    const Mat<Scalar>& val() const { return tape->value(id); }
    Eigen::Index rows() const { return val().rows(); }
    Eigen::Index cols() const { return val().cols(); }
    bool needs_grad() const { return tape->needs_grad(id); }
    Scalar scalar() const { return val()(0, 0); }
};

namespace detail {

template <class S>
void check_same_tape(const Value<S>& a, const Value<S>& b) {
    require(a.tape == b.tape, Errc::shape_mismatch, "operands belong to different tapes");
}

inline std::string dim_str(Eigen::Index r, Eigen::Index c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

} // namespace detail

template <class S, class Derived>
Value<S> leaf(Tape<S>& tape, const Eigen::MatrixBase<Derived>& v, bool needs_grad = false) {
    return {&tape, tape.add_leaf(Mat<S>(v), needs_grad)};
}

template <class S, class Derived>
Value<S> constant(Tape<S>& tape, const Eigen::MatrixBase<Derived>& v) {
    return {&tape, tape.add_leaf(Mat<S>(v), false)};
}

// C = A * B
template <class S>
Value<S> matmul(Value<S> a, Value<S> b) {
    detail::check_same_tape(a, b);
    if (a.cols() != b.rows())
        fail(Errc::shape_mismatch, "matmul " + detail::dim_str(a.rows(), a.cols()) + " * " +
                                       detail::dim_str(b.rows(), b.cols()));
    Tape<S>& t = *a.tape;
    const int aid = a.id, bid = b.id, out = t.next_id();
    t.add_node(a.val() * b.val(), a.needs_grad() || b.needs_grad(), [out, aid, bid](Tape<S>& t) {
        const auto& g = t.grad_ref(out);
        t.accumulate(aid, g * t.value(bid).transpose());
        t.accumulate(bid, t.value(aid).transpose() * g);
    });
    return {&t, out};
}

// C = A * B^T  (the attention-score shape)
template <class S>
Value<S> matmul_nt(Value<S> a, Value<S> b) {
    detail::check_same_tape(a, b);
    if (a.cols() != b.cols())
        fail(Errc::shape_mismatch, "matmul_nt " + detail::dim_str(a.rows(), a.cols()) + " * " +
                                       detail::dim_str(b.rows(), b.cols()) + "^T");
    Tape<S>& t = *a.tape;
    const int aid = a.id, bid = b.id, out = t.next_id();
    t.add_node(a.val() * b.val().transpose(), a.needs_grad() || b.needs_grad(),
               [out, aid, bid](Tape<S>& t) {
                   const auto& g = t.grad_ref(out);
                   t.accumulate(aid, g * t.value(bid));
                   t.accumulate(bid, g.transpose() * t.value(aid));
               });
    return {&t, out};
}

template <class S>
Value<S> add(Value<S> a, Value<S> b) {
    detail::check_same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols())
        fail(Errc::shape_mismatch, "add " + detail::dim_str(a.rows(), a.cols()) + " + " +
                                       detail::dim_str(b.rows(), b.cols()));
    Tape<S>& t = *a.tape;
    const int aid = a.id, bid = b.id, out = t.next_id();
    t.add_node(a.val() + b.val(), a.needs_grad() || b.needs_grad(), [out, aid, bid](Tape<S>& t) {
        const auto& g = t.grad_ref(out);
        t.accumulate(aid, g);
        t.accumulate(bid, g);
    });
    return {&t, out};
}

template <class S>
Value<S> sub(Value<S> a, Value<S> b) {
    detail::check_same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols())
        fail(Errc::shape_mismatch, "sub " + detail::dim_str(a.rows(), a.cols()) + " - " +
                                       detail::dim_str(b.rows(), b.cols()));
    Tape<S>& t = *a.tape;
    const int aid = a.id, bid = b.id, out = t.next_id();
    t.add_node(a.val() - b.val(), a.needs_grad() || b.needs_grad(), [out, aid, bid](Tape<S>& t) {
        const auto& g = t.grad_ref(out);
        t.accumulate(aid, g);
        t.accumulate(bid, -g);
    });
    return {&t, out};
}

template <class S>
Value<S> operator+(Value<S> a, Value<S> b) { return add(a, b); }
template <class S>
Value<S> operator-(Value<S> a, Value<S> b) { return sub(a, b); }

template <class S>
Value<S> scale(Value<S> a, S c) {
    Tape<S>& t = *a.tape;
    const int aid = a.id, out = t.next_id();
    t.add_node(a.val() * c, a.needs_grad(), [out, aid, c](Tape<S>& t) {
        t.accumulate(aid, t.grad_ref(out) * c);
    });
    return {&t, out};
}

// A (n x d) + broadcast row v (1 x d)
template <class S>
Value<S> add_rowvec(Value<S> a, Value<S> v) {
    detail::check_same_tape(a, v);
    if (v.rows() != 1 || v.cols() != a.cols())
        fail(Errc::shape_mismatch, "add_rowvec " + detail::dim_str(a.rows(), a.cols()) + " + " +
                                       detail::dim_str(v.rows(), v.cols()));
    Tape<S>& t = *a.tape;
    Mat<S> y = a.val();
    y.rowwise() += Eigen::Matrix<S, 1, Eigen::Dynamic>(v.val().row(0));
    const int aid = a.id, vid = v.id, out = t.next_id();
    t.add_node(std::move(y), a.needs_grad() || v.needs_grad(), [out, aid, vid](Tape<S>& t) {
        const auto& g = t.grad_ref(out);
        t.accumulate(aid, g);
        t.accumulate(vid, g.colwise().sum());
    });
    return {&t, out};
}

// Per-row standardization followed by the gain/bias affine.
template <class S>
Value<S> layernorm(Value<S> x, Value<S> gain, Value<S> bias, S eps = S(1e-6)) {
    detail::check_same_tape(x, gain);
    detail::check_same_tape(x, bias);
    if (gain.rows() != 1 || bias.rows() != 1 || gain.cols() != x.cols() || bias.cols() != x.cols())
        fail(Errc::shape_mismatch, "layernorm expects 1x" + std::to_string(x.cols()) + " gain/bias");
    Tape<S>& t = *x.tape;

    using ColArr = Eigen::Array<S, Eigen::Dynamic, 1>;
    auto xa = x.val().array();
    ColArr mu = xa.rowwise().mean();
    auto centered = (xa.colwise() - mu).eval();
    ColArr inv_s = ((centered.square().rowwise().mean()) + eps).sqrt().inverse();
    auto xhat = (centered.colwise() * inv_s).eval();
    Mat<S> y = ((xhat.rowwise() * gain.val().row(0).array()).rowwise() + bias.val().row(0).array()).matrix();

    const int xid = x.id, gid = gain.id, bid = bias.id, out = t.next_id();
    t.add_node(std::move(y), x.needs_grad() || gain.needs_grad() || bias.needs_grad(),
               [out, xid, gid, bid, eps](Tape<S>& t) {
                   const auto& g = t.grad_ref(out);
                   auto xa = t.value(xid).array();
                   ColArr mu = xa.rowwise().mean();
                   auto centered = (xa.colwise() - mu).eval();
                   ColArr inv_s = ((centered.square().rowwise().mean()) + eps).sqrt().inverse();
                   auto xhat = (centered.colwise() * inv_s).eval();

                   t.accumulate(gid, (g.array() * xhat).colwise().sum().matrix());
                   t.accumulate(bid, g.colwise().sum());

                   auto dxhat = (g.array().rowwise() * t.value(gid).row(0).array()).eval();
                   ColArr m1 = dxhat.rowwise().mean();
                   ColArr m2 = (dxhat * xhat).rowwise().mean();
                   auto dx = (((dxhat.colwise() - m1) - (xhat.colwise() * m2)).colwise() * inv_s).matrix();
                   t.accumulate(xid, dx);
               });
    return {&t, out};
}

namespace detail {
template <class S>
constexpr S kGeluC0 = S(0.7978845608L); // sqrt(2/pi)
template <class S>
constexpr S kGeluC1 = S(0.044715L);
} // namespace detail

// tanh-approximation GELU.
template <class S>
Value<S> gelu(Value<S> x) {
    Tape<S>& t = *x.tape;
    const S c0 = detail::kGeluC0<S>, c1 = detail::kGeluC1<S>;
    auto xa = x.val().array();
    auto inner = (c0 * (xa + c1 * xa.cube())).eval();
    Mat<S> y = (S(0.5) * xa * (S(1) + inner.tanh())).matrix();
    const int xid = x.id, out = t.next_id();
    t.add_node(std::move(y), x.needs_grad(), [out, xid, c0, c1](Tape<S>& t) {
        auto xa = t.value(xid).array();
        auto th = (c0 * (xa + c1 * xa.cube())).tanh().eval();
        auto dydx = S(0.5) * (S(1) + th) + S(0.5) * xa * (S(1) - th.square()) * c0 * (S(1) + S(3) * c1 * xa.square());
        t.accumulate(xid, (t.grad_ref(out).array() * dydx).matrix());
    });
    return {&t, out};
}

// Numerically stable softmax over the last (column) dimension of each row.
template <class S>
Value<S> softmax_rows(Value<S> x) {
    Tape<S>& t = *x.tape;
    using ColArr = Eigen::Array<S, Eigen::Dynamic, 1>;
    auto xa = x.val().array();
    ColArr mx = xa.rowwise().maxCoeff();
    auto e = (xa.colwise() - mx).exp().eval();
    ColArr norm = e.rowwise().sum();
    Mat<S> y = (e.colwise() / norm).matrix();
    const int xid = x.id, out = t.next_id();
    t.add_node(std::move(y), x.needs_grad(), [out, xid](Tape<S>& t) {
        auto ya = t.value(out).array();
        auto ga = t.grad_ref(out).array();
        ColArr dot = (ga * ya).rowwise().sum();
        t.accumulate(xid, (ya * (ga.colwise() - dot)).matrix());
    });
    return {&t, out};
}

template <class S>
Value<S> slice_cols(Value<S> x, int c0, int n) {
    if (c0 < 0 || n <= 0 || c0 + n > x.cols())
        fail(Errc::shape_mismatch, "slice_cols [" + std::to_string(c0) + "," + std::to_string(c0 + n) +
                                       ") of " + std::to_string(x.cols()) + " columns");
    Tape<S>& t = *x.tape;
    const int xid = x.id, out = t.next_id();
    t.add_node(x.val().middleCols(c0, n), x.needs_grad(), [out, xid, c0, n](Tape<S>& t) {
        Mat<S> padded = Mat<S>::Zero(t.value(xid).rows(), t.value(xid).cols());
        padded.middleCols(c0, n) = t.grad_ref(out);
        t.accumulate(xid, padded);
    });
    return {&t, out};
}

template <class S>
Value<S> concat_cols(const std::vector<Value<S>>& parts) {
    require(!parts.empty(), Errc::shape_mismatch, "concat_cols of nothing");
    Tape<S>& t = *parts[0].tape;
    Eigen::Index rows = parts[0].rows(), cols = 0;
    bool ng = false;
    for (const auto& p : parts) {
        detail::check_same_tape(parts[0], p);
        require(p.rows() == rows, Errc::shape_mismatch, "concat_cols row mismatch");
        cols += p.cols();
        ng = ng || p.needs_grad();
    }
    Mat<S> y(rows, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        y.middleCols(at, p.cols()) = p.val();
        ids.push_back(p.id);
        offsets.push_back(at);
        at += p.cols();
    }
    const int out = t.next_id();
    t.add_node(std::move(y), ng, [out, ids, offsets](Tape<S>& t) {
        const auto& g = t.grad_ref(out);
        for (size_t i = 0; i < ids.size(); ++i)
            t.accumulate(ids[i], g.middleCols(offsets[i], t.value(ids[i]).cols()));
    });
    return {&t, out};
}

template <class S>
Value<S> concat_rows(const std::vector<Value<S>>& parts) {
    require(!parts.empty(), Errc::shape_mismatch, "concat_rows of nothing");
    Tape<S>& t = *parts[0].tape;
    Eigen::Index cols = parts[0].cols(), rows = 0;
    bool ng = false;
    for (const auto& p : parts) {
        detail::check_same_tape(parts[0], p);
        require(p.cols() == cols, Errc::shape_mismatch, "concat_rows column mismatch");
        rows += p.rows();
        ng = ng || p.needs_grad();
    }
    Mat<S> y(rows, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        y.middleRows(at, p.rows()) = p.val();
        ids.push_back(p.id);
        offsets.push_back(at);
        at += p.rows();
    }
    const int out = t.next_id();
    t.add_node(std::move(y), ng, [out, ids, offsets](Tape<S>& t) {
        const auto& g = t.grad_ref(out);
        for (size_t i = 0; i < ids.size(); ++i)
            t.accumulate(ids[i], g.middleRows(offsets[i], t.value(ids[i]).rows()));
    });
    return {&t, out};
}

template <class S>
Value<S> concat_rows(Value<S> a, Value<S> b) {
    return concat_rows(std::vector<Value<S>>{a, b});
}

// Output row i = x.row(indices[i]). Duplicate indices are legal; backward
// scatter-adds.
template <class S>
Value<S> gather_rows(Value<S> x, std::vector<int> indices) {
    for (int i : indices)
        if (i < 0 || i >= x.rows())
            fail(Errc::index_out_of_range,
                 "gather_rows index " + std::to_string(i) + " of " + std::to_string(x.rows()) + " rows");
    Tape<S>& t = *x.tape;
    Mat<S> y(static_cast<Eigen::Index>(indices.size()), x.cols());
    for (size_t i = 0; i < indices.size(); ++i) y.row(static_cast<Eigen::Index>(i)) = x.val().row(indices[i]);
    const int xid = x.id, out = t.next_id();
    t.add_node(std::move(y), x.needs_grad(), [out, xid, indices = std::move(indices)](Tape<S>& t) {
        const auto& g = t.grad_ref(out);
        Mat<S> dx = Mat<S>::Zero(t.value(xid).rows(), t.value(xid).cols());
        for (size_t i = 0; i < indices.size(); ++i)
            dx.row(indices[i]) += g.row(static_cast<Eigen::Index>(i));
        t.accumulate(xid, dx);
    });
    return {&t, out};
}

// Broadcast a 1 x d row to n rows.
template <class S>
Value<S> repeat_row(Value<S> v, int n) {
    require(v.rows() == 1, Errc::shape_mismatch, "repeat_row expects a single row");
    require(n >= 1, Errc::shape_mismatch, "repeat_row count must be positive");
    Tape<S>& t = *v.tape;
    const int vid = v.id, out = t.next_id();
    t.add_node(v.val().replicate(n, 1), v.needs_grad(), [out, vid](Tape<S>& t) {
        t.accumulate(vid, t.grad_ref(out).colwise().sum());
    });
    return {&t, out};
}

template <class S>
Value<S> sum_all(Value<S> x) {
    Tape<S>& t = *x.tape;
    Mat<S> y(1, 1);
    y(0, 0) = x.val().sum();
    const int xid = x.id, out = t.next_id();
    t.add_node(std::move(y), x.needs_grad(), [out, xid](Tape<S>& t) {
        const S g = t.grad_ref(out)(0, 0);
        t.accumulate(xid, Mat<S>::Constant(t.value(xid).rows(), t.value(xid).cols(), g));
    });
    return {&t, out};
}

// Mean absolute error between pred and a constant target, restricted to the
// given rows (all elements of those rows). Empty subset yields 0.
template <class S>
Value<S> mean_abs_error(Value<S> pred, const Mat<S>& target, std::vector<int> rows) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        fail(Errc::shape_mismatch, "mean_abs_error " + detail::dim_str(pred.rows(), pred.cols()) +
                                       " vs target " + detail::dim_str(target.rows(), target.cols()));
    for (int r : rows)
        if (r < 0 || r >= pred.rows())
            fail(Errc::index_out_of_range, "mean_abs_error row " + std::to_string(r));

    Tape<S>& t = *pred.tape;
    Mat<S> y(1, 1);
    if (rows.empty()) {
        y(0, 0) = S(0);
        return {&t, t.add_leaf(std::move(y), false)};
    }
    S total = S(0);
    for (int r : rows) total += (pred.val().row(r) - target.row(r)).cwiseAbs().sum();
    const S count = S(rows.size()) * S(pred.cols());
    y(0, 0) = total / count;

    const int pid = pred.id, out = t.next_id();
    t.add_node(std::move(y), pred.needs_grad(),
               [out, pid, target, rows = std::move(rows), count](Tape<S>& t) {
                   const S g = t.grad_ref(out)(0, 0) / count;
                   Mat<S> dp = Mat<S>::Zero(t.value(pid).rows(), t.value(pid).cols());
                   for (int r : rows) {
                       auto diff = (t.value(pid).row(r) - target.row(r)).array();
                       dp.row(r) = (diff.sign() * g).matrix();
                   }
                   t.accumulate(pid, dp);
               });
    return {&t, out};
}

// Class-weighted cross entropy with weighted-mean normalization:
//   L = sum_i w[y_i] * (-log softmax(logits_i)[y_i]) / sum_i w[y_i]
template <class S>
Value<S> cross_entropy_weighted(Value<S> logits, const std::vector<int>& labels,
                                const std::vector<S>& class_weights) {
    const Eigen::Index b = logits.rows(), c = logits.cols();
    require(static_cast<Eigen::Index>(labels.size()) == b, Errc::shape_mismatch,
            "one label per logits row required");
    require(static_cast<Eigen::Index>(class_weights.size()) == c, Errc::shape_mismatch,
            "one weight per class required");
    for (int y : labels)
        if (y < 0 || y >= c) fail(Errc::label_out_of_range, "label " + std::to_string(y));
    for (S w : class_weights)
        require(w >= S(0), Errc::invalid_bounds, "class weights must be non-negative");

    Tape<S>& t = *logits.tape;
    S weight_sum = S(0), loss_sum = S(0);
    std::vector<S> row_w(static_cast<size_t>(b));
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto row = logits.val().row(i);
        const S mx = row.maxCoeff();
        const S lse = mx + std::log((row.array() - mx).exp().sum());
        const S w = class_weights[static_cast<size_t>(labels[static_cast<size_t>(i)])];
        row_w[static_cast<size_t>(i)] = w;
        weight_sum += w;
        loss_sum += w * (lse - row(labels[static_cast<size_t>(i)]));
    }
    require(weight_sum > S(0), Errc::invalid_bounds, "total class weight of the batch is zero");

    Mat<S> y(1, 1);
    y(0, 0) = loss_sum / weight_sum;
    const int lid = logits.id, out = t.next_id();
    t.add_node(std::move(y), logits.needs_grad(),
               [out, lid, labels, row_w, weight_sum](Tape<S>& t) {
                   const S g = t.grad_ref(out)(0, 0);
                   const auto& x = t.value(lid);
                   Mat<S> dx(x.rows(), x.cols());
                   for (Eigen::Index i = 0; i < x.rows(); ++i) {
                       const auto row = x.row(i);
                       const S mx = row.maxCoeff();
                       auto e = (row.array() - mx).exp().eval();
                       auto p = (e / e.sum()).eval();
                       dx.row(i) = (p * (g * row_w[static_cast<size_t>(i)] / weight_sum)).matrix();
                       dx(i, labels[static_cast<size_t>(i)]) -= g * row_w[static_cast<size_t>(i)] / weight_sum;
                   }
                   t.accumulate(lid, dx);
               });
    return {&t, out};
}

// Standard scaled-dot-product multi-head self-attention with output
// projection, composed from the primitives above.
template <class S>
Value<S> multihead_attention(Value<S> x, Value<S> wq, Value<S> bq, Value<S> wk, Value<S> bk,
                             Value<S> wv, Value<S> bv, Value<S> wo, Value<S> bo, int heads) {
    const Eigen::Index d = x.cols();
    require(heads >= 1, Errc::head_divisibility, "need at least one head");
    if (d % heads != 0)
        fail(Errc::head_divisibility,
             "model dim " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
    const int dh = static_cast<int>(d) / heads;
    const S att_scale = S(1) / std::sqrt(S(dh));

    Value<S> q = add_rowvec(matmul(x, wq), bq);
    Value<S> k = add_rowvec(matmul(x, wk), bk);
    Value<S> v = add_rowvec(matmul(x, wv), bv);

    std::vector<Value<S>> head_outputs;
    head_outputs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Value<S> qh = slice_cols(q, h * dh, dh);
        Value<S> kh = slice_cols(k, h * dh, dh);
        Value<S> vh = slice_cols(v, h * dh, dh);
        Value<S> scores = scale(matmul_nt(qh, kh), att_scale);
        Value<S> weights = softmax_rows(scores);
        head_outputs.push_back(matmul(weights, vh));
    }
    return add_rowvec(matmul(concat_cols(head_outputs), wo), bo);
}

} // namespace ctmae::ad
