#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ctmae/errors.hpp"
#include "ctmae/training.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>

using namespace ctmae;
namespace fs = std::filesystem;

namespace {

Volume make_cube(int side, const std::function<float(int, int, int)>& f) {
    Volume v;
    v.header.dims = {side, side, side};
    v.data.resize(static_cast<size_t>(side) * side * side);
    for (int z = 0; z < side; ++z)
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) v.at(x, y, z) = f(x, y, z);
    return v;
}

MaskVolume make_mask(int side, const std::function<bool(int, int, int)>& f) {
    MaskVolume m;
    m.dims = {side, side, side};
    m.data.resize(static_cast<size_t>(side) * side * side);
    for (int z = 0; z < side; ++z)
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) m.at(x, y, z) = f(x, y, z) ? 1 : 0;
    return m;
}

// Smooth per-item test volumes: bounded, deterministic, distinct per label.
Dataset toy_dataset(int side, int n_items, int n_classes) {
    Dataset data;
    data.side = side;
    for (int i = 0; i < n_items; ++i) {
        DatasetItem item;
        const int label = i % n_classes;
        item.volume = make_cube(side, [&](int x, int y, int z) {
            double u = (x + 0.5) / side, v = (y + 0.5) / side, w = (z + 0.5) / side;
            double val = 0.3 + 0.2 * std::sin(2 * M_PI * (label + 1) * w) * std::sin(M_PI * u) +
                         0.1 * v + 0.02 * ((i * 31 + x * 7 + y * 3 + z) % 13) / 13.0;
            return static_cast<float>(std::min(1.0, std::max(0.0, val)));
        });
        item.mask = make_mask(side, [&](int x, int y, int) { return x + y < side; });
        item.label = label;
        item.id = "toy" + std::to_string(i);
        data.items.push_back(std::move(item));
    }
    return data;
}

bool params_equal(const ParamMap<float>& a, const ParamMap<float>& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [name, tensor] : a) {
        auto it = b.find(name);
        if (it == b.end() || tensor.rows() != it->second.rows() ||
            tensor.cols() != it->second.cols())
            return false;
        if (tensor != it->second) return false;
    }
    return true;
}

} // namespace

TEST_CASE("published run configurations") {
    auto pt = paper_pt();
    CHECK(pt.batch_size == 64);
    CHECK(pt.base_lr == 3e-4);
    CHECK(pt.weight_decay == 5e-2);
    CHECK(pt.total_iters == 198000);
    CHECK(pt.warmup_fraction == 0.1);
    CHECK(pt.augment);
    CHECK(pt.mask_ratio == 0.75);
    pt.validate();

    auto ft = paper_ft();
    CHECK(ft.batch_size == 12);
    CHECK(ft.base_lr == 1e-4);
    CHECK(ft.weight_decay == 1e-4);
    CHECK(ft.total_iters == 95);
    CHECK(ft.modality == Mode::finetune);
    ft.validate();

    auto lp = paper_lp();
    CHECK(lp.batch_size == 12);
    CHECK(lp.base_lr == 1e-2);
    CHECK(lp.weight_decay == 1e-2);
    CHECK(lp.total_iters == 620);
    CHECK(lp.modality == Mode::linear_probe);
    lp.validate();

    desk_pt().validate();
    desk_ft().validate();
    desk_lp().validate();

    RunConfig bad = desk_pt();
    bad.mask_ratio = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = desk_pt();
    bad.alpha = -0.5;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("learning rate schedule endpoints and monotonicity") {
    auto pt = paper_pt();
    const int warm = 19800; // floor(0.1 * 198000)
    CHECK(lr_at(warm - 1, pt) == doctest::Approx(3e-4).epsilon(1e-12));
    CHECK(lr_at(0, pt) == doctest::Approx(3e-4 / warm).epsilon(1e-12));
    const int mid = warm + (pt.total_iters - warm) / 2;
    CHECK(lr_at(mid, pt) == doctest::Approx(1.5e-4).epsilon(1e-9));
    CHECK(lr_at(pt.total_iters - 1, pt) < 1e-8);
    CHECK(lr_at(pt.total_iters - 1, pt) > 0.0);

    RunConfig small = desk_pt();
    small.total_iters = 100;
    small.base_lr = 1.0;
    double peak = 0.0;
    for (int i = 1; i < 100; ++i) {
        double prev = lr_at(i - 1, small), cur = lr_at(i, small);
        if (i < 10)
            CHECK(cur >= prev);
        else
            CHECK(cur <= prev);
        peak = std::max(peak, cur);
    }
    CHECK(peak == doctest::Approx(1.0));

    small.warmup_fraction = 0.0; // pure cosine from the start
    CHECK(lr_at(0, small) == doctest::Approx(1.0));
}

TEST_CASE("adamw first step closed form") {
    ParamMap<float> params, grads;
    params.emplace("p", MatXf::Constant(1, 1, 0.7f));
    grads.emplace("p", MatXf::Constant(1, 1, 1.0f));
    AdamWState<float> state;
    adamw_step(params, grads, state, 0.1, 0.0, {"p"});
    CHECK(params.at("p")(0, 0) == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(state.step == 1);
    CHECK(state.m.at("p")(0, 0) == doctest::Approx(0.1));
    CHECK(state.v.at("p")(0, 0) == doctest::Approx(0.001));
}

TEST_CASE("adamw pure decay and determinism") {
    ParamMap<float> params, grads;
    params.emplace("p", MatXf::Constant(2, 2, 2.0f));
    grads.emplace("p", MatXf::Zero(2, 2));
    AdamWState<float> state;
    adamw_step(params, grads, state, 0.1, 0.02, {"p"});
    CHECK(params.at("p")(1, 1) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.02)).epsilon(1e-7));

    auto run = [] {
        ParamMap<float> p, g;
        p.emplace("a", MatXf::Constant(3, 2, 0.5f));
        g.emplace("a", MatXf::Constant(3, 2, 0.25f));
        AdamWState<float> s;
        for (int i = 0; i < 5; ++i) adamw_step(p, g, s, 0.01, 0.1, {"a"});
        return p;
    };
    CHECK(params_equal(run(), run()));

    ParamMap<float> bad_g;
    bad_g.emplace("p", MatXf::Zero(1, 2));
    CHECK_THROWS_AS(adamw_step(params, bad_g, state, 0.1, 0.0, {"p"}), Error);
    CHECK_THROWS_AS(adamw_step(params, grads, state, 0.1, 0.0, {"missing"}), Error);
}

TEST_CASE("class weights follow N over n") {
    auto w = class_weights({27, 21, 18, 39});
    CHECK(w[0] == doctest::Approx(105.0 / 27).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(105.0 / 18).epsilon(1e-12));
    CHECK(w[3] == doctest::Approx(105.0 / 39).epsilon(1e-12));

    auto balanced = class_weights({10, 10});
    CHECK(balanced[0] == doctest::Approx(2.0));
    CHECK(balanced[1] == doctest::Approx(2.0));

    CHECK_THROWS_AS(class_weights({5, 0, 3}), Error);
    try {
        class_weights({5, 0});
    } catch (const Error& e) {
        CHECK(e.code() == Errc::zero_class_count);
    }
}

TEST_CASE("binary merge of the four-way labels") {
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c) {
        int n = (c == 0 ? 27 : c == 1 ? 21 : c == 2 ? 18 : 39);
        for (int i = 0; i < n; ++i) labels.push_back(c);
    }
    auto merged = binary_merge(labels);
    auto counts = label_counts(merged, 2);
    CHECK(counts == std::vector<int>{48, 57});

    CHECK(binary_merge({}).empty());
    CHECK_THROWS_AS(binary_merge({0, 4}), Error);
}

TEST_CASE("lung aware loss decomposition identity") {
    Rng rng(99);
    const int n = 64, pd = 8;
    MatXd target(n, pd), recon_v(n, pd);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < pd; ++j) {
            target(i, j) = rng.uniform01();
            recon_v(i, j) = rng.uniform01();
        }
    auto sel = sample_mask(n, 0.75, 1234);

    LungPartition part;
    for (int i = 0; i < n; ++i) (rng.coin() ? part.lung : part.non_lung).push_back(i);

    auto loss_at = [&](double alpha) {
        ad::Tape<double> tape;
        auto recon = ad::leaf(tape, recon_v, false);
        return lung_aware_loss(recon, target, sel, part, alpha).scalar();
    };
    const double e_lung = loss_at(0.0);
    const double e_non = loss_at(1.0) - e_lung;

    std::vector<int> ml, mn;
    std::set_intersection(sel.masked.begin(), sel.masked.end(), part.lung.begin(),
                          part.lung.end(), std::back_inserter(ml));
    std::set_intersection(sel.masked.begin(), sel.masked.end(), part.non_lung.begin(),
                          part.non_lung.end(), std::back_inserter(mn));
    double total = 0.0;
    for (int r : sel.masked) total += (recon_v.row(r) - target.row(r)).cwiseAbs().sum();
    CHECK(double(ml.size()) * e_lung * pd + double(mn.size()) * e_non * pd ==
          doctest::Approx(total).epsilon(1e-5));

    // alpha weighting is linear in the non-lung term
    CHECK(loss_at(0.01) == doctest::Approx(e_lung + 0.01 * e_non).epsilon(1e-9));
    CHECK_THROWS_AS(loss_at(-1.0), Error);
}

TEST_CASE("lung aware loss degenerate partitions") {
    const int n = 8, pd = 4;
    MatXd target = MatXd::Zero(n, pd);
    MatXd off = MatXd::Constant(n, pd, 1.0);
    auto sel = sample_mask(n, 0.5, 7);

    // threshold 0 marks every patch as lung, collapsing to the plain loss
    MaskVolume mask = make_mask(4, [](int, int, int) { return false; });
    auto part_all = lung_partition(mask, PatchGrid(4, 2), 0.0);
    CHECK(part_all.lung.size() == 8);
    ad::Tape<double> tape;
    auto recon = ad::leaf(tape, off, false);
    auto aware = lung_aware_loss(recon, target, sel, part_all, 7.0);
    auto plain = mae_loss(recon, target, sel);
    CHECK(aware.scalar() == doctest::Approx(plain.scalar()).epsilon(1e-12));
    CHECK(plain.scalar() == doctest::Approx(1.0));

    // empty lung set leaves only the alpha term
    LungPartition none;
    for (int i = 0; i < n; ++i) none.non_lung.push_back(i);
    auto only_non = lung_aware_loss(recon, target, sel, none, 0.25);
    CHECK(only_non.scalar() == doctest::Approx(0.25));

    // recon = target + 1 everywhere: both set errors are 1, L = 1 + alpha
    LungPartition half;
    for (int i = 0; i < n; ++i) (i < 4 ? half.lung : half.non_lung).push_back(i);
    auto both = lung_aware_loss(recon, target, sel, half, 0.01);
    CHECK(both.scalar() == doctest::Approx(1.01));
}

TEST_CASE("weighted cross entropy is invariant to weight rescaling") {
    Rng rng(5);
    MatXd logits_v(6, 4);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j) logits_v(i, j) = rng.normal();
    std::vector<int> labels{0, 1, 2, 3, 1, 2};
    std::vector<double> w{3.0, 1.5, 2.0, 0.75}, w3;
    for (double x : w) w3.push_back(3.0 * x);

    ad::Tape<double> tape;
    auto logits = ad::leaf(tape, logits_v, false);
    auto a = ad::cross_entropy_weighted(logits, labels, w);
    auto b = ad::cross_entropy_weighted(logits, labels, w3);
    CHECK(a.scalar() == b.scalar());
}

TEST_CASE("augmentation identities and range") {
    const int side = 6;
    auto vol = make_cube(side, [](int x, int y, int z) {
        return static_cast<float>((x + 10 * y + 100 * z) / 600.0);
    });
    auto mask = make_mask(side, [](int x, int, int) { return x < 3; });

    Volume v = vol;
    MaskVolume m = mask;
    apply_augment(v, m, AugmentDraw{{false, false, false}, 1.0});
    CHECK(v.data == vol.data);
    CHECK(m.data == mask.data);

    AugmentDraw flips{{true, false, true}, 1.0};
    apply_augment(v, m, flips);
    CHECK(v.at(0, 0, 0) == vol.at(side - 1, 0, side - 1));
    CHECK(v.at(2, 3, 1) == vol.at(side - 3, 3, side - 2));
    CHECK(m.at(side - 1, 0, 0) == 1); // x flip moved the x<3 slab
    CHECK(m.at(0, 0, 0) == 0);
    apply_augment(v, m, flips); // involution
    CHECK(v.data == vol.data);
    CHECK(m.data == mask.data);

    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        Volume rv = make_cube(side, [&](int, int, int) {
            return static_cast<float>(rng.uniform01());
        });
        MaskVolume rm = mask;
        augment(rv, rm, rng.next());
        for (float x : rv.data) {
            CHECK(x >= 0.0f);
            CHECK(x <= 1.0f);
        }
        for (uint8_t b : rm.data) CHECK(b <= 1);
    }

    Volume a1 = vol, a2 = vol;
    MaskVolume m1 = mask, m2 = mask;
    augment(a1, m1, 42);
    augment(a2, m2, 42);
    CHECK(a1.data == a2.data);
    CHECK(m1.data == m2.data);
}

TEST_CASE("dataset loading validates geometry, range, and labels") {
    const fs::path dir = fs::temp_directory_path() / "ctmae_train_ds";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const int side = 8;
    auto vol = make_cube(side, [&](int x, int y, int z) {
        return static_cast<float>((x + y + z) / 24.0);
    });
    auto mask = make_mask(side, [](int x, int, int) { return x >= 4; });
    write_nifti(vol, (dir / "v0.nii").string());
    write_mask_nifti(mask, (dir / "m0.nii").string());

    std::vector<ManifestEntry> entries{{(dir / "v0.nii").string(), (dir / "m0.nii").string(), 2}};
    auto data = load_dataset(entries, side, true);
    CHECK(data.items.size() == 1);
    CHECK(data.items[0].label == 2);
    CHECK(data.items[0].volume.at(1, 2, 3) == doctest::Approx(6.0 / 24));
    CHECK(data.items[0].mask.at(5, 0, 0) == 1);

    CHECK_THROWS_AS(load_dataset(entries, 16, true), Error);

    std::vector<ManifestEntry> unlabeled{{(dir / "v0.nii").string(), (dir / "m0.nii").string(), -1}};
    CHECK_THROWS_AS(load_dataset(unlabeled, side, true), Error);
    CHECK_NOTHROW(load_dataset(unlabeled, side, false));

    Volume out_of_range = vol;
    out_of_range.data[0] = 3.0f;
    write_nifti(out_of_range, (dir / "bad.nii").string());
    std::vector<ManifestEntry> bad{{(dir / "bad.nii").string(), (dir / "m0.nii").string(), 0}};
    CHECK_THROWS_AS(load_dataset(bad, side, true), Error);

    auto two = binary_view(toy_dataset(8, 8, 4));
    auto counts = label_counts(two.labels(), 2);
    CHECK(counts == std::vector<int>{4, 4});
}

TEST_CASE("loss curve format") {
    std::vector<LossRecord> recs{{0, 1e-4, 0.52}, {1, 2e-4, 0.5011}};
    auto text = format_loss_curve(recs);
    CHECK(text.find("0,0.0001") == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);

    const fs::path path = fs::temp_directory_path() / "ctmae_curve.csv";
    write_loss_curve(path.string(), recs);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first.find("0,") == 0);
}

TEST_CASE("pretraining descends and reproduces bitwise") {
    auto data = toy_dataset(16, 4, 4);
    auto mc = tiny_model();
    RunConfig rc = desk_pt();
    rc.batch_size = 2;
    rc.total_iters = 60;
    rc.base_lr = 2e-3;
    rc.checkpoint_every = 25;
    rc.seed = 7;

    std::vector<int> hook_iters;
    auto result = pretrain(data, mc, rc, [&](int iter, const ParamMap<float>&,
                                             const AdamWState<float>&) {
        hook_iters.push_back(iter);
    });
    REQUIRE(result.curve.size() == 60);
    CHECK(hook_iters == std::vector<int>{25, 50, 60});
    CHECK(result.curve.front().loss > 0.0);

    auto window = [&](int start) {
        double s = 0.0;
        for (int i = start; i < start + 10; ++i) s += result.curve[static_cast<size_t>(i)].loss;
        return s / 10;
    };
    CHECK(window(50) < window(0));

    auto rerun = pretrain(data, mc, rc);
    REQUIRE(rerun.curve.size() == result.curve.size());
    for (size_t i = 0; i < rerun.curve.size(); ++i) {
        CHECK(rerun.curve[i].loss == result.curve[i].loss);
        CHECK(rerun.curve[i].lr == result.curve[i].lr);
    }
    CHECK(params_equal(rerun.params, result.params));

    RunConfig wrong = rc;
    wrong.modality = Mode::finetune;
    CHECK_THROWS_AS(pretrain(data, mc, wrong), Error);
}

TEST_CASE("lung aware pretraining runs and differs from standard") {
    auto data = toy_dataset(16, 2, 2);
    auto mc = tiny_model();
    RunConfig rc = desk_pt();
    rc.batch_size = 2;
    rc.total_iters = 5;
    rc.seed = 3;

    auto standard = pretrain(data, mc, rc);
    rc.loss_variant = LossVariant::lung_aware;
    rc.alpha = 0.01;
    auto aware = pretrain(data, mc, rc);
    REQUIRE(aware.curve.size() == 5);
    for (const auto& r : aware.curve) CHECK(std::isfinite(r.loss));
    CHECK(aware.curve[0].loss != standard.curve[0].loss);
}

TEST_CASE("linear probe freezes everything but the head") {
    auto data = toy_dataset(16, 8, 4);
    auto mc = tiny_model();
    auto init = init_params<float>(mc, 11);

    RunConfig rc = desk_lp();
    rc.batch_size = 4;
    rc.total_iters = 6;
    rc.seed = 5;
    std::vector<int> all(8);
    std::iota(all.begin(), all.end(), 0);
    auto result = train_classifier(data, all, all, mc, rc, init);

    const auto lp = linear_probe_params();
    const std::set<std::string> head(lp.begin(), lp.end());
    for (const auto& [name, tensor] : result.params) {
        if (head.count(name))
            CHECK(tensor != init.at(name));
        else
            CHECK(tensor == init.at(name));
    }
    REQUIRE(!result.epochs.empty());
    CHECK(result.epochs.back().epoch == 3); // ceil(6 / ceil(8/4))
    CHECK(result.metrics.val_loss == result.epochs.back().val_loss);
    CHECK(result.confusion.total() == 8);
}

TEST_CASE("finetuning moves encoder weights and reproduces bitwise") {
    auto data = toy_dataset(16, 6, 2);
    auto mc = tiny_model();
    mc.n_classes = 2;
    auto init = init_params<float>(mc, 13);

    RunConfig rc = desk_ft();
    rc.batch_size = 3;
    rc.total_iters = 4;
    rc.seed = 19;
    std::vector<int> train{0, 1, 2, 3}, val{4, 5};
    auto a = train_classifier(data, train, val, mc, rc, init);
    auto b = train_classifier(data, train, val, mc, rc, init);
    CHECK(params_equal(a.params, b.params));
    CHECK(a.params.at("enc.0.attn.wq") != init.at("enc.0.attn.wq"));
    CHECK(a.curve.size() == 4);
    for (size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].loss == b.curve[i].loss);

    CHECK_THROWS_AS(train_classifier(data, {}, val, mc, rc, init), Error);
    CHECK_THROWS_AS(train_classifier(data, train, {}, mc, rc, init), Error);
}

TEST_CASE("head adaptation keeps the trunk bitwise") {
    auto mc = tiny_model();
    auto params = init_params<float>(mc, 21);
    ModelConfig two = mc;
    two.n_classes = 2;
    auto adapted = adapt_head(params, mc, two, 77);
    CHECK(adapted.at("head.w").cols() == 2);
    CHECK(adapted.at("head.b").cols() == 2);
    CHECK(adapted.at("patch_embed.w") == params.at("patch_embed.w"));
    CHECK(adapted.at("enc.0.mlp.w1") == params.at("enc.0.mlp.w1"));
    CHECK(adapted.at("head.norm.g") == params.at("head.norm.g"));
    auto fresh = init_params<float>(two, 77);
    CHECK(adapted.at("head.w") == fresh.at("head.w"));

    ModelConfig different = two;
    different.enc_dim = 32;
    CHECK_THROWS_AS(adapt_head(params, mc, different, 0), Error);
}

TEST_CASE("split protocol emits five runs and the aggregate line") {
    auto data = toy_dataset(16, 14, 2);
    auto mc = tiny_model();
    mc.n_classes = 2;
    auto init = init_params<float>(mc, 1);

    RunConfig rc = desk_lp();
    rc.batch_size = 4;
    rc.total_iters = 4;
    auto result = run_split_protocol(data, mc, rc, init, 100);
    CHECK(result.plan.splits.size() == 5);
    CHECK(result.per_split.size() == 5);
    CHECK(result.confusions.size() == 5);
    CHECK(std::count(result.report.begin(), result.report.end(), '\n') == 6);
    CHECK(result.report.find("aggregate,") != std::string::npos);
    for (const auto& cm : result.confusions)
        CHECK(cm.total() == static_cast<long>(result.plan.splits[0].validation.size()));
}
