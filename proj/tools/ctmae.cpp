#include "CLI11.hpp"

#include "ctmae/checkpoint.hpp"
#include "ctmae/config.hpp"
#include "ctmae/errors.hpp"
#include "ctmae/evaluation.hpp"
#include "ctmae/manifest.hpp"
#include "ctmae/nifti.hpp"
#include "ctmae/patching.hpp"
#include "ctmae/preprocess.hpp"
#include "ctmae/synth.hpp"
#include "ctmae/training.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ctmae;

namespace {

// 0 success, 2 config error, 3 data error, 4 runtime error.
int exit_code_for(Errc code) {
    switch (code) {
    case Errc::config_error:
    case Errc::negative_alpha:
    case Errc::bad_ratio:
    case Errc::indivisible_side:
    case Errc::head_divisibility:
    case Errc::invalid_bounds:
        return 2;
    case Errc::missing_magic:
    case Errc::unsupported_datatype:
    case Errc::truncated_data:
    case Errc::non_finite_voxel:
    case Errc::bad_header:
    case Errc::io_failure:
    case Errc::dim_mismatch:
    case Errc::empty_manifest:
    case Errc::degenerate_output:
    case Errc::empty_mask:
    case Errc::box_out_of_bounds:
    case Errc::label_out_of_range:
    case Errc::zero_class_count:
    case Errc::version_mismatch:
    case Errc::corrupt_checksum:
    case Errc::data_error:
        return 3;
    default:
        return 4;
    }
}

void apply_thread_cap() {
    const char* env = std::getenv("CTMAE_THREADS");
    if (!env || !*env) return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    require(end && *end == '\0' && n >= 1, Errc::config_error,
            "CTMAE_THREADS must be a positive integer");
    Eigen::setNbThreads(static_cast<int>(n));
}

struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::string manifest;
    std::string out_dir;
    std::string init;
    uint64_t seed = 0;
    bool seed_given = false;
};

void add_common(CLI::App* sub, CommonOpts& o, CLI::Option*& seed_opt) {
    sub->add_option("--config", o.config_path, "JSON config with model/run/data sections");
    sub->add_option("--preset", o.preset, "paper-pt|paper-ft|paper-lp|desk");
    sub->add_option("--manifest", o.manifest, "override data.manifest");
    sub->add_option("--out", o.out_dir, "override data.out_dir");
    sub->add_option("--init", o.init, "override data.init_checkpoint");
    seed_opt = sub->add_option("--seed", o.seed, "override run.seed");
}

// Preset (desk by default) -> config file -> command-line flags; explicit
// config keys that change a named preset's value are reported.
ConfigFile resolve_config(const CommonOpts& o, const std::vector<Mode>& allowed) {
    const std::string preset_name = o.preset.empty() ? "desk" : o.preset;
    ConfigFile base;
    bool preset_ok = false;
    for (Mode m : allowed) {
        try {
            base = preset_config(preset_name, m);
            preset_ok = true;
            break;
        } catch (const Error&) {
        }
    }
    require(preset_ok, Errc::config_error,
            "preset " + preset_name + " does not fit this command");

    ConfigFile cfg = base;
    if (!o.config_path.empty()) {
        auto parsed = parse_config_file(o.config_path, base);
        cfg = parsed.config;
        if (!o.preset.empty())
            for (const auto& key : preset_conflicts(base, cfg, parsed.keys_present)) {
                if (key.rfind("data.", 0) == 0) continue; // paths are per run, not preset
                std::cerr << "warning: " << key << " from " << o.config_path
                          << " overrides preset " << o.preset << "\n";
            }
    }
    if (!o.manifest.empty()) cfg.data.manifest = o.manifest;
    if (!o.out_dir.empty()) cfg.data.out_dir = o.out_dir;
    if (!o.init.empty()) cfg.data.init_checkpoint = o.init;
    if (o.seed_given) cfg.run.seed = o.seed;

    const bool ok = std::find(allowed.begin(), allowed.end(), cfg.run.modality) != allowed.end();
    require(ok, Errc::config_error,
            std::string("this command cannot run with modality ") +
                mode_name(cfg.run.modality));
    cfg.model.validate();
    cfg.run.validate();
    require(!cfg.data.manifest.empty(), Errc::config_error, "data.manifest is required");
    return cfg;
}

void echo_config(const ConfigFile& cfg) {
    fs::create_directories(cfg.data.out_dir);
    const auto text = config_to_json(cfg);
    std::cout << text;
    std::ofstream out(fs::path(cfg.data.out_dir) / "effective_config.json", std::ios::binary);
    require(out.good(), Errc::io_failure, "cannot write the effective config");
    out << text;
}

// Starting weights: a named checkpoint (head re-initialized when the class
// count differs) or a fresh initialization.
ParamMap<float> initial_params(const ConfigFile& cfg) {
    if (cfg.data.init_checkpoint.empty()) return init_params<float>(cfg.model, cfg.run.seed);
    auto ckpt = load_checkpoint(cfg.data.init_checkpoint);
    if (ckpt.model.hash() == cfg.model.hash()) return std::move(ckpt.params);
    return adapt_head(ckpt.params, ckpt.model, cfg.model, cfg.run.seed);
}

std::string checkpoint_name(int iter) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "checkpoint_%06d.ckpt", iter);
    return buf;
}

int cmd_gen_synth(int n_per_class, int side, int patch, uint64_t seed, const std::string& out) {
    require(patch >= 1 && side % patch == 0, Errc::indivisible_side,
            "side " + std::to_string(side) + " is not divisible by patch " +
                std::to_string(patch));
    const auto manifest = generate_corpus(n_per_class, side, seed, out);
    std::cout << "wrote " << manifest << " (" << 4 * n_per_class << " scans, side " << side
              << ")\n";
    return 0;
}

std::array<double, 3> parse_spacing(const std::string& text,
                                    const std::vector<std::string>& volumes) {
    if (text == "auto") return spacing_stats(volumes).mean_spacing;
    const std::string prefix = "isotropic:";
    if (text.rfind(prefix, 0) == 0) {
        size_t used = 0;
        double mm = 0.0;
        try {
            mm = std::stod(text.substr(prefix.size()), &used);
        } catch (const std::exception&) {
            fail(Errc::config_error, "cannot parse spacing \"" + text + "\"");
        }
        require(used == text.size() - prefix.size() && mm > 0.0, Errc::config_error,
                "spacing must be a positive millimeter value");
        return {mm, mm, mm};
    }
    fail(Errc::config_error, "--spacing must be auto or isotropic:<mm>");
}

int cmd_preprocess(const std::string& manifest, const std::string& out_dir,
                   const std::string& spacing, int side, int patch) {
    const auto entries = read_manifest(manifest);
    std::vector<std::string> volumes;
    for (const auto& e : entries) volumes.push_back(e.volume_path);

    PreprocessSettings settings;
    settings.target_spacing = parse_spacing(spacing, volumes);
    settings.side = side;
    settings.patch = patch;
    fs::create_directories(out_dir);

    std::vector<ManifestEntry> processed;
    char name[40];
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto vol = read_nifti(entries[i].volume_path);
        const auto mask = read_mask(entries[i].mask_path, vol.header.dims);
        PreprocessRecord record;
        auto [cube, cube_mask] = preprocess_scan(vol, mask, settings, &record);

        std::snprintf(name, sizeof name, "scan_%04zu", i);
        ManifestEntry out;
        out.volume_path = std::string(name) + ".nii";
        out.mask_path = std::string(name) + "_mask.nii";
        out.label = entries[i].label;
        write_nifti(cube, out_dir + "/" + out.volume_path);
        write_mask_nifti(cube_mask, out_dir + "/" + out.mask_path);
        processed.push_back(out);
        std::cout << format_report_line(entries[i].volume_path, record) << "\n";
    }
    write_manifest(out_dir + "/manifest.tsv", processed);
    std::cout << "wrote " << out_dir << "/manifest.tsv (" << processed.size() << " scans)\n";
    return 0;
}

int cmd_pretrain(const CommonOpts& o) {
    const auto cfg = resolve_config(o, {Mode::pretrain});
    echo_config(cfg);
    const auto data = load_dataset(read_manifest(cfg.data.manifest), cfg.model.side, false);

    const fs::path out(cfg.data.out_dir);
    auto hook = [&](int iter, const ParamMap<float>& params, const AdamWState<float>& opt) {
        save_checkpoint((out / checkpoint_name(iter)).string(), cfg.model, cfg.run, iter, params,
                        opt);
    };
    auto result = pretrain(data, cfg.model, cfg.run, hook);

    save_checkpoint((out / "pretrain.ckpt").string(), cfg.model, cfg.run, cfg.run.total_iters,
                    result.params, result.opt);
    write_loss_curve((out / "loss_curve.csv").string(), result.curve);
    std::cout << format_loss_curve(result.curve);
    std::cout << "wrote " << (out / "pretrain.ckpt").string() << "\n";
    return 0;
}

int cmd_classifier(const CommonOpts& o, Mode mode) {
    const auto cfg = resolve_config(o, {mode});
    echo_config(cfg);
    const auto data = load_dataset(read_manifest(cfg.data.manifest), cfg.model.side, true);
    auto params = initial_params(cfg);

    std::vector<int> all(data.items.size());
    std::iota(all.begin(), all.end(), 0);
    const fs::path out(cfg.data.out_dir);
    auto hook = [&](int iter, const ParamMap<float>& p, const AdamWState<float>& opt) {
        save_checkpoint((out / checkpoint_name(iter)).string(), cfg.model, cfg.run, iter, p, opt);
    };
    auto result = train_classifier(data, all, all, cfg.model, cfg.run, params, hook);

    const char* stem = mode == Mode::finetune ? "finetune" : "linprobe";
    save_checkpoint((out / (std::string(stem) + ".ckpt")).string(), cfg.model, cfg.run,
                    cfg.run.total_iters, result.params, result.opt);
    write_loss_curve((out / "loss_curve.csv").string(), result.curve);

    char line[160];
    for (const auto& e : result.epochs) {
        std::snprintf(line, sizeof line, "epoch %d,%.6f,%.6f,%.6f\n", e.epoch,
                      e.val_balanced_accuracy, e.val_weighted_f1, e.val_loss);
        std::cout << line;
    }
    std::snprintf(line, sizeof line, "final,%.6f,%.6f,%.6f\n", result.metrics.balanced_accuracy,
                  result.metrics.weighted_f1, result.metrics.val_loss);
    std::cout << line;
    std::cout << "wrote " << (out / (std::string(stem) + ".ckpt")).string() << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& task, uint64_t split_seed) {
    require(task == "multiclass" || task == "binary", Errc::config_error,
            "--task must be multiclass or binary");
    // eval trains one classifier per split; the config decides FT vs LP
    ConfigFile cfg = resolve_config(o, {Mode::finetune, Mode::linear_probe});
    require(!cfg.data.init_checkpoint.empty(), Errc::config_error,
            "eval needs an --init checkpoint to start each split from");

    auto data = load_dataset(read_manifest(cfg.data.manifest), cfg.model.side, true);
    if (task == "binary") {
        data = binary_view(data);
        cfg.model.n_classes = 2;
    }
    echo_config(cfg);
    const auto params = initial_params(cfg);
    auto result = run_split_protocol(data, cfg.model, cfg.run, params, split_seed);

    std::cout << result.report;
    const fs::path out(cfg.data.out_dir);
    std::ofstream report(out / "metrics.csv", std::ios::binary);
    require(report.good(), Errc::io_failure, "cannot write metrics.csv");
    report << result.report;
    return 0;
}

int cmd_reconstruct(const std::string& ckpt_path, const std::string& scan_path,
                    const std::string& out_path, double ratio, uint64_t seed) {
    auto ckpt = load_checkpoint(ckpt_path);
    const auto vol = read_nifti(scan_path);
    const auto& dims = vol.header.dims;
    require(dims[0] == ckpt.model.side && dims[1] == ckpt.model.side &&
                dims[2] == ckpt.model.side,
            Errc::data_error, "scan must be a preprocessed " + std::to_string(ckpt.model.side) +
                                  "^3 cube");

    const PatchGrid grid = ckpt.model.grid();
    const auto sel = sample_mask(grid.n_patches(), ratio, seed);
    ad::Tape<float> tape;
    auto bm = bind_model(tape, ckpt.model, ckpt.params, {});
    auto pred = pretrain_forward(bm, ad::constant(tape, patchify(vol, grid)), sel);

    Volume recon = unpatchify(pred.val(), grid);
    recon.header.spacing = vol.header.spacing;
    write_nifti(recon, out_path);
    std::cout << "wrote " << out_path << " (masked " << sel.masked.size() << " of "
              << grid.n_patches() << " patches, seed " << seed << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Masked-autoencoder pretraining and ILD classification for chest-CT cubes"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic labeled corpus");
    int gen_n = 10, gen_side = 32, gen_patch = 8;
    uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--n-per-class", gen_n, "scans per class")->check(CLI::PositiveNumber);
    gen->add_option("--side", gen_side, "cube edge in voxels");
    gen->add_option("--patch", gen_patch, "patch edge the corpus must divide into");
    gen->add_option("--seed", gen_seed, "corpus seed");
    gen->add_option("--out", gen_out, "output directory")->required();

    auto* prep = app.add_subcommand("preprocess", "resample, crop, normalize, resize");
    std::string prep_manifest, prep_out, prep_spacing = "auto";
    int prep_side = 32, prep_patch = 8;
    prep->add_option("--manifest", prep_manifest, "input manifest (volume<TAB>mask[<TAB>label])")
        ->required();
    prep->add_option("--out", prep_out, "output directory")->required();
    prep->add_option("--spacing", prep_spacing, "auto | isotropic:<mm>");
    prep->add_option("--side", prep_side, "output cube edge");
    prep->add_option("--patch", prep_patch, "patch edge the cube must divide into");

    CommonOpts pt_opts, ft_opts, lp_opts, ev_opts;
    CLI::Option *pt_seed, *ft_seed, *lp_seed, *ev_seed;
    auto* pt = app.add_subcommand("pretrain", "masked-autoencoder pretraining");
    add_common(pt, pt_opts, pt_seed);
    auto* ft = app.add_subcommand("finetune", "supervised finetuning of the full model");
    add_common(ft, ft_opts, ft_seed);
    auto* lp = app.add_subcommand("linprobe", "linear probe: train the head only");
    add_common(lp, lp_opts, lp_seed);

    auto* ev = app.add_subcommand("eval", "five-split train/validate protocol");
    std::string ev_task = "multiclass";
    uint64_t ev_split_seed = 0;
    add_common(ev, ev_opts, ev_seed);
    ev->add_option("--task", ev_task, "multiclass | binary");
    ev->add_option("--split-seed", ev_split_seed, "base seed of the five splits");

    auto* rec = app.add_subcommand("reconstruct", "write a masked reconstruction of one scan");
    std::string rec_ckpt, rec_scan, rec_out;
    double rec_ratio = 0.75;
    uint64_t rec_seed = 0;
    rec->add_option("--checkpoint", rec_ckpt, "pretrained checkpoint")->required();
    rec->add_option("--scan", rec_scan, "preprocessed cube to reconstruct")->required();
    rec->add_option("--out", rec_out, "output volume path")->required();
    rec->add_option("--ratio", rec_ratio, "mask ratio in (0,1)");
    rec->add_option("--seed", rec_seed, "mask seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        apply_thread_cap();
        pt_opts.seed_given = pt_seed->count() > 0;
        ft_opts.seed_given = ft_seed->count() > 0;
        lp_opts.seed_given = lp_seed->count() > 0;
        ev_opts.seed_given = ev_seed->count() > 0;

        if (*gen) return cmd_gen_synth(gen_n, gen_side, gen_patch, gen_seed, gen_out);
        if (*prep) return cmd_preprocess(prep_manifest, prep_out, prep_spacing, prep_side,
                                         prep_patch);
        if (*pt) return cmd_pretrain(pt_opts);
        if (*ft) return cmd_classifier(ft_opts, Mode::finetune);
        if (*lp) return cmd_classifier(lp_opts, Mode::linear_probe);
        if (*ev) return cmd_eval(ev_opts, ev_task, ev_split_seed);
        if (*rec) return cmd_reconstruct(rec_ckpt, rec_scan, rec_out, rec_ratio, rec_seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
