#include "ctmae/synth.hpp"

#include "ctmae/errors.hpp"
#include "ctmae/manifest.hpp"
#include "ctmae/rng.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace ctmae {

namespace {

// Normalized-coordinate geometry. The body shell strictly contains both
// lungs (worst-case lung surface point evaluates to 0.84 of the shell's
// quadratic form).
constexpr double kLungCenters[2][3] = {{0.30, 0.5, 0.5}, {0.70, 0.5, 0.5}};
constexpr double kLungRadii[3] = {0.17, 0.30, 0.40};
constexpr double kBodyRadii[3] = {0.48, 0.46, 0.49};
constexpr double kLungBase = 0.25;
constexpr double kShell = 0.6;
constexpr double kStripeAmp = 0.2;
constexpr double kNoiseSigma = 0.02;
// Stripe cycles per lung z-diameter (2 * kLungRadii[2] = 0.8), one frequency
// per class.
constexpr double kCycles[4] = {2.0, 4.0, 6.0, 8.0};

bool inside(const double c[3], const double r[3], double u, double v, double w) {
    const double du = (u - c[0]) / r[0], dv = (v - c[1]) / r[1], dw = (w - c[2]) / r[2];
    return du * du + dv * dv + dw * dw <= 1.0;
}

} // namespace

SynthScan generate(const SynthSpec& spec) {
    require(spec.side >= 2, Errc::config_error, "synthetic side must be at least 2");
    require(spec.class_id >= 0 && spec.class_id <= 3, Errc::label_out_of_range,
            "class id must lie in 0..3");

    const int s = spec.side;
    SynthScan scan;
    scan.label = spec.class_id;
    scan.volume.header.dims = {s, s, s};
    scan.volume.data.resize(static_cast<size_t>(s) * s * s);
    scan.mask.dims = {s, s, s};
    scan.mask.data.resize(scan.volume.data.size());

    constexpr double body_center[3] = {0.5, 0.5, 0.5};
    const double freq = kCycles[spec.class_id];
    Rng noise(mix_seed(spec.seed, static_cast<uint64_t>(spec.class_id)));

    size_t i = 0;
    for (int z = 0; z < s; ++z)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x, ++i) {
                const double u = (x + 0.5) / s, v = (y + 0.5) / s, w = (z + 0.5) / s;
                const bool lung = inside(kLungCenters[0], kLungRadii, u, v, w) ||
                                  inside(kLungCenters[1], kLungRadii, u, v, w);
                double val = 0.0;
                if (lung)
                    val = kLungBase +
                          kStripeAmp * std::sin(2.0 * M_PI * freq * (w - 0.5) / (2 * kLungRadii[2]));
                else if (inside(body_center, kBodyRadii, u, v, w))
                    val = kShell;
                val += kNoiseSigma * noise.normal();
                scan.volume.data[i] = static_cast<float>(std::min(1.0, std::max(0.0, val)));
                scan.mask.data[i] = lung ? 1 : 0;
            }
    return scan;
}

std::string generate_corpus(int n_per_class, int side, uint64_t seed, const std::string& out_dir) {
    require(n_per_class >= 1, Errc::config_error, "need at least one scan per class");
    std::filesystem::create_directories(out_dir);

    std::vector<ManifestEntry> entries;
    char name[64];
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < n_per_class; ++i) {
            SynthSpec spec;
            spec.side = side;
            spec.class_id = c;
            spec.seed = mix_seed(seed, static_cast<uint64_t>(c), static_cast<uint64_t>(i));
            auto scan = generate(spec);
            std::snprintf(name, sizeof name, "class%d_%03d", c, i);
            // Manifest entries stay relative so the corpus directory can move.
            ManifestEntry entry;
            entry.volume_path = std::string(name) + ".nii";
            entry.mask_path = std::string(name) + "_mask.nii";
            entry.label = c;
            write_nifti(scan.volume, out_dir + "/" + entry.volume_path);
            write_mask_nifti(scan.mask, out_dir + "/" + entry.mask_path);
            entries.push_back(std::move(entry));
        }
    const std::string manifest_path = out_dir + "/manifest.tsv";
    write_manifest(manifest_path, entries);
    return manifest_path;
}

} // namespace ctmae
