#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ctmae/dense.hpp"
#include "ctmae/errors.hpp"
#include "ctmae/manifest.hpp"
#include "ctmae/synth.hpp"
#include "ctmae/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace ctmae;
namespace fs = std::filesystem;

namespace {

// Matched-filter amplitude of the stripe frequency band inside the lungs.
double band_amplitude(const SynthScan& scan, double cycles) {
    const int s = scan.mask.dims[0];
    double sum_sin = 0.0, sum_cos = 0.0;
    long count = 0;
    for (int z = 0; z < s; ++z)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                if (!scan.mask.at(x, y, z)) continue;
                const double w = (z + 0.5) / s;
                const double arg = 2.0 * M_PI * cycles * (w - 0.5) / 0.8;
                sum_sin += scan.volume.at(x, y, z) * std::sin(arg);
                sum_cos += scan.volume.at(x, y, z) * std::cos(arg);
                ++count;
            }
    return std::sqrt(sum_sin * sum_sin + sum_cos * sum_cos) / count;
}

} // namespace

TEST_CASE("generation is deterministic and mask is seed independent") {
    SynthSpec spec;
    spec.side = 24;
    spec.class_id = 1;
    spec.seed = 5;
    auto a = generate(spec);
    auto b = generate(spec);
    CHECK(a.volume.data == b.volume.data);
    CHECK(a.mask.data == b.mask.data);
    CHECK(a.label == 1);

    spec.seed = 6;
    auto c = generate(spec);
    CHECK(c.volume.data != a.volume.data);
    CHECK(c.mask.data == a.mask.data);

    spec.class_id = 3;
    auto d = generate(spec);
    CHECK(d.mask.data == a.mask.data);

    CHECK_THROWS_AS(generate(SynthSpec{1, 0, 0}), Error);
    CHECK_THROWS_AS(generate(SynthSpec{16, 4, 0}), Error);
}

TEST_CASE("intensities and mask stay in range") {
    SynthSpec spec;
    spec.side = 32;
    spec.class_id = 2;
    spec.seed = 9;
    auto scan = generate(spec);
    long lung = 0;
    for (float v : scan.volume.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    for (uint8_t m : scan.mask.data) {
        CHECK(m <= 1);
        lung += m;
    }
    const double fraction = static_cast<double>(lung) / scan.mask.voxel_count();
    CHECK(fraction >= 0.15);
    CHECK(fraction <= 0.45);

    // anatomy probes: lung center voxel is masked, the cube corner is air
    CHECK(scan.mask.at(static_cast<int>(0.30 * 32), 16, 16) == 1);
    CHECK(scan.mask.at(1, 1, 1) == 0);
    CHECK(scan.volume.at(1, 1, 1) < 0.15f); // background + noise only
    CHECK(scan.volume.at(16, 2, 16) > 0.4f); // body shell
}

TEST_CASE("each class concentrates energy at its own frequency") {
    const double cycles[4] = {2.0, 4.0, 6.0, 8.0};
    for (int c = 0; c < 4; ++c) {
        SynthSpec spec;
        spec.side = 32;
        spec.class_id = c;
        spec.seed = 11;
        auto scan = generate(spec);
        const double own = band_amplitude(scan, cycles[c]);
        for (int other = 0; other < 4; ++other) {
            if (other == c) continue;
            CHECK(own > 3.0 * band_amplitude(scan, cycles[other]));
        }
    }
}

TEST_CASE("corpus round trips through the volume reader") {
    const fs::path dir = fs::temp_directory_path() / "ctmae_synth_corpus";
    fs::remove_all(dir);
    auto manifest_path = generate_corpus(2, 16, 7, dir.string());
    auto entries = read_manifest(manifest_path);
    REQUIRE(entries.size() == 8);

    auto data = load_dataset(entries, 16, true);
    auto counts = label_counts(data.labels(), 4);
    CHECK(counts == std::vector<int>{2, 2, 2, 2});
    for (const auto& item : data.items) CHECK(item.volume.header.dims[0] == 16);

    // regeneration is file-for-file identical
    const fs::path dir2 = fs::temp_directory_path() / "ctmae_synth_corpus2";
    fs::remove_all(dir2);
    generate_corpus(2, 16, 7, dir2.string());
    for (const auto& entry : entries) {
        const auto name = fs::path(entry.volume_path).filename();
        std::ifstream a(entry.volume_path, std::ios::binary), b(dir2 / name, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }

    CHECK_THROWS_AS(generate_corpus(0, 16, 0, dir.string()), Error);
}

TEST_CASE("classes are linearly separable from band energies") {
    const double cycles[4] = {2.0, 4.0, 6.0, 8.0};
    const int per_class = 10;
    MatXd features(4 * per_class, 5);
    MatXd targets = MatXd::Zero(4 * per_class, 4);
    std::vector<int> truth;
    int row = 0;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < per_class; ++i, ++row) {
            SynthSpec spec;
            spec.side = 32;
            spec.class_id = c;
            spec.seed = mix_seed(42, static_cast<uint64_t>(c), static_cast<uint64_t>(i));
            auto scan = generate(spec);
            for (int f = 0; f < 4; ++f) features(row, f) = band_amplitude(scan, cycles[f]);
            features(row, 4) = 1.0;
            targets(row, c) = 1.0;
            truth.push_back(c);
        }

    const MatXd weights = features.colPivHouseholderQr().solve(targets);
    const MatXd scores = features * weights;
    int correct = 0;
    for (int r = 0; r < scores.rows(); ++r) {
        int best = 0;
        for (int c = 1; c < 4; ++c)
            if (scores(r, c) > scores(r, best)) best = c;
        if (best == truth[static_cast<size_t>(r)]) ++correct;
    }
    CHECK(static_cast<double>(correct) / scores.rows() >= 0.95);
}
