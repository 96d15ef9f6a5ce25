#pragma once

#include "ctmae/nifti.hpp"

#include <cstdint>
#include <string>

namespace ctmae {

// Recipe for one synthetic chest volume: an elliptical body shell around two
// ellipsoidal lungs, class-coded sinusoidal stripes inside the lungs, and
// seeded Gaussian noise. Intensities live in [0, 1].
struct SynthSpec {
    int side = 32;
    int class_id = 0; // 0..3, selects the stripe frequency
    uint64_t seed = 0;
};

struct SynthScan {
    Volume volume;
    MaskVolume mask;
    int label = -1;
};

// Deterministic in the fields of `spec`. The mask depends only on side,
// never on seed or class.
SynthScan generate(const SynthSpec& spec);

// n_per_class scans for each of the 4 classes, written as NIfTI pairs plus a
// labeled manifest.tsv in out_dir. Returns the manifest path.
std::string generate_corpus(int n_per_class, int side, uint64_t seed, const std::string& out_dir);

} // namespace ctmae
