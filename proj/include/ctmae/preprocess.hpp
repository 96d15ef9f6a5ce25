#pragma once

#include "ctmae/manifest.hpp"
#include "ctmae/nifti.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ctmae {

// Per-axis arithmetic mean of voxel spacings over a manifest of scans.
struct SpacingStats {
    std::array<double, 3> mean_spacing{0, 0, 0};
    int scan_count = 0;
};

// Inclusive-exclusive voxel box.
struct CropBox {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};
};

SpacingStats spacing_stats(const std::vector<std::string>& volume_paths);

// Trilinear resample onto a grid with the given spacing. Output dims are
// round(dim_i * spacing_i / target_i), clamped to at least 1. Output voxel j
// maps to input coordinate j * (in - 1) / (out - 1) (input center when
// out == 1), so endpoints are preserved.
Volume resample_trilinear(const Volume& v, const std::array<double, 3>& target_spacing);

// Same grid geometry, nearest-neighbor, binarity preserved.
MaskVolume resample_mask_nearest(const MaskVolume& m, const std::array<double, 3>& source_spacing,
                                 const std::array<double, 3>& target_spacing);

// Tightest axis-aligned box containing every foreground voxel.
CropBox mask_bounding_box(const MaskVolume& m);

Volume crop(const Volume& v, const CropBox& box);
MaskVolume crop_mask(const MaskVolume& m, const CropBox& box);

// clamp((v - lo_hu) / (hi_hu - lo_hu), 0, 1)
Volume normalize_hu(const Volume& v, double lo_hu = -200.0, double hi_hu = 1200.0);

// Resize to side^3 (trilinear / nearest); side must be a positive multiple of
// the configured patch edge. Spacing metadata scales with dims.
Volume resize_to_cube(const Volume& v, int side, int patch);
MaskVolume resize_mask_to_cube(const MaskVolume& m, int side, int patch);

struct PreprocessSettings {
    std::array<double, 3> target_spacing{1.0, 1.0, 1.0};
    int side = 32;
    int patch = 8;
    double hu_lo = -200.0;
    double hu_hi = 1200.0;
};

// One line of the preprocessing report.
struct PreprocessRecord {
    std::array<int, 3> input_dims;
    std::array<double, 3> input_spacing;
    CropBox crop_box;
    std::array<int, 3> output_dims;
};

// The fixed chain: resample -> mask bounding-box crop -> normalize -> resize.
// Returns an aligned (volume, mask) pair of side^3 voxels with values in [0,1].
std::pair<Volume, MaskVolume> preprocess_scan(const Volume& v, const MaskVolume& m,
                                              const PreprocessSettings& settings,
                                              PreprocessRecord* record = nullptr);

std::string format_report_line(const std::string& scan, const PreprocessRecord& r);

} // namespace ctmae
