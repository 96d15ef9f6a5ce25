#pragma once

#include "ctmae/dense.hpp"
#include "ctmae/nifti.hpp"

#include <cstdint>
#include <vector>

namespace ctmae {

// Geometry of the non-overlapping cubic patch decomposition of a side^3
// volume. Patch k covers grid cell (px, py, pz) with k = px + n*py + n^2*pz
// (x fastest); within a patch, voxels flatten the same way.
struct PatchGrid {
    int side;
    int patch;

    PatchGrid(int side_, int patch_);

    int n_per_axis() const { return side / patch; }
    int n_patches() const { return n_per_axis() * n_per_axis() * n_per_axis(); }
    int patch_dim() const { return patch * patch * patch; }
};

// Row k holds the voxels of patch k. Exact inverse pair with unpatchify.
MatXf patchify(const Volume& cube, const PatchGrid& grid);
Volume unpatchify(const MatXf& rows, const PatchGrid& grid);

// A seeded uniform random masking of floor(ratio * n_patches) patch indices,
// drawn by Fisher-Yates; both index lists are sorted.
struct MaskSelection {
    std::vector<int> masked;
    std::vector<int> visible;
    double ratio = 0.0;
    uint64_t seed = 0;
};

MaskSelection sample_mask(int n_patches, double ratio, uint64_t seed);

// Partition of patch indices by lung-voxel fraction: a patch is "lung" when
// at least `threshold` of its voxels are foreground.
struct LungPartition {
    std::vector<int> lung;
    std::vector<int> non_lung;
    double threshold = 0.25;
};

LungPartition lung_partition(const MaskVolume& cube, const PatchGrid& grid, double threshold = 0.25);

} // namespace ctmae
