#include "ctmae/patching.hpp"

#include "ctmae/errors.hpp"
#include "ctmae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ctmae {

PatchGrid::PatchGrid(int side_, int patch_) : side(side_), patch(patch_) {
    require(side >= 1 && patch >= 1, Errc::indivisible_side, "side and patch must be positive");
    if (side % patch != 0)
        fail(Errc::indivisible_side,
             "side " + std::to_string(side) + " not divisible by patch " + std::to_string(patch));
}

MatXf patchify(const Volume& cube, const PatchGrid& grid) {
    const std::array<int, 3> want{grid.side, grid.side, grid.side};
    if (cube.header.dims != want || cube.data.size() != cube.header.voxel_count())
        fail(Errc::dim_mismatch, "patchify expects a " + std::to_string(grid.side) + "^3 volume");

    const int n = grid.n_per_axis();
    const int p = grid.patch;
    MatXf rows(grid.n_patches(), grid.patch_dim());
    for (int pz = 0; pz < n; ++pz)
        for (int py = 0; py < n; ++py)
            for (int px = 0; px < n; ++px) {
                const int k = px + n * (py + n * pz);
                int c = 0;
                for (int lz = 0; lz < p; ++lz)
                    for (int ly = 0; ly < p; ++ly)
                        for (int lx = 0; lx < p; ++lx, ++c)
                            rows(k, c) = cube.at(px * p + lx, py * p + ly, pz * p + lz);
            }
    return rows;
}

Volume unpatchify(const MatXf& rows, const PatchGrid& grid) {
    if (rows.rows() != grid.n_patches() || rows.cols() != grid.patch_dim())
        fail(Errc::shape_mismatch, "unpatchify expects " + std::to_string(grid.n_patches()) + "x" +
                                       std::to_string(grid.patch_dim()) + " rows, got " +
                                       std::to_string(rows.rows()) + "x" + std::to_string(rows.cols()));

    Volume cube;
    cube.header.dims = {grid.side, grid.side, grid.side};
    cube.data.resize(cube.header.voxel_count());
    const int n = grid.n_per_axis();
    const int p = grid.patch;
    for (int pz = 0; pz < n; ++pz)
        for (int py = 0; py < n; ++py)
            for (int px = 0; px < n; ++px) {
                const int k = px + n * (py + n * pz);
                int c = 0;
                for (int lz = 0; lz < p; ++lz)
                    for (int ly = 0; ly < p; ++ly)
                        for (int lx = 0; lx < p; ++lx, ++c)
                            cube.at(px * p + lx, py * p + ly, pz * p + lz) = rows(k, c);
            }
    return cube;
}

MaskSelection sample_mask(int n_patches, double ratio, uint64_t seed) {
    require(n_patches >= 2, Errc::bad_ratio, "need at least 2 patches to mask");
    if (!(ratio > 0.0 && ratio < 1.0))
        fail(Errc::bad_ratio, "mask ratio must lie in (0,1), got " + std::to_string(ratio));

    std::vector<int> perm(n_patches);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (int i = n_patches - 1; i > 0; --i) {
        int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
        std::swap(perm[i], perm[j]);
    }

    const int n_masked = static_cast<int>(std::floor(ratio * n_patches));
    MaskSelection sel;
    sel.ratio = ratio;
    sel.seed = seed;
    sel.masked.assign(perm.begin(), perm.begin() + n_masked);
    sel.visible.assign(perm.begin() + n_masked, perm.end());
    std::sort(sel.masked.begin(), sel.masked.end());
    std::sort(sel.visible.begin(), sel.visible.end());
    return sel;
}

LungPartition lung_partition(const MaskVolume& cube, const PatchGrid& grid, double threshold) {
    const std::array<int, 3> want{grid.side, grid.side, grid.side};
    if (cube.dims != want || cube.data.size() != cube.voxel_count())
        fail(Errc::dim_mismatch, "lung_partition expects a " + std::to_string(grid.side) + "^3 mask");
    // threshold 0 is admitted (every patch counts as lung); it is the
    // reduction case that recovers the plain masked reconstruction loss.
    require(threshold >= 0.0 && threshold <= 1.0, Errc::invalid_bounds,
            "lung threshold must lie in [0,1]");

    const int n = grid.n_per_axis();
    const int p = grid.patch;
    LungPartition part;
    part.threshold = threshold;
    for (int pz = 0; pz < n; ++pz)
        for (int py = 0; py < n; ++py)
            for (int px = 0; px < n; ++px) {
                const int k = px + n * (py + n * pz);
                long count = 0;
                for (int lz = 0; lz < p; ++lz)
                    for (int ly = 0; ly < p; ++ly)
                        for (int lx = 0; lx < p; ++lx)
                            count += cube.at(px * p + lx, py * p + ly, pz * p + lz) ? 1 : 0;
                const double fraction = static_cast<double>(count) / grid.patch_dim();
                (fraction >= threshold ? part.lung : part.non_lung).push_back(k);
            }
    return part;
}

} // namespace ctmae
