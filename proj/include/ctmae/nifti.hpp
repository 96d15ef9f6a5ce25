#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ctmae {

// Supported on-disk scalar types (NIfTI-1 datatype codes).
enum class NiftiDatatype : int16_t {
    uint8 = 2,
    int16 = 4,
    float32 = 16,
};

struct VolumeHeader {
    std::array<int, 3> dims{0, 0, 0};            // voxels per axis
    std::array<double, 3> spacing{1.0, 1.0, 1.0}; // mm per voxel
    NiftiDatatype datatype = NiftiDatatype::float32;
    float scl_slope = 1.0f;
    float scl_inter = 0.0f;
    bool big_endian = false; // byte order of the source file

    size_t voxel_count() const {
        return static_cast<size_t>(dims[0]) * static_cast<size_t>(dims[1]) *
               static_cast<size_t>(dims[2]);
    }
};

// Dense 3D scalar grid in Hounsfield units, x fastest, then y, then z.
struct Volume {
    VolumeHeader header;
    std::vector<float> data;

    size_t index(int x, int y, int z) const {
        return static_cast<size_t>(x) +
               static_cast<size_t>(header.dims[0]) *
                   (static_cast<size_t>(y) + static_cast<size_t>(header.dims[1]) * static_cast<size_t>(z));
    }
    float at(int x, int y, int z) const { return data[index(x, y, z)]; }
    float& at(int x, int y, int z) { return data[index(x, y, z)]; }
};

// Binary lung mask aligned with its paired Volume. 0 = background, 1 = lung.
struct MaskVolume {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<uint8_t> data;

    size_t index(int x, int y, int z) const {
        return static_cast<size_t>(x) +
               static_cast<size_t>(dims[0]) *
                   (static_cast<size_t>(y) + static_cast<size_t>(dims[1]) * static_cast<size_t>(z));
    }
    uint8_t at(int x, int y, int z) const { return data[index(x, y, z)]; }
    uint8_t& at(int x, int y, int z) { return data[index(x, y, z)]; }
    size_t voxel_count() const {
        return static_cast<size_t>(dims[0]) * static_cast<size_t>(dims[1]) * static_cast<size_t>(dims[2]);
    }
};

// Parse a single-file NIfTI-1 volume (.nii, or .nii.gz detected by the gzip
// byte prefix). Intensities are rescaled to slope * v + inter with slope 0
// treated as 1, per the NIfTI-1 convention. Both byte orders are accepted;
// the heuristic is dim[0] in [1,7] after an optional swap.
//
// Orientation affines (qform/sform) are ignored beyond pixdim spacing; the
// downstream pipeline is mask-driven and orientation-agnostic.
Volume read_nifti(const std::string& path);

// Same parser on an in-memory byte stream (the file loader plus tests use it).
Volume parse_nifti(const std::vector<unsigned char>& bytes, const std::string& origin = "<memory>");

// Write a single-file little-endian .nii: 32-bit float payload, slope 1,
// inter 0, vox_offset 352. read_nifti(write_nifti(v)) is voxel-exact.
void write_nifti(const Volume& volume, const std::string& path);

// Read a lung mask stored as an integer-typed NIfTI volume. Any label > 0
// collapses to 1 (the upstream mask tools emit per-lobe labels). Dims must
// equal expected_dims.
MaskVolume read_mask(const std::string& path, const std::array<int, 3>& expected_dims);

// Write a mask as a uint8 NIfTI volume readable by read_mask.
void write_mask_nifti(const MaskVolume& mask, const std::string& path);

} // namespace ctmae
