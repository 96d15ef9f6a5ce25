#include "ctmae/preprocess.hpp"

#include "ctmae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ctmae {

namespace {

std::array<int, 3> resampled_dims(const std::array<int, 3>& dims, const std::array<double, 3>& spacing,
                                  const std::array<double, 3>& target) {
    std::array<int, 3> out;
    for (int a = 0; a < 3; ++a) {
        require(std::isfinite(target[a]) && target[a] > 0.0, Errc::invalid_bounds,
                "target spacing must be positive");
        long r = std::lround(dims[a] * spacing[a] / target[a]);
        if (r == 0 && dims[a] >= 2)
            fail(Errc::degenerate_output, "axis " + std::to_string(a) + " would resample to 0 voxels");
        out[a] = static_cast<int>(std::max(1l, r));
    }
    return out;
}

// out voxel j -> input coordinate; endpoint-preserving.
inline double src_coord(int j, int in_dim, int out_dim) {
    if (out_dim <= 1) return (in_dim - 1) / 2.0;
    return static_cast<double>(j) * (in_dim - 1) / (out_dim - 1);
}

std::vector<float> trilinear_resize(const std::vector<float>& src, const std::array<int, 3>& in,
                                    const std::array<int, 3>& out) {
    std::vector<float> dst(static_cast<size_t>(out[0]) * out[1] * out[2]);
    auto sidx = [&](int x, int y, int z) {
        return static_cast<size_t>(x) + static_cast<size_t>(in[0]) * (y + static_cast<size_t>(in[1]) * z);
    };
    size_t di = 0;
    for (int z = 0; z < out[2]; ++z) {
        double fz = src_coord(z, in[2], out[2]);
        int z0 = std::clamp(static_cast<int>(std::floor(fz)), 0, in[2] - 1);
        int z1 = std::min(z0 + 1, in[2] - 1);
        double tz = fz - z0;
        for (int y = 0; y < out[1]; ++y) {
            double fy = src_coord(y, in[1], out[1]);
            int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, in[1] - 1);
            int y1 = std::min(y0 + 1, in[1] - 1);
            double ty = fy - y0;
            for (int x = 0; x < out[0]; ++x, ++di) {
                double fx = src_coord(x, in[0], out[0]);
                int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, in[0] - 1);
                int x1 = std::min(x0 + 1, in[0] - 1);
                double tx = fx - x0;

                double c00 = src[sidx(x0, y0, z0)] * (1 - tx) + src[sidx(x1, y0, z0)] * tx;
                double c10 = src[sidx(x0, y1, z0)] * (1 - tx) + src[sidx(x1, y1, z0)] * tx;
                double c01 = src[sidx(x0, y0, z1)] * (1 - tx) + src[sidx(x1, y0, z1)] * tx;
                double c11 = src[sidx(x0, y1, z1)] * (1 - tx) + src[sidx(x1, y1, z1)] * tx;
                double c0 = c00 * (1 - ty) + c10 * ty;
                double c1 = c01 * (1 - ty) + c11 * ty;
                dst[di] = static_cast<float>(c0 * (1 - tz) + c1 * tz);
            }
        }
    }
    return dst;
}

std::vector<uint8_t> nearest_resize(const std::vector<uint8_t>& src, const std::array<int, 3>& in,
                                    const std::array<int, 3>& out) {
    std::vector<uint8_t> dst(static_cast<size_t>(out[0]) * out[1] * out[2]);
    auto sidx = [&](int x, int y, int z) {
        return static_cast<size_t>(x) + static_cast<size_t>(in[0]) * (y + static_cast<size_t>(in[1]) * z);
    };
    size_t di = 0;
    for (int z = 0; z < out[2]; ++z) {
        int zs = std::clamp(static_cast<int>(std::lround(src_coord(z, in[2], out[2]))), 0, in[2] - 1);
        for (int y = 0; y < out[1]; ++y) {
            int ys = std::clamp(static_cast<int>(std::lround(src_coord(y, in[1], out[1]))), 0, in[1] - 1);
            for (int x = 0; x < out[0]; ++x, ++di) {
                int xs = std::clamp(static_cast<int>(std::lround(src_coord(x, in[0], out[0]))), 0, in[0] - 1);
                dst[di] = src[sidx(xs, ys, zs)];
            }
        }
    }
    return dst;
}

void check_box(const CropBox& box, const std::array<int, 3>& dims) {
    for (int a = 0; a < 3; ++a) {
        if (box.lo[a] < 0 || box.hi[a] > dims[a] || box.lo[a] >= box.hi[a])
            fail(Errc::box_out_of_bounds, "crop box [" + std::to_string(box.lo[a]) + "," +
                                              std::to_string(box.hi[a]) + ") invalid for axis " +
                                              std::to_string(a) + " of extent " + std::to_string(dims[a]));
    }
}

void check_cube_args(int side, int patch) {
    require(side >= 1 && patch >= 1, Errc::indivisible_side, "side and patch must be positive");
    if (side < patch || side % patch != 0)
        fail(Errc::indivisible_side,
             "side " + std::to_string(side) + " is not a positive multiple of patch " + std::to_string(patch));
}

} // namespace

SpacingStats spacing_stats(const std::vector<std::string>& volume_paths) {
    if (volume_paths.empty()) fail(Errc::empty_manifest, "no scans to average spacing over");
    SpacingStats stats;
    for (const auto& path : volume_paths) {
        Volume v = read_nifti(path);
        for (int a = 0; a < 3; ++a) stats.mean_spacing[a] += v.header.spacing[a];
        ++stats.scan_count;
    }
    for (int a = 0; a < 3; ++a) stats.mean_spacing[a] /= stats.scan_count;
    return stats;
}

Volume resample_trilinear(const Volume& v, const std::array<double, 3>& target_spacing) {
    auto out_dims = resampled_dims(v.header.dims, v.header.spacing, target_spacing);
    Volume out;
    out.header = v.header;
    out.header.dims = out_dims;
    out.header.spacing = target_spacing;
    out.data = trilinear_resize(v.data, v.header.dims, out_dims);
    return out;
}

MaskVolume resample_mask_nearest(const MaskVolume& m, const std::array<double, 3>& source_spacing,
                                 const std::array<double, 3>& target_spacing) {
    auto out_dims = resampled_dims(m.dims, source_spacing, target_spacing);
    MaskVolume out;
    out.dims = out_dims;
    out.data = nearest_resize(m.data, m.dims, out_dims);
    return out;
}

CropBox mask_bounding_box(const MaskVolume& m) {
    CropBox box;
    box.lo = {m.dims[0], m.dims[1], m.dims[2]};
    box.hi = {0, 0, 0};
    bool any = false;
    size_t i = 0;
    for (int z = 0; z < m.dims[2]; ++z)
        for (int y = 0; y < m.dims[1]; ++y)
            for (int x = 0; x < m.dims[0]; ++x, ++i) {
                if (!m.data[i]) continue;
                any = true;
                box.lo[0] = std::min(box.lo[0], x);
                box.lo[1] = std::min(box.lo[1], y);
                box.lo[2] = std::min(box.lo[2], z);
                box.hi[0] = std::max(box.hi[0], x + 1);
                box.hi[1] = std::max(box.hi[1], y + 1);
                box.hi[2] = std::max(box.hi[2], z + 1);
            }
    if (!any) fail(Errc::empty_mask, "mask has no foreground voxels");
    return box;
}

Volume crop(const Volume& v, const CropBox& box) {
    check_box(box, v.header.dims);
    Volume out;
    out.header = v.header;
    for (int a = 0; a < 3; ++a) out.header.dims[a] = box.hi[a] - box.lo[a];
    out.data.resize(out.header.voxel_count());
    size_t di = 0;
    for (int z = box.lo[2]; z < box.hi[2]; ++z)
        for (int y = box.lo[1]; y < box.hi[1]; ++y)
            for (int x = box.lo[0]; x < box.hi[0]; ++x, ++di) out.data[di] = v.at(x, y, z);
    return out;
}

MaskVolume crop_mask(const MaskVolume& m, const CropBox& box) {
    check_box(box, m.dims);
    MaskVolume out;
    for (int a = 0; a < 3; ++a) out.dims[a] = box.hi[a] - box.lo[a];
    out.data.resize(out.voxel_count());
    size_t di = 0;
    for (int z = box.lo[2]; z < box.hi[2]; ++z)
        for (int y = box.lo[1]; y < box.hi[1]; ++y)
            for (int x = box.lo[0]; x < box.hi[0]; ++x, ++di) out.data[di] = m.at(x, y, z);
    return out;
}

Volume normalize_hu(const Volume& v, double lo_hu, double hi_hu) {
    if (!(std::isfinite(lo_hu) && std::isfinite(hi_hu) && lo_hu < hi_hu))
        fail(Errc::invalid_bounds, "normalize_hu requires lo < hi");
    Volume out;
    out.header = v.header;
    out.data.resize(v.data.size());
    const double range = hi_hu - lo_hu;
    for (size_t i = 0; i < v.data.size(); ++i) {
        double t = (v.data[i] - lo_hu) / range;
        out.data[i] = static_cast<float>(std::clamp(t, 0.0, 1.0));
    }
    return out;
}

Volume resize_to_cube(const Volume& v, int side, int patch) {
    check_cube_args(side, patch);
    std::array<int, 3> out_dims{side, side, side};
    Volume out;
    out.header = v.header;
    out.header.dims = out_dims;
    for (int a = 0; a < 3; ++a)
        out.header.spacing[a] = v.header.spacing[a] * v.header.dims[a] / static_cast<double>(side);
    out.data = trilinear_resize(v.data, v.header.dims, out_dims);
    return out;
}

MaskVolume resize_mask_to_cube(const MaskVolume& m, int side, int patch) {
    check_cube_args(side, patch);
    MaskVolume out;
    out.dims = {side, side, side};
    out.data = nearest_resize(m.data, m.dims, out.dims);
    return out;
}

std::pair<Volume, MaskVolume> preprocess_scan(const Volume& v, const MaskVolume& m,
                                              const PreprocessSettings& settings,
                                              PreprocessRecord* record) {
    require(m.dims == v.header.dims, Errc::dim_mismatch, "mask dims must match volume dims");

    Volume rv = resample_trilinear(v, settings.target_spacing);
    MaskVolume rm = resample_mask_nearest(m, v.header.spacing, settings.target_spacing);

    CropBox box = mask_bounding_box(rm);
    Volume cv = crop(rv, box);
    MaskVolume cm = crop_mask(rm, box);

    Volume nv = normalize_hu(cv, settings.hu_lo, settings.hu_hi);
    Volume out_v = resize_to_cube(nv, settings.side, settings.patch);
    MaskVolume out_m = resize_mask_to_cube(cm, settings.side, settings.patch);

    if (record) {
        record->input_dims = v.header.dims;
        record->input_spacing = v.header.spacing;
        record->crop_box = box;
        record->output_dims = out_v.header.dims;
    }
    return {std::move(out_v), std::move(out_m)};
}

std::string format_report_line(const std::string& scan, const PreprocessRecord& r) {
    std::ostringstream os;
    os << scan << "\tdims " << r.input_dims[0] << "x" << r.input_dims[1] << "x" << r.input_dims[2]
       << "\tspacing " << r.input_spacing[0] << "," << r.input_spacing[1] << "," << r.input_spacing[2]
       << "\tcrop [" << r.crop_box.lo[0] << "," << r.crop_box.lo[1] << "," << r.crop_box.lo[2] << ")-["
       << r.crop_box.hi[0] << "," << r.crop_box.hi[1] << "," << r.crop_box.hi[2] << ")"
       << "\tout " << r.output_dims[0] << "x" << r.output_dims[1] << "x" << r.output_dims[2];
    return os.str();
}

} // namespace ctmae
