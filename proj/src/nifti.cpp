#include "ctmae/nifti.hpp"

#include "ctmae/errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <zlib.h>

static_assert(std::endian::native == std::endian::little,
              "on-disk serialization assumes a little-endian host");

namespace ctmae {

namespace {

constexpr size_t kHeaderSize = 348;
constexpr size_t kVoxOffset = 352;
constexpr size_t kMaxDecompressed = size_t(1) << 30;

uint16_t swap16(uint16_t v) { return static_cast<uint16_t>((v >> 8) | (v << 8)); }
uint32_t swap32(uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

struct Reader {
    const unsigned char* p;
    bool swap;

    int16_t i16(size_t off) const {
        uint16_t v;
        std::memcpy(&v, p + off, 2);
        if (swap) v = swap16(v);
        int16_t out;
        std::memcpy(&out, &v, 2);
        return out;
    }
    float f32(size_t off) const {
        uint32_t v;
        std::memcpy(&v, p + off, 4);
        if (swap) v = swap32(v);
        float out;
        std::memcpy(&out, &v, 4);
        return out;
    }
};

bool is_gzip(const std::vector<unsigned char>& bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in, const std::string& origin) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        fail(Errc::io_failure, "zlib init failed for " + origin);

    std::vector<unsigned char> out;
    std::vector<unsigned char> buf(1 << 16);
    zs.next_in = const_cast<unsigned char*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf.data();
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            fail(Errc::truncated_data, "corrupt gzip stream in " + origin);
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
        if (out.size() > kMaxDecompressed) {
            inflateEnd(&zs);
            fail(Errc::truncated_data, "decompressed size limit exceeded for " + origin);
        }
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            fail(Errc::truncated_data, "gzip stream ends early in " + origin);
        }
    }
    inflateEnd(&zs);
    return out;
}

size_t element_size(NiftiDatatype dt) {
    switch (dt) {
        case NiftiDatatype::uint8: return 1;
        case NiftiDatatype::int16: return 2;
        case NiftiDatatype::float32: return 4;
    }
    return 0;
}

void put_i32(std::vector<unsigned char>& b, size_t off, int32_t v) { std::memcpy(b.data() + off, &v, 4); }
void put_i16(std::vector<unsigned char>& b, size_t off, int16_t v) { std::memcpy(b.data() + off, &v, 2); }
void put_f32(std::vector<unsigned char>& b, size_t off, float v) { std::memcpy(b.data() + off, &v, 4); }

std::vector<unsigned char> build_header(const std::array<int, 3>& dims,
                                        const std::array<double, 3>& spacing,
                                        NiftiDatatype dt) {
    std::vector<unsigned char> h(kVoxOffset, 0);
    put_i32(h, 0, 348);
    put_i16(h, 40, 3); // dim[0]
    for (int i = 0; i < 3; ++i) put_i16(h, 42 + 2 * i, static_cast<int16_t>(dims[i]));
    for (int i = 3; i < 7; ++i) put_i16(h, 42 + 2 * i, 1);
    put_i16(h, 70, static_cast<int16_t>(dt));
    put_i16(h, 72, static_cast<int16_t>(element_size(dt) * 8));
    put_f32(h, 76, 1.0f); // pixdim[0] (qfac, unused here)
    for (int i = 0; i < 3; ++i) put_f32(h, 80 + 4 * i, static_cast<float>(spacing[i]));
    put_f32(h, 108, static_cast<float>(kVoxOffset));
    put_f32(h, 112, 1.0f); // scl_slope
    put_f32(h, 116, 0.0f); // scl_inter
    h[344] = 'n';
    h[345] = '+';
    h[346] = '1';
    h[347] = '\0';
    return h;
}

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_failure, "cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(Errc::io_failure, "read failed for " + path);
    return bytes;
}

} // namespace

Volume parse_nifti(const std::vector<unsigned char>& raw, const std::string& origin) {
    const std::vector<unsigned char>* bytes = &raw;
    std::vector<unsigned char> inflated;
    if (is_gzip(raw)) {
        inflated = gunzip(raw, origin);
        bytes = &inflated;
    }

    if (bytes->size() < kHeaderSize)
        fail(Errc::truncated_data, origin + ": " + std::to_string(bytes->size()) + " bytes, header needs 348");

    const unsigned char* p = bytes->data();
    if (!(p[344] == 'n' && p[345] == '+' && p[346] == '1' && p[347] == '\0'))
        fail(Errc::missing_magic, origin + ": no \"n+1\" magic at offset 344");

    // Byte-order heuristic: dim[0] is a small positive count in any sane file.
    Reader le{p, false};
    Reader be{p, true};
    Reader rd = le;
    int ndim = le.i16(40);
    if (ndim < 1 || ndim > 7) {
        ndim = be.i16(40);
        if (ndim < 1 || ndim > 7)
            fail(Errc::bad_header, origin + ": dim[0] outside [1,7] in both byte orders");
        rd = be;
    }

    VolumeHeader header;
    header.big_endian = rd.swap;
    for (int i = 0; i < 3; ++i) {
        int d = (i < ndim) ? rd.i16(42 + 2 * i) : 1;
        if (d < 1) fail(Errc::bad_header, origin + ": dim[" + std::to_string(i + 1) + "] < 1");
        header.dims[i] = d;
    }
    for (int i = 3; i < ndim; ++i) {
        int d = rd.i16(42 + 2 * i);
        if (d > 1) fail(Errc::bad_header, origin + ": 4D+ volumes not supported");
    }

    int16_t dt = rd.i16(70);
    if (dt != static_cast<int16_t>(NiftiDatatype::uint8) && dt != static_cast<int16_t>(NiftiDatatype::int16) &&
        dt != static_cast<int16_t>(NiftiDatatype::float32))
        fail(Errc::unsupported_datatype, origin + ": datatype code " + std::to_string(dt));
    header.datatype = static_cast<NiftiDatatype>(dt);

    for (int i = 0; i < 3; ++i) {
        float s = (i < ndim) ? rd.f32(80 + 4 * i) : 1.0f;
        if (!std::isfinite(s) || s <= 0.0f)
            fail(Errc::bad_header, origin + ": pixdim[" + std::to_string(i + 1) + "] not positive");
        header.spacing[i] = s;
    }

    header.scl_slope = rd.f32(112);
    header.scl_inter = rd.f32(116);
    if (!std::isfinite(header.scl_slope) || !std::isfinite(header.scl_inter))
        fail(Errc::bad_header, origin + ": non-finite scl_slope/scl_inter");

    float vox_offset_f = rd.f32(108);
    if (!std::isfinite(vox_offset_f) || vox_offset_f < static_cast<float>(kHeaderSize))
        fail(Errc::bad_header, origin + ": vox_offset " + std::to_string(vox_offset_f));
    size_t vox_offset = static_cast<size_t>(vox_offset_f);
    if (vox_offset > bytes->size())
        fail(Errc::truncated_data, origin + ": vox_offset beyond end of file");

    const size_t count = header.voxel_count();
    const size_t elsize = element_size(header.datatype);
    if (bytes->size() - vox_offset < count * elsize)
        fail(Errc::truncated_data, origin + ": data section holds " +
                                       std::to_string((bytes->size() - vox_offset) / elsize) + " of " +
                                       std::to_string(count) + " elements");

    const float slope = (header.scl_slope == 0.0f) ? 1.0f : header.scl_slope;
    const float inter = header.scl_inter;
    const unsigned char* src = p + vox_offset;

    Volume volume;
    volume.header = header;
    volume.data.resize(count);
    switch (header.datatype) {
        case NiftiDatatype::uint8:
            for (size_t i = 0; i < count; ++i) volume.data[i] = slope * static_cast<float>(src[i]) + inter;
            break;
        case NiftiDatatype::int16:
            for (size_t i = 0; i < count; ++i) {
                uint16_t v;
                std::memcpy(&v, src + 2 * i, 2);
                if (rd.swap) v = swap16(v);
                int16_t sv;
                std::memcpy(&sv, &v, 2);
                volume.data[i] = slope * static_cast<float>(sv) + inter;
            }
            break;
        case NiftiDatatype::float32:
            for (size_t i = 0; i < count; ++i) {
                uint32_t v;
                std::memcpy(&v, src + 4 * i, 4);
                if (rd.swap) v = swap32(v);
                float fv;
                std::memcpy(&fv, &v, 4);
                volume.data[i] = slope * fv + inter;
            }
            break;
    }

    for (size_t i = 0; i < count; ++i)
        if (!std::isfinite(volume.data[i]))
            fail(Errc::non_finite_voxel, origin + ": non-finite voxel at linear index " + std::to_string(i));

    return volume;
}

Volume read_nifti(const std::string& path) { return parse_nifti(read_file(path), path); }

void write_nifti(const Volume& volume, const std::string& path) {
    if (path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0)
        fail(Errc::io_failure, "compressed writing not supported: " + path);
    require(volume.data.size() == volume.header.voxel_count(), Errc::dim_mismatch,
            "volume data length does not match dims");
    for (float v : volume.data)
        if (!std::isfinite(v)) fail(Errc::non_finite_voxel, "refusing to write non-finite voxel");

    auto bytes = build_header(volume.header.dims, volume.header.spacing, NiftiDatatype::float32);
    const size_t payload = volume.data.size() * 4;
    bytes.resize(kVoxOffset + payload);
    std::memcpy(bytes.data() + kVoxOffset, volume.data.data(), payload);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(Errc::io_failure, "write failed: " + path);
}

MaskVolume read_mask(const std::string& path, const std::array<int, 3>& expected_dims) {
    Volume v = parse_nifti(read_file(path), path);
    if (v.header.datatype == NiftiDatatype::float32)
        fail(Errc::unsupported_datatype, path + ": mask must use an integer datatype");
    if (v.header.dims != expected_dims)
        fail(Errc::dim_mismatch, path + ": mask dims (" + std::to_string(v.header.dims[0]) + "," +
                                     std::to_string(v.header.dims[1]) + "," + std::to_string(v.header.dims[2]) +
                                     ") do not match the paired volume");
    MaskVolume m;
    m.dims = v.header.dims;
    m.data.resize(v.data.size());
    for (size_t i = 0; i < v.data.size(); ++i) m.data[i] = v.data[i] > 0.0f ? 1 : 0;
    return m;
}

void write_mask_nifti(const MaskVolume& mask, const std::string& path) {
    if (path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0)
        fail(Errc::io_failure, "compressed writing not supported: " + path);
    require(mask.data.size() == mask.voxel_count(), Errc::dim_mismatch,
            "mask data length does not match dims");

    auto bytes = build_header(mask.dims, {1.0, 1.0, 1.0}, NiftiDatatype::uint8);
    bytes.insert(bytes.end(), mask.data.begin(), mask.data.end());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(Errc::io_failure, "write failed: " + path);
}

} // namespace ctmae
