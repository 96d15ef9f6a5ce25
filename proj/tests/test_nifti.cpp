#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ctmae/errors.hpp"
#include "ctmae/nifti.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <optional>
#include <vector>

using namespace ctmae;

namespace {

std::filesystem::path tmp_dir() {
    auto p = std::filesystem::temp_directory_path() / "ctmae_nifti_test";
    std::filesystem::create_directories(p);
    return p;
}

template <class T>
void put(std::vector<unsigned char>& b, size_t off, T v) {
    std::memcpy(b.data() + off, &v, sizeof(T));
}

// Minimal valid single-file header + payload; payload bytes are appended raw.
std::vector<unsigned char> make_nifti_bytes(std::array<int16_t, 3> dims, int16_t datatype,
                                            int16_t bitpix, const std::vector<unsigned char>& payload,
                                            float slope = 1.0f, float inter = 0.0f,
                                            std::array<float, 3> spacing = {1, 1, 1}) {
    std::vector<unsigned char> b(352, 0);
    put<int32_t>(b, 0, 348);
    put<int16_t>(b, 40, 3);
    put<int16_t>(b, 42, dims[0]);
    put<int16_t>(b, 44, dims[1]);
    put<int16_t>(b, 46, dims[2]);
    put<int16_t>(b, 70, datatype);
    put<int16_t>(b, 72, bitpix);
    put<float>(b, 76, 1.0f);
    put<float>(b, 80, spacing[0]);
    put<float>(b, 84, spacing[1]);
    put<float>(b, 88, spacing[2]);
    put<float>(b, 108, 352.0f);
    put<float>(b, 112, slope);
    put<float>(b, 116, inter);
    b[344] = 'n';
    b[345] = '+';
    b[346] = '1';
    b[347] = 0;
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
}

void swap16_at(std::vector<unsigned char>& b, size_t off) { std::swap(b[off], b[off + 1]); }
void swap32_at(std::vector<unsigned char>& b, size_t off) {
    std::swap(b[off], b[off + 3]);
    std::swap(b[off + 1], b[off + 2]);
}

std::vector<unsigned char> gzip_bytes(const std::vector<unsigned char>& in) {
    z_stream zs{};
    REQUIRE(deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) ==
            Z_OK);
    std::vector<unsigned char> out(deflateBound(&zs, static_cast<uLong>(in.size())) + 64);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    REQUIRE(deflate(&zs, Z_FINISH) == Z_STREAM_END);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

template <class F>
std::optional<Errc> thrown_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

} // namespace

TEST_CASE("write then read is voxel exact") {
    Volume v;
    v.header.dims = {4, 3, 2};
    v.header.spacing = {0.5, 0.75, 2.0};
    v.data.resize(24);
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(i) * 1.25f - 7.0f;

    auto path = (tmp_dir() / "roundtrip.nii").string();
    write_nifti(v, path);
    Volume r = read_nifti(path);
    CHECK(r.header.dims == v.header.dims);
    for (int a = 0; a < 3; ++a) CHECK(r.header.spacing[a] == doctest::Approx(v.header.spacing[a]));
    REQUIRE(r.data.size() == v.data.size());
    for (size_t i = 0; i < v.data.size(); ++i) CHECK(r.data[i] == v.data[i]);
}

TEST_CASE("int16 payload honors slope and intercept") {
    std::vector<unsigned char> payload(8 * 2);
    std::vector<int16_t> raw{0, 1, -1, 100, -100, 500, 30, -7};
    std::memcpy(payload.data(), raw.data(), payload.size());
    auto bytes = make_nifti_bytes({2, 2, 2}, 4, 16, payload, 2.0f, -1000.0f);
    Volume v = parse_nifti(bytes);
    for (size_t i = 0; i < raw.size(); ++i)
        CHECK(v.data[i] == doctest::Approx(2.0f * raw[i] - 1000.0f));
    CHECK(v.header.datatype == NiftiDatatype::int16);
}

TEST_CASE("uint8 payload reads and scl_slope zero means one") {
    std::vector<unsigned char> payload{0, 1, 2, 3, 4, 5, 6, 255};
    auto bytes = make_nifti_bytes({2, 2, 2}, 2, 8, payload, 0.0f, 10.0f);
    Volume v = parse_nifti(bytes);
    CHECK(v.data[0] == doctest::Approx(10.0f));
    CHECK(v.data[7] == doctest::Approx(265.0f));
}

TEST_CASE("big endian stream is detected by the dim heuristic") {
    std::vector<unsigned char> payload(4 * 4);
    std::vector<float> vals{1.5f, -2.0f, 3.25f, 0.0f};
    std::memcpy(payload.data(), vals.data(), payload.size());
    auto bytes = make_nifti_bytes({4, 1, 1}, 16, 32, payload, 1.0f, 0.0f, {2.0f, 3.0f, 4.0f});

    // Swap every field the parser reads, and the payload.
    swap32_at(bytes, 0);
    for (size_t off : {40u, 42u, 44u, 46u, 48u, 50u, 52u, 54u, 70u, 72u}) swap16_at(bytes, off);
    for (size_t off : {76u, 80u, 84u, 88u, 108u, 112u, 116u}) swap32_at(bytes, off);
    for (int i = 0; i < 4; ++i) swap32_at(bytes, 352 + 4 * static_cast<size_t>(i));

    Volume v = parse_nifti(bytes);
    CHECK(v.header.big_endian);
    CHECK(v.header.dims == std::array<int, 3>{4, 1, 1});
    CHECK(v.header.spacing[1] == doctest::Approx(3.0));
    for (size_t i = 0; i < vals.size(); ++i) CHECK(v.data[i] == vals[i]);
}

TEST_CASE("gzip compressed stream parses identically") {
    std::vector<unsigned char> payload(8 * 4);
    std::vector<float> vals{0, 1, 2, 3, 4, 5, 6, 7};
    std::memcpy(payload.data(), vals.data(), payload.size());
    auto bytes = make_nifti_bytes({2, 2, 2}, 16, 32, payload);
    auto plain = parse_nifti(bytes);
    auto zipped = parse_nifti(gzip_bytes(bytes));
    CHECK(plain.data == zipped.data);
    CHECK(plain.header.dims == zipped.header.dims);

    auto path = (tmp_dir() / "vol.nii.gz").string();
    std::FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f);
    auto gz = gzip_bytes(bytes);
    REQUIRE(std::fwrite(gz.data(), 1, gz.size(), f) == gz.size());
    std::fclose(f);
    CHECK(read_nifti(path).data == plain.data);
}

TEST_CASE("malformed streams raise the specific error") {
    std::vector<unsigned char> payload(8 * 4, 0);
    auto good = make_nifti_bytes({2, 2, 2}, 16, 32, payload);

    auto truncated_header = std::vector<unsigned char>(good.begin(), good.begin() + 100);
    CHECK(thrown_code([&] { parse_nifti(truncated_header); }) == Errc::truncated_data);

    auto bad_magic = good;
    bad_magic[344] = 'x';
    CHECK(thrown_code([&] { parse_nifti(bad_magic); }) == Errc::missing_magic);

    auto bad_type = good;
    put<int16_t>(bad_type, 70, 8); // int32, unsupported
    CHECK(thrown_code([&] { parse_nifti(bad_type); }) == Errc::unsupported_datatype);

    auto short_payload = good;
    short_payload.resize(good.size() - 4);
    CHECK(thrown_code([&] { parse_nifti(short_payload); }) == Errc::truncated_data);

    auto nan_payload = good;
    float nan = std::numeric_limits<float>::quiet_NaN();
    put<float>(nan_payload, 352, nan);
    CHECK(thrown_code([&] { parse_nifti(nan_payload); }) == Errc::non_finite_voxel);

    auto low_offset = good;
    put<float>(low_offset, 108, 100.0f);
    CHECK(thrown_code([&] { parse_nifti(low_offset); }) == Errc::bad_header);

    auto bad_dim0 = good;
    put<int16_t>(bad_dim0, 40, 9); // not plausible in either byte order
    CHECK(thrown_code([&] { parse_nifti(bad_dim0); }) == Errc::bad_header);

    auto zero_spacing = good;
    put<float>(zero_spacing, 80, 0.0f);
    CHECK(thrown_code([&] { parse_nifti(zero_spacing); }) == Errc::bad_header);

    auto four_d = good;
    put<int16_t>(four_d, 40, 4);
    put<int16_t>(four_d, 48, 2); // dim[4] = 2 volumes
    CHECK(thrown_code([&] { parse_nifti(four_d); }) == Errc::bad_header);
}

TEST_CASE("mask round trip binarizes labels") {
    MaskVolume m;
    m.dims = {3, 2, 2};
    m.data = {0, 1, 2, 0, 3, 0, 1, 1, 0, 5, 0, 1};
    auto path = (tmp_dir() / "mask.nii").string();
    write_mask_nifti(m, path);

    MaskVolume r = read_mask(path, {3, 2, 2});
    REQUIRE(r.data.size() == m.data.size());
    for (size_t i = 0; i < m.data.size(); ++i) CHECK(r.data[i] == (m.data[i] > 0 ? 1 : 0));

    CHECK(thrown_code([&] { read_mask(path, {2, 3, 2}); }) == Errc::dim_mismatch);
}

TEST_CASE("a float volume is rejected as a mask") {
    Volume v;
    v.header.dims = {2, 2, 2};
    v.data.assign(8, 1.0f);
    auto path = (tmp_dir() / "floatmask.nii").string();
    write_nifti(v, path);
    CHECK(thrown_code([&] { read_mask(path, {2, 2, 2}); }) == Errc::unsupported_datatype);
}

TEST_CASE("writer rejects gz paths and inconsistent buffers") {
    Volume v;
    v.header.dims = {2, 2, 2};
    v.data.assign(8, 0.0f);
    CHECK(thrown_code([&] { write_nifti(v, (tmp_dir() / "x.nii.gz").string()); }) ==
          Errc::io_failure);

    Volume bad = v;
    bad.data.resize(7);
    CHECK(thrown_code([&] { write_nifti(bad, (tmp_dir() / "bad.nii").string()); }) ==
          Errc::dim_mismatch);
}

TEST_CASE("missing file reports io_failure") {
    CHECK(thrown_code([] { read_nifti("/nonexistent/path/vol.nii"); }) == Errc::io_failure);
}
