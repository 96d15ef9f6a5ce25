#pragma once

#include <stdexcept>
#include <string>

namespace ctmae {

// Every failure surfaced by the library carries one of these codes so callers
// (and tests) can dispatch without parsing messages.
enum class Errc {
    // volume_io
    missing_magic,
    unsupported_datatype,
    truncated_data,
    non_finite_voxel,
    bad_header,
    io_failure,
    dim_mismatch,
    // preprocess
    empty_manifest,
    degenerate_output,
    empty_mask,
    box_out_of_bounds,
    invalid_bounds,
    indivisible_side,
    // patching / autodiff / model
    shape_mismatch,
    bad_ratio,
    head_divisibility,
    index_out_of_range,
    label_out_of_range,
    non_scalar_loss,
    // training
    zero_class_count,
    negative_alpha,
    version_mismatch,
    corrupt_checksum,
    // cli / config / data plumbing
    config_error,
    data_error,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool ok, Errc code, const std::string& message) {
    if (!ok) fail(code, message);
}

} // namespace ctmae
