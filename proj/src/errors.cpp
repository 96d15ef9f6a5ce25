#include "ctmae/errors.hpp"

namespace ctmae {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::missing_magic: return "MissingMagic";
        case Errc::unsupported_datatype: return "UnsupportedDatatype";
        case Errc::truncated_data: return "TruncatedData";
        case Errc::non_finite_voxel: return "NonFiniteVoxel";
        case Errc::bad_header: return "BadHeader";
        case Errc::io_failure: return "IoFailure";
        case Errc::dim_mismatch: return "DimMismatch";
        case Errc::empty_manifest: return "EmptyManifest";
        case Errc::degenerate_output: return "DegenerateOutput";
        case Errc::empty_mask: return "EmptyMask";
        case Errc::box_out_of_bounds: return "BoxOutOfBounds";
        case Errc::invalid_bounds: return "InvalidBounds";
        case Errc::indivisible_side: return "IndivisibleSide";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::bad_ratio: return "BadRatio";
        case Errc::head_divisibility: return "HeadDivisibility";
        case Errc::index_out_of_range: return "IndexOutOfRange";
        case Errc::label_out_of_range: return "LabelOutOfRange";
        case Errc::non_scalar_loss: return "NonScalarLoss";
        case Errc::zero_class_count: return "ZeroClassCount";
        case Errc::negative_alpha: return "NegativeAlpha";
        case Errc::version_mismatch: return "VersionMismatch";
        case Errc::corrupt_checksum: return "CorruptChecksum";
        case Errc::config_error: return "ConfigError";
        case Errc::data_error: return "DataError";
    }
    return "UnknownError";
}

} // namespace ctmae
