#pragma once

#include "ctmae/config.hpp"
#include "ctmae/model.hpp"
#include "ctmae/training.hpp"

#include <string>

namespace ctmae {

struct Checkpoint {
    ModelConfig model;
    RunConfig run;
    int iter = 0;
    ParamMap<float> params;
    AdamWState<float> opt;
};

// On-disk layout: 8-byte magic "CTMAE\0\0\x01", a u64-LE-length-prefixed JSON
// metadata document (configs, iteration, tensor directory with offsets), the
// raw little-endian float32 tensor payloads, and a trailing CRC-32 over all
// preceding bytes. Optimizer moments ride along under "opt.m." / "opt.v."
// names; a file saved right after load is byte-identical.
void save_checkpoint(const std::string& path, const ModelConfig& mc, const RunConfig& rc,
                     int iter, const ParamMap<float>& params, const AdamWState<float>& opt);

// `expect`, when given, must hash-match the stored model config
// (version_mismatch otherwise). Any structural damage is corrupt_checksum.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig* expect = nullptr);

} // namespace ctmae
