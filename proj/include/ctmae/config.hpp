#pragma once

#include "ctmae/model.hpp"
#include "ctmae/training.hpp"

#include <string>
#include <vector>

namespace ctmae {

struct DataConfig {
    std::string manifest;
    std::string out_dir = ".";
    std::string init_checkpoint; // starting weights for finetune / linprobe / eval
};

// The three sections of a run description. Serialized as JSON with exactly
// the keys named by the struct fields; anything else is rejected.
struct ConfigFile {
    ModelConfig model;
    RunConfig run;
    DataConfig data;
};

// Pretty-printed JSON of every effective setting (the echo written next to
// run outputs).
std::string config_to_json(const ConfigFile& cfg);

struct ParsedConfig {
    ConfigFile config;
    std::vector<std::string> keys_present; // "section.key" for each key in the document
};

// Overlay a JSON document onto `base`. Missing keys keep the base value;
// unknown sections or keys fail with config_error, as do type mismatches
// and out-of-range enums.
ParsedConfig parse_config_text(const std::string& text, const ConfigFile& base);
ParsedConfig parse_config_file(const std::string& path, const ConfigFile& base);

// Preset names: "paper-pt", "paper-ft", "paper-lp", or "desk" (which picks
// the desk run matching `mode`). The paper-* presets carry their own modality
// and reject a conflicting mode.
ConfigFile preset_config(const std::string& name, Mode mode);

// The subset of keys_present whose parsed value differs from the preset's —
// the cases where an explicit config entry wins over the preset.
std::vector<std::string> preset_conflicts(const ConfigFile& preset, const ConfigFile& parsed,
                                          const std::vector<std::string>& keys_present);

Mode mode_from_name(const std::string& name);
LossVariant loss_variant_from_name(const std::string& name);

} // namespace ctmae
