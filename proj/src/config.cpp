#include "ctmae/config.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace ctmae {

using nlohmann::json;

Mode mode_from_name(const std::string& name) {
    if (name == "pretrain") return Mode::pretrain;
    if (name == "finetune") return Mode::finetune;
    if (name == "linear_probe") return Mode::linear_probe;
    fail(Errc::config_error, "unknown modality \"" + name + "\"");
}

LossVariant loss_variant_from_name(const std::string& name) {
    if (name == "standard_mae") return LossVariant::standard_mae;
    if (name == "lung_aware") return LossVariant::lung_aware;
    fail(Errc::config_error, "unknown loss variant \"" + name + "\"");
}

namespace {

json model_json(const ModelConfig& m) {
    return json{{"side", m.side},
                {"patch", m.patch},
                {"enc_dim", m.enc_dim},
                {"enc_layers", m.enc_layers},
                {"enc_heads", m.enc_heads},
                {"dec_dim", m.dec_dim},
                {"dec_layers", m.dec_layers},
                {"dec_heads", m.dec_heads},
                {"mlp_ratio", m.mlp_ratio},
                {"n_classes", m.n_classes},
                {"mask_after_encode", m.mask_after_encode}};
}

json run_json(const RunConfig& r) {
    return json{{"modality", mode_name(r.modality)},
                {"batch_size", r.batch_size},
                {"base_lr", r.base_lr},
                {"weight_decay", r.weight_decay},
                {"total_iters", r.total_iters},
                {"warmup_fraction", r.warmup_fraction},
                {"loss_variant", loss_variant_name(r.loss_variant)},
                {"alpha", r.alpha},
                {"lung_threshold", r.lung_threshold},
                {"mask_ratio", r.mask_ratio},
                {"seed", r.seed},
                {"augment", r.augment},
                {"checkpoint_every", r.checkpoint_every}};
}

json data_json(const DataConfig& d) {
    return json{{"manifest", d.manifest},
                {"out_dir", d.out_dir},
                {"init_checkpoint", d.init_checkpoint}};
}

json config_json(const ConfigFile& cfg) {
    return json{{"model", model_json(cfg.model)}, {"run", run_json(cfg.run)},
                {"data", data_json(cfg.data)}};
}

// Field binders: each known key writes into the target struct, with the JSON
// type checked first.
void set_int(const json& v, const std::string& where, int& out) {
    if (!v.is_number_integer())
        fail(Errc::config_error, where + " must be an integer");
    out = v.get<int>();
}

void set_u64(const json& v, const std::string& where, uint64_t& out) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<int64_t>() < 0))
        fail(Errc::config_error, where + " must be a non-negative integer");
    out = v.get<uint64_t>();
}

void set_real(const json& v, const std::string& where, double& out) {
    if (!v.is_number())
        fail(Errc::config_error, where + " must be a number");
    out = v.get<double>();
}

void set_bool(const json& v, const std::string& where, bool& out) {
    if (!v.is_boolean())
        fail(Errc::config_error, where + " must be a boolean");
    out = v.get<bool>();
}

void set_string(const json& v, const std::string& where, std::string& out) {
    if (!v.is_string())
        fail(Errc::config_error, where + " must be a string");
    out = v.get<std::string>();
}

void apply_model(const json& section, ModelConfig& m, std::vector<std::string>& seen) {
    for (const auto& [key, value] : section.items()) {
        const std::string where = "model." + key;
        if (key == "side") set_int(value, where, m.side);
        else if (key == "patch") set_int(value, where, m.patch);
        else if (key == "enc_dim") set_int(value, where, m.enc_dim);
        else if (key == "enc_layers") set_int(value, where, m.enc_layers);
        else if (key == "enc_heads") set_int(value, where, m.enc_heads);
        else if (key == "dec_dim") set_int(value, where, m.dec_dim);
        else if (key == "dec_layers") set_int(value, where, m.dec_layers);
        else if (key == "dec_heads") set_int(value, where, m.dec_heads);
        else if (key == "mlp_ratio") set_int(value, where, m.mlp_ratio);
        else if (key == "n_classes") set_int(value, where, m.n_classes);
        else if (key == "mask_after_encode") set_bool(value, where, m.mask_after_encode);
        else fail(Errc::config_error, "unknown key " + where);
        seen.push_back(where);
    }
}

void apply_run(const json& section, RunConfig& r, std::vector<std::string>& seen) {
    for (const auto& [key, value] : section.items()) {
        const std::string where = "run." + key;
        if (key == "modality") {
            std::string name;
            set_string(value, where, name);
            r.modality = mode_from_name(name);
        } else if (key == "batch_size") set_int(value, where, r.batch_size);
        else if (key == "base_lr") set_real(value, where, r.base_lr);
        else if (key == "weight_decay") set_real(value, where, r.weight_decay);
        else if (key == "total_iters") set_int(value, where, r.total_iters);
        else if (key == "warmup_fraction") set_real(value, where, r.warmup_fraction);
        else if (key == "loss_variant") {
            std::string name;
            set_string(value, where, name);
            r.loss_variant = loss_variant_from_name(name);
        } else if (key == "alpha") set_real(value, where, r.alpha);
        else if (key == "lung_threshold") set_real(value, where, r.lung_threshold);
        else if (key == "mask_ratio") set_real(value, where, r.mask_ratio);
        else if (key == "seed") set_u64(value, where, r.seed);
        else if (key == "augment") set_bool(value, where, r.augment);
        else if (key == "checkpoint_every") set_int(value, where, r.checkpoint_every);
        else fail(Errc::config_error, "unknown key " + where);
        seen.push_back(where);
    }
}

void apply_data(const json& section, DataConfig& d, std::vector<std::string>& seen) {
    for (const auto& [key, value] : section.items()) {
        const std::string where = "data." + key;
        if (key == "manifest") set_string(value, where, d.manifest);
        else if (key == "out_dir") set_string(value, where, d.out_dir);
        else if (key == "init_checkpoint") set_string(value, where, d.init_checkpoint);
        else fail(Errc::config_error, "unknown key " + where);
        seen.push_back(where);
    }
}

} // namespace

std::string config_to_json(const ConfigFile& cfg) {
    return config_json(cfg).dump(2) + "\n";
}

ParsedConfig parse_config_text(const std::string& text, const ConfigFile& base) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(Errc::config_error, std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail(Errc::config_error, "config root must be an object");

    ParsedConfig out;
    out.config = base;
    for (const auto& [section, value] : doc.items()) {
        if (!value.is_object())
            fail(Errc::config_error, "section \"" + section + "\" must be an object");
        if (section == "model") apply_model(value, out.config.model, out.keys_present);
        else if (section == "run") apply_run(value, out.config.run, out.keys_present);
        else if (section == "data") apply_data(value, out.config.data, out.keys_present);
        else fail(Errc::config_error, "unknown section \"" + section + "\"");
    }
    return out;
}

ParsedConfig parse_config_file(const std::string& path, const ConfigFile& base) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::config_error, "cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), base);
}

ConfigFile preset_config(const std::string& name, Mode mode) {
    ConfigFile cfg;
    if (name == "paper-pt") {
        cfg.model = paper_model();
        cfg.run = paper_pt();
    } else if (name == "paper-ft") {
        cfg.model = paper_model();
        cfg.run = paper_ft();
    } else if (name == "paper-lp") {
        cfg.model = paper_model();
        cfg.run = paper_lp();
    } else if (name == "desk") {
        cfg.model = desk_model();
        cfg.run = mode == Mode::pretrain ? desk_pt()
                 : mode == Mode::finetune ? desk_ft()
                                          : desk_lp();
    } else {
        fail(Errc::config_error, "unknown preset \"" + name + "\"");
    }
    require(cfg.run.modality == mode, Errc::config_error,
            "preset " + name + " is a " + mode_name(cfg.run.modality) + " configuration");
    return cfg;
}

std::vector<std::string> preset_conflicts(const ConfigFile& preset, const ConfigFile& parsed,
                                          const std::vector<std::string>& keys_present) {
    const json a = config_json(preset), b = config_json(parsed);
    std::vector<std::string> out;
    for (const auto& key : keys_present) {
        const auto dot = key.find('.');
        const std::string section = key.substr(0, dot), field = key.substr(dot + 1);
        if (a.at(section).at(field) != b.at(section).at(field)) out.push_back(key);
    }
    return out;
}

} // namespace ctmae
