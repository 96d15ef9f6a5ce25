#include "ctmae/checkpoint.hpp"

#include "json.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace ctmae {

using nlohmann::json;

namespace {

constexpr unsigned char kMagic[8] = {'C', 'T', 'M', 'A', 'E', 0, 0, 1};

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<unsigned char>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

uint32_t get_u32(const unsigned char* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}

void put_floats(std::vector<unsigned char>& out, const MatXf& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            uint32_t bits;
            const float f = m(i, j);
            std::memcpy(&bits, &f, 4);
            put_u32(out, bits);
        }
}

MatXf get_floats(const unsigned char* p, int rows, int cols) {
    MatXf m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const uint32_t bits = get_u32(p);
            p += 4;
            float f;
            std::memcpy(&f, &bits, 4);
            m(i, j) = f;
        }
    return m;
}

// Directory order: the canonical parameter list, each tensor followed by its
// optimizer moments when present. Deterministic, so save(load(x)) == x.
struct DirEntry {
    std::string name;
    const MatXf* tensor;
};

std::vector<DirEntry> directory(const ModelConfig& mc, const ParamMap<float>& params,
                                const AdamWState<float>& opt) {
    std::vector<DirEntry> dir;
    for (const auto& shape : param_shapes(mc)) {
        auto it = params.find(shape.name);
        require(it != params.end(), Errc::shape_mismatch, "missing tensor " + shape.name);
        require(it->second.rows() == shape.rows && it->second.cols() == shape.cols,
                Errc::shape_mismatch, "tensor " + shape.name + " has the wrong shape");
        dir.push_back({shape.name, &it->second});
        auto mit = opt.m.find(shape.name);
        if (mit != opt.m.end()) {
            dir.push_back({"opt.m." + shape.name, &mit->second});
            dir.push_back({"opt.v." + shape.name, &opt.v.at(shape.name)});
        }
    }
    return dir;
}

[[noreturn]] void corrupt(const std::string& path, const std::string& why) {
    fail(Errc::corrupt_checksum, path + ": " + why);
}

} // namespace

void save_checkpoint(const std::string& path, const ModelConfig& mc, const RunConfig& rc,
                     int iter, const ParamMap<float>& params, const AdamWState<float>& opt) {
    mc.validate();
    const auto dir = directory(mc, params, opt);

    json meta;
    meta["version"] = 1;
    const json full = json::parse(config_to_json(ConfigFile{mc, rc, DataConfig{}}));
    meta["model"] = full.at("model");
    meta["run"] = full.at("run");
    meta["config_hash"] = mc.hash();
    meta["iter"] = iter;
    meta["opt_step"] = opt.step;
    uint64_t offset = 0;
    json tensors = json::array();
    for (const auto& entry : dir) {
        tensors.push_back({{"name", entry.name},
                           {"rows", entry.tensor->rows()},
                           {"cols", entry.tensor->cols()},
                           {"offset", offset}});
        offset += 4ull * static_cast<uint64_t>(entry.tensor->size());
    }
    meta["tensors"] = std::move(tensors);
    const std::string meta_text = meta.dump();

    std::vector<unsigned char> bytes(kMagic, kMagic + 8);
    put_u64(bytes, meta_text.size());
    bytes.insert(bytes.end(), meta_text.begin(), meta_text.end());
    for (const auto& entry : dir) put_floats(bytes, *entry.tensor);
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
    put_u32(bytes, crc);

    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_failure, "cannot open " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    require(out.good(), Errc::io_failure, "write failed on " + path);
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig* expect) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io_failure, "cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());

    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 5) != 0)
        fail(Errc::version_mismatch, path + ": not a checkpoint file");
    if (bytes[5] != 0 || bytes[6] != 0 || bytes[7] != 1)
        fail(Errc::version_mismatch, path + ": unsupported checkpoint version");
    if (bytes.size() < 8 + 8 + 4) corrupt(path, "truncated");

    const uint32_t stored_crc = get_u32(bytes.data() + bytes.size() - 4);
    const uint32_t actual_crc = static_cast<uint32_t>(
        crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
    if (stored_crc != actual_crc) corrupt(path, "checksum mismatch");

    const uint64_t meta_len = get_u64(bytes.data() + 8);
    if (16 + meta_len + 4 > bytes.size()) corrupt(path, "metadata length out of range");
    json meta;
    try {
        meta = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(meta_len));
    } catch (const json::parse_error&) {
        corrupt(path, "metadata is not valid JSON");
    }

    Checkpoint ckpt;
    try {
        if (meta.at("version").get<int>() != 1)
            fail(Errc::version_mismatch, path + ": unsupported metadata version");
        const json doc{{"model", meta.at("model")}, {"run", meta.at("run")}};
        const auto parsed = parse_config_text(doc.dump(), ConfigFile{});
        ckpt.model = parsed.config.model;
        ckpt.run = parsed.config.run;
        ckpt.iter = meta.at("iter").get<int>();
        ckpt.opt.step = meta.at("opt_step").get<long>();
        if (meta.at("config_hash").get<uint64_t>() != ckpt.model.hash())
            fail(Errc::version_mismatch, path + ": config hash disagrees with stored config");
    } catch (const json::exception&) {
        corrupt(path, "incomplete metadata");
    }
    if (expect && expect->hash() != ckpt.model.hash())
        fail(Errc::version_mismatch,
             path + ": checkpoint was trained with a different model configuration");

    const unsigned char* payload = bytes.data() + 16 + meta_len;
    const uint64_t payload_len = bytes.size() - 4 - 16 - meta_len;
    try {
        for (const auto& t : meta.at("tensors")) {
            const std::string name = t.at("name").get<std::string>();
            const int rows = t.at("rows").get<int>(), cols = t.at("cols").get<int>();
            const uint64_t off = t.at("offset").get<uint64_t>();
            if (rows < 0 || cols < 0 ||
                off + 4ull * rows * cols > payload_len)
                corrupt(path, "tensor " + name + " exceeds the payload");
            MatXf m = get_floats(payload + off, rows, cols);
            if (name.rfind("opt.m.", 0) == 0)
                ckpt.opt.m.emplace(name.substr(6), std::move(m));
            else if (name.rfind("opt.v.", 0) == 0)
                ckpt.opt.v.emplace(name.substr(6), std::move(m));
            else
                ckpt.params.emplace(name, std::move(m));
        }
    } catch (const json::exception&) {
        corrupt(path, "malformed tensor directory");
    }

    // the directory must reproduce the model's parameter set exactly
    for (const auto& shape : param_shapes(ckpt.model)) {
        auto it = ckpt.params.find(shape.name);
        if (it == ckpt.params.end() || it->second.rows() != shape.rows ||
            it->second.cols() != shape.cols)
            corrupt(path, "tensor directory disagrees with the stored model config");
    }
    if (ckpt.params.size() != param_shapes(ckpt.model).size())
        corrupt(path, "unexpected extra tensors");
    if (ckpt.opt.m.size() != ckpt.opt.v.size()) corrupt(path, "optimizer moments do not pair up");
    return ckpt;
}

} // namespace ctmae
