#include "ctmae/manifest.hpp"

#include "ctmae/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace ctmae {

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_failure, "cannot open manifest " + path);

    // Relative entries are taken relative to the manifest itself, so a corpus
    // directory can be moved or read from any working directory.
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    const auto resolve = [&base](const std::string& p) {
        const std::filesystem::path fp(p);
        if (fp.is_absolute() || base.empty()) return p;
        return (base / fp).string();
    };

    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);

        if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty())
            fail(Errc::data_error,
                 path + ":" + std::to_string(lineno) + ": expected 'volume<TAB>mask[<TAB>label]'");

        ManifestEntry e;
        e.volume_path = resolve(fields[0]);
        e.mask_path = resolve(fields[1]);
        if (fields.size() == 3) {
            try {
                size_t pos = 0;
                e.label = std::stoi(fields[2], &pos);
                if (pos != fields[2].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                fail(Errc::data_error, path + ":" + std::to_string(lineno) + ": bad label '" + fields[2] + "'");
            }
            if (e.label < 0)
                fail(Errc::data_error, path + ":" + std::to_string(lineno) + ": negative label");
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open manifest for writing " + path);
    for (const auto& e : entries) {
        out << e.volume_path << '\t' << e.mask_path;
        if (e.label >= 0) out << '\t' << e.label;
        out << '\n';
    }
    if (!out) fail(Errc::io_failure, "manifest write failed " + path);
}

} // namespace ctmae
