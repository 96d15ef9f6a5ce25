#pragma once

#include <string>
#include <vector>

namespace ctmae {

// One scan record: tab-separated "volume<TAB>mask[<TAB>label]".
struct ManifestEntry {
    std::string volume_path;
    std::string mask_path;
    int label = -1; // -1 when unlabeled
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

} // namespace ctmae
