#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sempipe/record.hpp"

namespace sempipe {

struct CacheKey {
    std::string dataset_id;
    std::string prefix_fingerprint;  // hash over the plan prefix that produced the records

    std::string hash() const;
};

/// On-disk cache of intermediate result sets, one file per entry,
/// content-addressed by key hash. Entries are immutable once written;
/// corrupted entries are treated as a miss and evicted.
class ResultCache {
public:
    explicit ResultCache(std::filesystem::path dir);

    std::optional<std::vector<Record>> get(const CacheKey& key) const;
    void put(const CacheKey& key, const std::vector<Record>& records,
             const std::string& stats_fingerprint = "");

    // stats fingerprint stored with the entry, if present
    std::optional<std::string> stats_fingerprint(const CacheKey& key) const;

    void clear();
    const std::filesystem::path& directory() const { return dir_; }

private:
    std::filesystem::path entry_path(const CacheKey& key) const;
    std::filesystem::path dir_;
};

}  // namespace sempipe
