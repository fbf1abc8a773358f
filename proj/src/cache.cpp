#include "sempipe/cache.hpp"

#include <fstream>

#include "sempipe/fingerprint.hpp"

namespace sempipe {

namespace fs = std::filesystem;

std::string CacheKey::hash() const {
    Fnv1a h;
    h.update(dataset_id).update(prefix_fingerprint);
    return h.hex();
}

ResultCache::ResultCache(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

fs::path ResultCache::entry_path(const CacheKey& key) const {
    return dir_ / (key.hash() + ".json");
}

std::optional<std::vector<Record>> ResultCache::get(const CacheKey& key) const {
    fs::path p = entry_path(key);
    std::ifstream in(p);
    if (!in) return std::nullopt;
    try {
        Value entry = Value::parse(in);
        // exact key equality required; hash collision would be observable here
        if (entry.at("dataset_id") != key.dataset_id ||
            entry.at("prefix_fingerprint") != key.prefix_fingerprint)
            return std::nullopt;
        std::vector<Record> out;
        for (const Value& rj : entry.at("records")) out.push_back(Record::from_json(rj));
        return out;
    } catch (const std::exception&) {
        in.close();
        std::error_code ec;
        fs::remove(p, ec);  // corrupted entry: evict, treat as miss
        return std::nullopt;
    }
}

void ResultCache::put(const CacheKey& key, const std::vector<Record>& records,
                      const std::string& stats_fingerprint) {
    Value recs = Value::array();
    for (const Record& r : records) recs.push_back(r.to_json());
    Value entry{{"dataset_id", key.dataset_id},
                {"prefix_fingerprint", key.prefix_fingerprint},
                {"stats_fingerprint", stats_fingerprint},
                {"records", recs}};
    fs::path p = entry_path(key);
    if (fs::exists(p)) return;  // entries are immutable once written
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << entry.dump();
    }
    fs::rename(tmp, p);
}

std::optional<std::string> ResultCache::stats_fingerprint(const CacheKey& key) const {
    std::ifstream in(entry_path(key));
    if (!in) return std::nullopt;
    try {
        Value entry = Value::parse(in);
        return entry.value("stats_fingerprint", std::string{});
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void ResultCache::clear() {
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir_, ec)) fs::remove_all(e.path(), ec);
}

}  // namespace sempipe
