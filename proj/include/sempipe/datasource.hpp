#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sempipe/record.hpp"

namespace sempipe {

struct DatasourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SourceKind { TextDir, GroupDir, SingleFile };

std::string to_string(SourceKind k);
SourceKind source_kind_from_string(const std::string& s);

struct DataSourceDescriptor {
    std::string dataset_id;
    SourceKind kind = SourceKind::TextDir;
    std::filesystem::path location;
    std::string base_schema;
};

struct ScanResult {
    std::vector<Record> records;
    int skipped = 0;  // undecodable files, skipped with a warning
    std::vector<std::string> warnings;
};

/// Named datasources, persisted to a human-editable text file so registrations
/// survive across runs.
class DataSourceRegistry {
public:
    DataSourceRegistry() = default;
    explicit DataSourceRegistry(std::filesystem::path store) : store_(std::move(store)) {
        if (std::filesystem::exists(store_)) load(store_);
    }

    const DataSourceDescriptor& register_datasource(const DataSourceDescriptor& desc);
    bool contains(const std::string& id) const { return sources_.count(id) > 0; }
    const DataSourceDescriptor& get(const std::string& id) const;
    std::vector<std::string> ids() const;

    void load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;

private:
    void persist() const {
        if (!store_.empty()) save(store_);
    }

    std::map<std::string, DataSourceDescriptor> sources_;
    std::filesystem::path store_;
};

// One record per base object, ordered by lexicographic filename sort.
// Undecodable text files are skipped and counted.
//
// GroupDir convention: each subdirectory is one listing; its lexicographically
// first .txt file becomes text_content, remaining image-extension files
// populate image_contents (base64), the subdirectory name becomes `listing`.
ScanResult scan(const DataSourceDescriptor& desc, const SchemaRegistry& schemas);

bool is_valid_utf8(const std::string& text);

}  // namespace sempipe
