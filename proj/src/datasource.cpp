#include "sempipe/datasource.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sempipe {

namespace fs = std::filesystem;

std::string to_string(SourceKind k) {
    switch (k) {
        case SourceKind::TextDir: return "text_dir";
        case SourceKind::GroupDir: return "group_dir";
        case SourceKind::SingleFile: return "file";
    }
    return "text_dir";
}

SourceKind source_kind_from_string(const std::string& s) {
    if (s == "text_dir") return SourceKind::TextDir;
    if (s == "group_dir") return SourceKind::GroupDir;
    if (s == "file") return SourceKind::SingleFile;
    throw DatasourceError("unknown datasource kind '" + s + "'");
}

const DataSourceDescriptor& DataSourceRegistry::register_datasource(
    const DataSourceDescriptor& desc) {
    if (desc.dataset_id.empty()) throw DatasourceError("dataset_id must be nonempty");
    if (sources_.count(desc.dataset_id))
        throw DatasourceError("dataset '" + desc.dataset_id + "' already registered");
    if (!fs::exists(desc.location))
        throw DatasourceError("datasource location does not exist: " + desc.location.string());
    auto& stored = sources_.emplace(desc.dataset_id, desc).first->second;
    persist();
    return stored;
}

const DataSourceDescriptor& DataSourceRegistry::get(const std::string& id) const {
    auto it = sources_.find(id);
    if (it == sources_.end()) throw DatasourceError("unknown dataset '" + id + "'");
    return it->second;
}

std::vector<std::string> DataSourceRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : sources_) out.push_back(id);
    return out;
}

void DataSourceRegistry::load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DatasourceError("cannot read registry file: " + file.string());
    std::string line, current;
    std::map<std::string, std::string> kv;
    auto flush = [&]() {
        if (current.empty()) return;
        DataSourceDescriptor d;
        d.dataset_id = current;
        d.kind = source_kind_from_string(kv.at("kind"));
        d.location = kv.at("location");
        d.base_schema = kv.at("schema");
        sources_[d.dataset_id] = d;
        kv.clear();
    };
    while (std::getline(in, line)) {
        // trim
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            flush();
            current = line.substr(1, line.size() - 2);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DatasourceError("malformed registry line: " + line);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string s) {
            auto b2 = s.find_first_not_of(" \t");
            auto e2 = s.find_last_not_of(" \t");
            return b2 == std::string::npos ? std::string{} : s.substr(b2, e2 - b2 + 1);
        };
        kv[trim(key)] = trim(val);
    }
    flush();
}

void DataSourceRegistry::save(const fs::path& file) const {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw DatasourceError("cannot write registry file: " + file.string());
    out << "# sempipe datasource registry\n";
    for (const auto& [id, d] : sources_) {
        out << "\n[" << id << "]\n";
        out << "kind = " << to_string(d.kind) << "\n";
        out << "location = " << d.location.string() << "\n";
        out << "schema = " << d.base_schema << "\n";
    }
}

bool is_valid_utf8(const std::string& text) {
    size_t i = 0, n = text.size();
    while (i < n) {
        unsigned char c = text[i];
        int extra;
        if (c < 0x80) extra = 0;
        else if ((c & 0xE0) == 0xC0) extra = 1;
        else if ((c & 0xF0) == 0xE0) extra = 2;
        else if ((c & 0xF8) == 0xF0) extra = 3;
        else return false;
        if (i + extra >= n) {
            if (extra > 0) return false;
        }
        for (int k = 1; k <= extra; k++) {
            if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

namespace {

std::optional<std::string> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".gif" ||
           ext == ".bmp" || ext == ".webp";
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool dirs) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (dirs ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    return out;
}

Record make_text_record(const std::string& schema, const fs::path& file,
                        const std::string& contents, std::int64_t index) {
    Record r;
    r.schema = schema;
    r.source_id = file.filename().string();
    r.source_index = index;
    r.values["filename"] = file.filename().string();
    r.values["contents"] = contents;
    return r;
}

}  // namespace

ScanResult scan(const DataSourceDescriptor& desc, const SchemaRegistry& schemas) {
    (void)schemas;
    if (!fs::exists(desc.location))
        throw DatasourceError("datasource location unreadable: " + desc.location.string());
    ScanResult result;
    std::int64_t index = 0;

    switch (desc.kind) {
        case SourceKind::SingleFile: {
            auto contents = read_file(desc.location);
            if (!contents || !is_valid_utf8(*contents)) {
                result.skipped++;
                result.warnings.push_back("skipped undecodable file: " + desc.location.string());
                break;
            }
            result.records.push_back(make_text_record(desc.base_schema, desc.location, *contents, 0));
            break;
        }
        case SourceKind::TextDir: {
            for (const fs::path& p : sorted_entries(desc.location, /*dirs=*/false)) {
                auto contents = read_file(p);
                if (!contents || !is_valid_utf8(*contents)) {
                    result.skipped++;
                    result.warnings.push_back("skipped undecodable file: " + p.string());
                    continue;
                }
                result.records.push_back(
                    make_text_record(desc.base_schema, p, *contents, index++));
            }
            break;
        }
        case SourceKind::GroupDir: {
            for (const fs::path& dir : sorted_entries(desc.location, /*dirs=*/true)) {
                std::optional<fs::path> text_file;
                std::vector<fs::path> images;
                for (const fs::path& p : sorted_entries(dir, /*dirs=*/false)) {
                    if (!text_file && p.extension() == ".txt") text_file = p;
                    else if (has_image_extension(p)) images.push_back(p);
                }
                if (!text_file) {
                    result.skipped++;
                    result.warnings.push_back("skipped group without .txt file: " + dir.string());
                    continue;
                }
                auto contents = read_file(*text_file);
                if (!contents || !is_valid_utf8(*contents)) {
                    result.skipped++;
                    result.warnings.push_back("skipped undecodable file: " + text_file->string());
                    continue;
                }
                Record r;
                r.schema = desc.base_schema;
                r.source_id = dir.filename().string();
                r.source_index = index++;
                r.values["listing"] = dir.filename().string();
                r.values["text_content"] = *contents;
                Value imgs = Value::array();
                for (const fs::path& img : images) {
                    auto data = read_file(img);
                    if (data) imgs.push_back(base64_encode(*data));
                }
                r.values["image_contents"] = imgs;
                result.records.push_back(std::move(r));
            }
            break;
        }
    }
    return result;
}

}  // namespace sempipe
