#include "sempipe/stats.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sempipe/fingerprint.hpp"

namespace sempipe {

std::optional<OperatorStats> StatsTable::get(const StatKey& key) const {
    auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

bool StatsTable::has_zero_quality(const std::string& op_id, const std::string& model_id) const {
    for (const auto& [key, stats] : table_) {
        if (key.op_id == op_id && key.model_id == model_id && stats.n_samples >= 1 &&
            stats.quality == 0.0)
            return true;
    }
    return false;
}

std::string StatsTable::fingerprint() const {
    Fnv1a h;
    for (const auto& [key, s] : table_) {
        std::ostringstream row;
        row << key.op_id << '\t' << to_string(key.strategy) << '\t' << key.model_id << '\t'
            << key.token_budget << '\t' << s.n_samples << '\t' << s.mean_latency_s << '\t'
            << s.mean_usd << '\t' << s.selectivity << '\t' << s.fanout << '\t' << s.quality;
        h.update(row.str());
    }
    return h.hex();
}

void StatsTable::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::trunc);
    out << "op_id\tstrategy\tmodel_id\ttoken_budget\tn_samples\tmean_latency_s\tmean_usd\t"
           "selectivity\tfanout\tquality\n";
    out.precision(17);
    for (const auto& [key, s] : table_) {
        out << key.op_id << '\t' << to_string(key.strategy) << '\t' << key.model_id << '\t'
            << key.token_budget << '\t' << s.n_samples << '\t' << s.mean_latency_s << '\t'
            << s.mean_usd << '\t' << s.selectivity << '\t' << s.fanout << '\t' << s.quality
            << '\n';
    }
}

StatsTable StatsTable::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read stats file: " + file.string());
    StatsTable table;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        StatKey key;
        OperatorStats s;
        std::string strategy;
        ss >> key.op_id >> strategy;
        // model_id may be empty; fields are tab separated, re-split properly
        std::vector<std::string> cols;
        std::istringstream ss2(line);
        std::string col;
        while (std::getline(ss2, col, '\t')) cols.push_back(col);
        if (cols.size() != 10) throw std::runtime_error("malformed stats row: " + line);
        key.op_id = cols[0];
        key.strategy = strategy_from_string(cols[1]);
        key.model_id = cols[2];
        key.token_budget = std::stod(cols[3]);
        s.n_samples = std::stoll(cols[4]);
        s.mean_latency_s = std::stod(cols[5]);
        s.mean_usd = std::stod(cols[6]);
        s.selectivity = std::stod(cols[7]);
        s.fanout = std::stod(cols[8]);
        s.quality = std::stod(cols[9]);
        table.set(key, s);
    }
    return table;
}

std::int64_t SampleConfig::sample_count(std::int64_t input_count) const {
    auto k = static_cast<std::int64_t>(std::ceil(fraction * static_cast<double>(input_count)));
    k = std::max(min_samples, k);
    if (max_samples > 0) k = std::min(k, max_samples);
    return std::min(k, input_count);
}

}  // namespace sempipe
