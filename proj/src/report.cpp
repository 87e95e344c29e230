#include "efgnn/report.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "efgnn/text.hpp"

namespace efgnn {

void ReportRecord::add(std::string name, std::string split, std::string coord, double value) {
    rows.push_back({std::move(name), std::move(split), std::move(coord), value});
}

void ReportRecord::validate() const {
    if (experiment.empty()) throw std::invalid_argument("report: empty experiment name");
    if (config_hash.empty()) throw std::invalid_argument("report: empty config hash");
    for (const ReportRow& row : rows) {
        if (row.name.empty()) throw std::invalid_argument("report: row with empty metric name");
        if (std::isinf(row.value))
            throw std::invalid_argument("report: infinite value for metric " + row.name);
    }
}

std::string render_report_tsv(const ReportRecord& record) {
    record.validate();
    std::string out;
    out += "# efgnn-report v1\n";
    out += "# experiment: " + record.experiment + "\n";
    out += "# config_hash: " + record.config_hash + "\n";
    for (const auto& [key, value] : record.config_snapshot)
        out += "# config: " + key + "=" + value + "\n";
    out += "metric\tsplit\tcoord\tvalue\tconfig_hash\n";
    for (const ReportRow& row : record.rows) {
        out += row.name;
        out += '\t';
        out += row.split;
        out += '\t';
        out += row.coord;
        out += '\t';
        out += format_double(row.value);
        out += '\t';
        out += record.config_hash;
        out += '\n';
    }
    return out;
}

void write_report_tsv(const ReportRecord& record, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << render_report_tsv(record);
    if (!out) throw std::runtime_error("write failed for " + path);
}

void write_manifest(const ReportRecord& record, const std::vector<std::string>& files,
                    const std::string& path) {
    record.validate();
    nlohmann::ordered_json manifest;
    manifest["schema"] = "efgnn-run v1";
    manifest["experiment"] = record.experiment;
    manifest["config_hash"] = record.config_hash;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [key, value] : record.config_snapshot) config[key] = value;
    manifest["config"] = std::move(config);
    manifest["files"] = files;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace efgnn
