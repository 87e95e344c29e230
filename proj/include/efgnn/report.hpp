#pragma once

#include <string>
#include <utility>
#include <vector>

namespace efgnn {

/// One metric observation. `split` names the node subset (train/val/test/all,
/// clean/polluted, ...) and `coord` the sweep coordinate (hop index, threshold,
/// bin center, ...); either may be empty when the metric has no such axis.
struct ReportRow {
    std::string name;
    std::string split;
    std::string coord;
    double value = 0.0;
};

/// A self-describing result table for one experiment run. The config snapshot
/// is embedded so the table alone identifies what produced it.
struct ReportRecord {
    std::string experiment;
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> config_snapshot;
    std::vector<ReportRow> rows;

    void add(std::string name, std::string split, std::string coord, double value);

    /// Rejects infinite values and empty metric names. NaN is permitted: it is
    /// the explicit absent-value marker (e.g. accuracy over zero retained nodes).
    void validate() const;
};

/// Serializes the record as a TSV table preceded by `#` comment lines carrying
/// the schema version, experiment name, and config snapshot. Deterministic:
/// byte-identical for identical records, no timestamps.
std::string render_report_tsv(const ReportRecord& record);

void write_report_tsv(const ReportRecord& record, const std::string& path);

/// Writes a JSON manifest describing one run directory: schema version,
/// experiment, config hash + snapshot, and the files the run produced.
/// Timestamps are deliberately excluded; they belong in the sidecar log.
void write_manifest(const ReportRecord& record, const std::vector<std::string>& files,
                    const std::string& path);

}  // namespace efgnn
