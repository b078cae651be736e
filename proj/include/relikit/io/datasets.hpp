#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "relikit/alt/alt.hpp"
#include "relikit/degradation/degradation.hpp"
#include "relikit/io/serialize.hpp"
#include "relikit/lifetime/lifetime.hpp"
#include "relikit/mtrp/mtrp.hpp"

namespace relikit::io {

inline constexpr int kSchemaVersion = 1;

enum class DatasetKind { LIFETIME, DEGRADATION, RECURRENT, ALT };

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& s);

/// Describes one dataset on disk. File paths are relative to the manifest.
///
/// lifetime:    units (unit_id, event_time, failed), userate (unit_id, week, use_rate)
/// degradation: measurements (unit_id, day, y), covariates (unit_id, day, uv, temp, rh)
/// recurrent:   events (unit_id, time, type), usage (unit_id, time, cumulative_usage)
/// alt:         data (q, cycles, failed)
struct DatasetManifest {
    DatasetKind kind = DatasetKind::LIFETIME;
    int schema_version = kSchemaVersion;
    std::map<std::string, std::string> files;
    std::optional<std::uint64_t> seed;
    std::string provenance;
    /// Kind-specific settings (baseline_rate, material config, generating truth).
    Json settings = Json::object();
    /// Directory the relative paths resolve against.
    std::string base_dir = ".";

    std::string path(const std::string& role) const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

struct TableReport {
    std::string file;
    std::size_t rows = 0;
    std::size_t columns = 0;
};

struct LifetimeDataset {
    std::vector<lifetime::LifetimeUnitRecord> units;
};

struct DegradationDataset {
    std::vector<degradation::DegradationUnitRecord> units;
};

struct RecurrentDataset {
    std::vector<mtrp::EventHistory> histories;
};

struct AltDataset {
    std::vector<alt::AltTestDatum> data;
    alt::MaterialTestConfig config;
};

using Dataset = std::variant<LifetimeDataset, DegradationDataset, RecurrentDataset, AltDataset>;

struct LoadedDataset {
    Dataset data;
    std::vector<TableReport> tables;
};

LoadedDataset load_dataset(const DatasetManifest& manifest);

LifetimeDataset load_lifetime(const std::string& units_csv, const std::string& userate_csv, double baseline_rate,
                              std::vector<TableReport>* report = nullptr);
/// `day` is the calendar day in both files. A unit enters service the day
/// before its first covariate record, so epoch = day - start_day.
DegradationDataset load_degradation(const std::string& measurements_csv, const std::string& covariates_csv,
                                    std::vector<TableReport>* report = nullptr);
/// A unit's observation window ends at its last usage record.
RecurrentDataset load_recurrent(const std::string& events_csv, const std::string& usage_csv,
                                std::vector<TableReport>* report = nullptr);
/// Accepts a `censored` column in place of `failed`.
AltDataset load_alt(const std::string& data_csv, std::vector<TableReport>* report = nullptr);

void save_lifetime(const LifetimeDataset& d, const std::string& units_csv, const std::string& userate_csv);
void save_degradation(const DegradationDataset& d, const std::string& measurements_csv,
                      const std::string& covariates_csv);
void save_recurrent(const RecurrentDataset& d, const std::string& events_csv, const std::string& usage_csv);
void save_alt(const AltDataset& d, const std::string& data_csv);

}  // namespace relikit::io
