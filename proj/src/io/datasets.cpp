#include "relikit/io/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_map>

#include "relikit/io/csv.hpp"

namespace relikit::io {

namespace fs = std::filesystem;

namespace {

// Groups rows by unit id, keeping first-appearance order.
struct Grouped {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<const CsvRow*>> rows;
};

Grouped group_by_unit(const CsvTable& t, std::size_t id_col)
{
    Grouped g;
    for (const auto& row : t.rows) {
        const std::string& id = t.cell(row, id_col);
        if (id.empty()) throw DataError(t.source, row.line, id_col + 1, "empty unit_id");
        auto [it, inserted] = g.rows.try_emplace(id);
        if (inserted) g.order.push_back(id);
        it->second.push_back(&row);
    }
    return g;
}

void report(std::vector<TableReport>* out, const CsvTable& t)
{
    if (out) out->push_back({t.source, t.rows.size(), t.header.size()});
}

template <class F>
void validated(const std::string& file, std::size_t line, F&& check)
{
    try {
        check();
    } catch (const DataError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError(file, line, 0, e.what());
    }
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::string to_string(DatasetKind kind)
{
    switch (kind) {
    case DatasetKind::LIFETIME: return "lifetime";
    case DatasetKind::DEGRADATION: return "degradation";
    case DatasetKind::RECURRENT: return "recurrent";
    case DatasetKind::ALT: return "alt";
    }
    return "lifetime";
}

DatasetKind dataset_kind_from_string(const std::string& s)
{
    if (s == "lifetime") return DatasetKind::LIFETIME;
    if (s == "degradation") return DatasetKind::DEGRADATION;
    if (s == "recurrent") return DatasetKind::RECURRENT;
    if (s == "alt") return DatasetKind::ALT;
    throw std::invalid_argument("unknown dataset kind: " + s);
}

std::string DatasetManifest::path(const std::string& role) const
{
    const auto it = files.find(role);
    if (it == files.end()) throw std::invalid_argument("manifest has no '" + role + "' file");
    const fs::path p(it->second);
    return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).string();
}

DatasetManifest load_manifest(const std::string& path)
{
    const Json j = read_json_file(path);
    DatasetManifest m;
    try {
        m.kind = dataset_kind_from_string(j.at("kind").get<std::string>());
        m.schema_version = j.at("schema_version").get<int>();
        m.files = j.at("files").get<std::map<std::string, std::string>>();
        if (j.contains("seed") && !j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
        m.provenance = j.value("provenance", std::string());
        if (j.contains("settings")) m.settings = j.at("settings");
    } catch (const Json::exception& e) {
        throw DataError(path, 0, 0, std::string("malformed manifest: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(path, 0, 0, e.what());
    }
    if (m.schema_version != kSchemaVersion)
        throw DataError(path, 0, 0,
                        "schema version " + std::to_string(m.schema_version) + " is not supported (expected " +
                            std::to_string(kSchemaVersion) + ")");
    m.base_dir = fs::path(path).parent_path().string();
    if (m.base_dir.empty()) m.base_dir = ".";
    for (const auto& [role, file] : m.files) {
        if (!fs::exists(m.path(role))) throw DataError(path, 0, 0, "referenced file does not exist: " + m.path(role));
    }
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m)
{
    Json j{{"kind", to_string(m.kind)},
           {"schema_version", m.schema_version},
           {"files", m.files},
           {"seed", m.seed ? Json(*m.seed) : Json(nullptr)},
           {"provenance", m.provenance},
           {"settings", m.settings}};
    write_json_file(path, j);
}

// ---- lifetime

LifetimeDataset load_lifetime(const std::string& units_csv, const std::string& userate_csv, double baseline_rate,
                              std::vector<TableReport>* rep)
{
    const CsvTable units = read_csv(units_csv);
    const CsvTable rates = read_csv(userate_csv);
    report(rep, units);
    report(rep, rates);
    const std::size_t c_id = units.column("unit_id"), c_t = units.column("event_time"), c_f = units.column("failed");
    const std::size_t r_id = rates.column("unit_id"), r_w = rates.column("week"), r_u = rates.column("use_rate");

    const Grouped g = group_by_unit(rates, r_id);
    LifetimeDataset out;
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& row : units.rows) {
        lifetime::LifetimeUnitRecord u;
        u.unit_id = units.cell(row, c_id);
        if (u.unit_id.empty()) throw DataError(units.source, row.line, c_id + 1, "empty unit_id");
        if (!seen.emplace(u.unit_id, row.line).second)
            throw DataError(units.source, row.line, c_id + 1, "duplicate unit_id '" + u.unit_id + "'");
        u.event_time = units.number(row, c_t);
        if (!(u.event_time > 0.0)) throw DataError(units.source, row.line, c_t + 1, "event_time must be positive");
        u.failed = units.boolean(row, c_f);
        const auto it = g.rows.find(u.unit_id);
        if (it == g.rows.end()) throw DataError(rates.source, 0, 0, "no use-rate records for unit '" + u.unit_id + "'");
        std::vector<double> weeks, vals;
        for (const CsvRow* r : it->second) {
            const double w = rates.number(*r, r_w), v = rates.number(*r, r_u);
            if (!weeks.empty() && !(w > weeks.back()))
                throw DataError(rates.source, r->line, r_w + 1, "weeks must increase within a unit");
            if (!(v > 0.0)) throw DataError(rates.source, r->line, r_u + 1, "use_rate must be positive");
            weeks.push_back(w);
            vals.push_back(v);
        }
        validated(rates.source, it->second.front()->line, [&] {
            u.covariates = lifetime::UseRateSeries::from_rates(weeks, vals, baseline_rate);
        });
        validated(units.source, row.line, [&] { u.validate(); });
        out.units.push_back(std::move(u));
    }
    for (const auto& id : g.order)
        if (!seen.count(id))
            throw DataError(rates.source, g.rows.at(id).front()->line, r_id + 1, "unit '" + id + "' is not in the units file");
    return out;
}

void save_lifetime(const LifetimeDataset& d, const std::string& units_csv, const std::string& userate_csv)
{
    std::vector<std::vector<std::string>> urows, rrows;
    for (const auto& u : d.units) {
        urows.push_back({u.unit_id, format_double(u.event_time), u.failed ? "1" : "0"});
        const auto& c = u.covariates;
        for (std::size_t k = 0; k < c.times.size(); ++k) {
            const double rate = c.rates.size() == c.values.size() ? c.rates[k] : c.baseline_rate * std::exp(c.values[k]);
            rrows.push_back({u.unit_id, format_double(c.times[k]), format_double(rate)});
        }
    }
    write_csv_file(units_csv, {"unit_id", "event_time", "failed"}, urows);
    write_csv_file(userate_csv, {"unit_id", "week", "use_rate"}, rrows);
}

// ---- degradation

DegradationDataset load_degradation(const std::string& measurements_csv, const std::string& covariates_csv,
                                    std::vector<TableReport>* rep)
{
    const CsvTable meas = read_csv(measurements_csv);
    const CsvTable cov = read_csv(covariates_csv);
    report(rep, meas);
    report(rep, cov);
    const std::size_t m_id = meas.column("unit_id"), m_day = meas.column("day"), m_y = meas.column("y");
    const std::size_t c_id = cov.column("unit_id"), c_day = cov.column("day");
    const std::size_t c_x[3] = {cov.column("uv"), cov.column("temp"), cov.column("rh")};

    const Grouped gc = group_by_unit(cov, c_id);
    const Grouped gm = group_by_unit(meas, m_id);
    DegradationDataset out;
    for (const auto& id : gc.order) {
        degradation::DegradationUnitRecord u;
        u.unit_id = id;
        const auto& rows = gc.rows.at(id);
        const long first = cov.integer(*rows.front(), c_day);
        u.start_day = static_cast<int>(first - 1);
        for (const CsvRow* r : rows) {
            const long day = cov.integer(*r, c_day);
            const double epoch = static_cast<double>(day - u.start_day);
            if (!u.epochs.empty() && !(epoch > u.epochs.back()))
                throw DataError(cov.source, r->line, c_day + 1, "days must increase within a unit");
            u.epochs.push_back(epoch);
            u.covariates.push_back({cov.number(*r, c_x[0]), cov.number(*r, c_x[1]), cov.number(*r, c_x[2])});
        }
        const auto it = gm.rows.find(id);
        if (it == gm.rows.end()) throw DataError(meas.source, 0, 0, "no measurements for unit '" + id + "'");
        for (const CsvRow* r : it->second) {
            const double epoch = meas.number(*r, m_day) - u.start_day;
            if (!u.measurement_epochs.empty() && !(epoch > u.measurement_epochs.back()))
                throw DataError(meas.source, r->line, m_day + 1, "days must increase within a unit");
            u.measurement_epochs.push_back(epoch);
            u.measurements.push_back(meas.number(*r, m_y));
        }
        validated(meas.source, it->second.front()->line, [&] { u.validate(); });
        out.units.push_back(std::move(u));
    }
    for (const auto& id : gm.order)
        if (!gc.rows.count(id))
            throw DataError(meas.source, gm.rows.at(id).front()->line, m_id + 1, "unit '" + id + "' has no covariates");
    return out;
}

void save_degradation(const DegradationDataset& d, const std::string& measurements_csv,
                      const std::string& covariates_csv)
{
    std::vector<std::vector<std::string>> mrows, crows;
    for (const auto& u : d.units) {
        for (std::size_t k = 0; k < u.measurement_epochs.size(); ++k)
            mrows.push_back({u.unit_id, format_double(u.measurement_epochs[k] + u.start_day), format_double(u.measurements[k])});
        for (std::size_t k = 0; k < u.epochs.size(); ++k)
            crows.push_back({u.unit_id, format_double(u.epochs[k] + u.start_day), format_double(u.covariates[k][0]),
                             format_double(u.covariates[k][1]), format_double(u.covariates[k][2])});
    }
    write_csv_file(measurements_csv, {"unit_id", "day", "y"}, mrows);
    write_csv_file(covariates_csv, {"unit_id", "day", "uv", "temp", "rh"}, crows);
}

// ---- recurrent

RecurrentDataset load_recurrent(const std::string& events_csv, const std::string& usage_csv,
                                std::vector<TableReport>* rep)
{
    const CsvTable usage = read_csv(usage_csv);
    report(rep, usage);
    const std::size_t u_id = usage.column("unit_id"), u_t = usage.column("time"), u_x = usage.column("cumulative_usage");
    const Grouped gu = group_by_unit(usage, u_id);

    // An events file may legitimately hold only a header when no unit failed.
    CsvTable events;
    try {
        events = read_csv(events_csv);
    } catch (const DataError& e) {
        if (std::string(e.what()).find("no records") == std::string::npos) throw;
        events.source = events_csv;
        events.header = {"unit_id", "time", "type"};
    }
    report(rep, events);
    const std::size_t e_id = events.column("unit_id"), e_t = events.column("time"), e_ty = events.column("type");
    const Grouped ge = events.rows.empty() ? Grouped{} : group_by_unit(events, e_id);

    RecurrentDataset out;
    for (const auto& id : gu.order) {
        mtrp::EventHistory h;
        h.unit_id = id;
        for (const CsvRow* r : gu.rows.at(id)) {
            h.usage.times.push_back(usage.number(*r, u_t));
            h.usage.values.push_back(usage.number(*r, u_x));
        }
        h.tau = h.usage.times.back();
        const auto it = ge.rows.find(id);
        if (it != ge.rows.end()) {
            for (const CsvRow* r : it->second) {
                mtrp::Event e;
                e.time = events.number(*r, e_t);
                const std::string type = lower(events.cell(*r, e_ty));
                if (type == "component")
                    e.type = mtrp::EventType::COMPONENT;
                else if (type == "subsystem")
                    e.type = mtrp::EventType::SUBSYSTEM;
                else
                    throw DataError(events.source, r->line, e_ty + 1, "type must be component or subsystem");
                if (!h.events.empty() && !(e.time > h.events.back().time))
                    throw DataError(events.source, r->line, e_t + 1, "event times must increase within a unit");
                h.events.push_back(e);
            }
        }
        validated(usage.source, gu.rows.at(id).front()->line, [&] { h.validate(); });
        out.histories.push_back(std::move(h));
    }
    for (const auto& id : ge.order)
        if (!gu.rows.count(id))
            throw DataError(events.source, ge.rows.at(id).front()->line, e_id + 1, "unit '" + id + "' has no usage records");
    return out;
}

void save_recurrent(const RecurrentDataset& d, const std::string& events_csv, const std::string& usage_csv)
{
    std::vector<std::vector<std::string>> erows, urows;
    for (const auto& h : d.histories) {
        for (const auto& e : h.events)
            erows.push_back({h.unit_id, format_double(e.time), e.type == mtrp::EventType::COMPONENT ? "component" : "subsystem"});
        for (std::size_t k = 0; k < h.usage.times.size(); ++k)
            urows.push_back({h.unit_id, format_double(h.usage.times[k]), format_double(h.usage.values[k])});
    }
    write_csv_file(events_csv, {"unit_id", "time", "type"}, erows);
    write_csv_file(usage_csv, {"unit_id", "time", "cumulative_usage"}, urows);
}

// ---- alt

AltDataset load_alt(const std::string& data_csv, std::vector<TableReport>* rep)
{
    const CsvTable t = read_csv(data_csv);
    report(rep, t);
    const std::size_t c_q = t.column("q"), c_n = t.column("cycles");
    const bool has_failed = t.has_column("failed");
    const std::size_t c_d = has_failed ? t.column("failed") : t.column("censored");
    AltDataset out;
    for (const auto& row : t.rows) {
        alt::AltTestDatum d;
        d.q = t.number(row, c_q);
        d.cycles = t.number(row, c_n);
        const bool flag = t.boolean(row, c_d);
        d.censored = has_failed ? !flag : flag;
        validated(t.source, row.line, [&] { d.validate(); });
        out.data.push_back(d);
    }
    return out;
}

void save_alt(const AltDataset& d, const std::string& data_csv)
{
    std::vector<std::vector<std::string>> rows;
    for (const auto& x : d.data) rows.push_back({format_double(x.q), format_double(x.cycles), x.censored ? "0" : "1"});
    write_csv_file(data_csv, {"q", "cycles", "failed"}, rows);
}

LoadedDataset load_dataset(const DatasetManifest& m)
{
    LoadedDataset out;
    switch (m.kind) {
    case DatasetKind::LIFETIME:
        out.data = load_lifetime(m.path("units"), m.path("userate"), m.settings.value("baseline_rate", 1.0), &out.tables);
        break;
    case DatasetKind::DEGRADATION:
        out.data = load_degradation(m.path("measurements"), m.path("covariates"), &out.tables);
        break;
    case DatasetKind::RECURRENT:
        out.data = load_recurrent(m.path("events"), m.path("usage"), &out.tables);
        break;
    case DatasetKind::ALT: {
        AltDataset a = load_alt(m.path("data"), &out.tables);
        if (m.settings.contains("config")) a.config = from_json<alt::MaterialTestConfig>(m.settings.at("config"));
        out.data = std::move(a);
        break;
    }
    }
    return out;
}

}  // namespace relikit::io
