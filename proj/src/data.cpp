#include "solarxai/data.hpp"

#include "solarxai/errors.hpp"
#include "solarxai/io.hpp"
#include "solarxai/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace solarxai::data {

namespace {

constexpr std::array<Column, kColumnCount> kAllColumns = {
    Column::stemp, Column::irra,  Column::ptemp,     Column::hpow,
    Column::dpow,  Column::hload, Column::target_pv, Column::target_load};

// Columns that are zero overnight; imputation stays inside one day.
bool is_daylight_column(Column c) {
    return c == Column::irra || c == Column::hpow || c == Column::dpow || c == Column::target_pv;
}

std::vector<Column> float_features(Task task) {
    std::vector<Column> cols = {Column::stemp, Column::irra, Column::ptemp, Column::hpow,
                                Column::dpow};
    if (task == Task::classification) {
        cols.push_back(Column::hload);
    }
    return cols;
}

const char* display_name(Column c) {
    switch (c) {
    case Column::stemp: return "STemp";
    case Column::irra: return "Irra";
    case Column::ptemp: return "PTemp";
    case Column::hpow: return "HPow";
    case Column::dpow: return "DPow";
    case Column::hload: return "HLoad";
    case Column::target_pv: return "target_pv";
    case Column::target_load: return "target_load";
    }
    return "";
}

int day_of_year(std::int64_t day) {
    using namespace std::chrono;
    const sys_days d{days{day}};
    const year_month_day ymd{d};
    const sys_days jan1{ymd.year() / January / 1};
    return static_cast<int>((d - jan1).count()) + 1;
}

} // namespace

const char* column_name(Column c) noexcept {
    switch (c) {
    case Column::stemp: return "stemp";
    case Column::irra: return "irra";
    case Column::ptemp: return "ptemp";
    case Column::hpow: return "hpow";
    case Column::dpow: return "dpow";
    case Column::hload: return "hload";
    case Column::target_pv: return "target_pv";
    case Column::target_load: return "target_load";
    }
    return "";
}

double& field(RawRecord& r, Column c) noexcept {
    switch (c) {
    case Column::stemp: return r.stemp;
    case Column::irra: return r.irra;
    case Column::ptemp: return r.ptemp;
    case Column::hpow: return r.hpow;
    case Column::dpow: return r.dpow;
    case Column::hload: return r.hload;
    case Column::target_pv: return r.target_pv;
    case Column::target_load: return r.target_load;
    }
    return r.stemp;
}

double field(const RawRecord& r, Column c) noexcept {
    return field(const_cast<RawRecord&>(r), c);
}

std::optional<std::pair<std::int64_t, int>> parse_timestamp(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    int consumed = 0;
    const int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d%n", &y, &mo, &d, &sep, &h, &consumed);
    if (n < 5 || (sep != 'T' && sep != ' ')) {
        return std::nullopt;
    }
    std::string_view rest(text.c_str() + consumed);
    if (!rest.empty()) {
        int extra = 0;
        if (std::sscanf(rest.data(), ":%2d%n", &mi, &extra) != 1) {
            return std::nullopt;
        }
        rest.remove_prefix(static_cast<std::size_t>(extra));
        if (!rest.empty()) {
            if (std::sscanf(rest.data(), ":%2d%n", &s, &extra) != 1) {
                return std::nullopt;
            }
            rest.remove_prefix(static_cast<std::size_t>(extra));
        }
        if (!rest.empty() && rest != "Z") {
            return std::nullopt;
        }
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) {
        return std::nullopt;
    }
    return std::make_pair(static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()), h);
}

std::string format_timestamp(std::int64_t day, int hour) {
    using namespace std::chrono;
    const year_month_day ymd{sys_days{days{day}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour);
    return buf;
}

LoadResult load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path.string() + ": missing header row");
    }
    const auto header = io::split_csv_line(line);
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name = header[i];
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        pos[name] = i;
    }
    auto require = [&](const std::string& name) {
        const auto it = pos.find(name);
        if (it == pos.end()) {
            throw DataError(path.string() + ": missing required column '" + name + "'");
        }
        return it->second;
    };
    const std::size_t ts_col = require("timestamp");
    const std::size_t index_col = require("index");
    std::array<std::size_t, kColumnCount> col_pos{};
    for (Column c : kAllColumns) {
        col_pos[static_cast<std::size_t>(c)] = require(column_name(c));
    }

    LoadResult result;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = io::split_csv_line(line);
        if (fields.size() != header.size()) {
            result.rejected.push_back({line_no, "expected " + std::to_string(header.size()) +
                                                    " fields, found " +
                                                    std::to_string(fields.size())});
            continue;
        }
        RawRecord r;
        r.timestamp = fields[ts_col];
        const auto ts = parse_timestamp(r.timestamp);
        if (!ts) {
            result.rejected.push_back({line_no, "timestamp: malformed '" + r.timestamp + "'"});
            continue;
        }
        r.day = ts->first;
        const auto index = io::parse_int(fields[index_col]);
        if (!index || *index < 0 || *index > 23) {
            result.rejected.push_back({line_no, "index: not an hour '" + fields[index_col] + "'"});
            continue;
        }
        r.index = static_cast<int>(*index);
        bool ok = true;
        for (Column c : kAllColumns) {
            const auto& text = fields[col_pos[static_cast<std::size_t>(c)]];
            const auto v = io::parse_double(text);
            if (!v) {
                result.rejected.push_back(
                    {line_no, std::string(column_name(c)) + ": not a finite number '" + text + "'"});
                ok = false;
                break;
            }
            field(r, c) = *v;
        }
        if (!ok) {
            continue;
        }
        if (r.index < kFirstHour || r.index > kLastHour) {
            ++result.dropped_out_of_hours;
            continue;
        }
        result.records.push_back(std::move(r));
    }
    return result;
}

void write_csv(const std::filesystem::path& path, std::span<const RawRecord> records) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const RawRecord& r : records) {
        out += r.timestamp;
        out += ',';
        out += std::to_string(r.index);
        for (Column c : kAllColumns) {
            out += ',';
            out += io::format_double(field(r, c));
        }
        out += '\n';
    }
    io::write_text(path, out);
}

CleanResult clean_and_impute(std::span<const RawRecord> records, double zmax) {
    CleanResult result;
    result.records.assign(records.begin(), records.end());
    auto& recs = result.records;
    const std::size_t n = recs.size();
    auto time_of = [&](std::size_t i) {
        return static_cast<double>(recs[i].day * 24 + recs[i].index);
    };
    for (std::size_t i = 1; i < n; ++i) {
        if (time_of(i) < time_of(i - 1)) {
            throw DataError("records are not time-sorted (record " + std::to_string(i) + ")");
        }
    }
    if (n == 0) {
        return result;
    }

    for (Column c : kAllColumns) {
        std::vector<char> valid(n, 0);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = field(recs[i], c);
            if (std::isfinite(v)) {
                valid[i] = 1;
                sum += v;
                ++count;
            }
        }
        if (count == 0) {
            throw DataError(std::string("column '") + column_name(c) + "' has no valid values");
        }
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (valid[i]) {
                const double d = field(recs[i], c) - mean;
                ss += d * d;
            }
        }
        const double sd = std::sqrt(ss / static_cast<double>(count));
        if (sd > 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (valid[i] && std::abs(field(recs[i], c) - mean) / sd > zmax) {
                    result.outliers.push_back({i, c, field(recs[i], c)});
                    valid[i] = 0;
                }
            }
        }

        // Interpolate each run of invalid values from the valid neighbours
        // inside [lo, hi).
        auto fill_range = [&](std::size_t lo, std::size_t hi) {
            std::optional<std::size_t> prev;
            std::size_t i = lo;
            bool any = false;
            for (std::size_t k = lo; k < hi; ++k) {
                any = any || valid[k];
            }
            if (!any) {
                return false;
            }
            while (i < hi) {
                if (valid[i]) {
                    prev = i;
                    ++i;
                    continue;
                }
                std::size_t j = i;
                while (j < hi && !valid[j]) {
                    ++j;
                }
                for (std::size_t k = i; k < j; ++k) {
                    double v;
                    if (prev && j < hi) {
                        const double t0 = time_of(*prev), t1 = time_of(j);
                        const double w = (time_of(k) - t0) / (t1 - t0);
                        v = field(recs[*prev], c) + w * (field(recs[j], c) - field(recs[*prev], c));
                    } else if (prev) {
                        v = field(recs[*prev], c);
                    } else {
                        v = field(recs[j], c);
                    }
                    field(recs[k], c) = v;
                    ++result.imputed;
                }
                for (std::size_t k = i; k < j; ++k) {
                    valid[k] = 1;
                }
                i = j;
            }
            return true;
        };

        if (is_daylight_column(c)) {
            std::size_t start = 0;
            bool all_days_filled = true;
            for (std::size_t i = 1; i <= n; ++i) {
                if (i == n || recs[i].day != recs[start].day) {
                    all_days_filled = fill_range(start, i) && all_days_filled;
                    start = i;
                }
            }
            if (!all_days_filled) {
                // A day with no valid value at all: fall back to the whole series.
                fill_range(0, n);
            }
        } else {
            fill_range(0, n);
        }
    }
    return result;
}

std::vector<std::string> feature_names(Task task) {
    std::vector<std::string> names;
    for (int h = kFirstHour; h <= kLastHour; ++h) {
        names.push_back("Index_" + std::to_string(h));
    }
    for (Column c : float_features(task)) {
        names.emplace_back(display_name(c));
    }
    return names;
}

std::vector<std::string> group_names(Task task) {
    std::vector<std::string> names = {"Index"};
    for (Column c : float_features(task)) {
        names.emplace_back(display_name(c));
    }
    return names;
}

Vector encode_row(const RawRecord& r, Task task, std::span<const FeatureStats> stats) {
    const auto cols = float_features(task);
    if (stats.size() != cols.size()) {
        throw std::invalid_argument("normalization record does not match the task");
    }
    Vector x = Vector::Zero(kHourCount + static_cast<Eigen::Index>(cols.size()));
    if (r.index >= kFirstHour && r.index <= kLastHour) {
        x(r.index - kFirstHour) = 1.0;
    }
    for (std::size_t j = 0; j < cols.size(); ++j) {
        x(kHourCount + static_cast<Eigen::Index>(j)) =
            (field(r, cols[j]) - stats[j].mean) / stats[j].std;
    }
    return x;
}

Dataset encode_with(std::span<const RawRecord> records, Task task,
                    std::span<const FeatureStats> stats) {
    const auto cols = float_features(task);
    const auto n = static_cast<Eigen::Index>(records.size());
    Dataset ds;
    ds.task = task;
    ds.feature_names = feature_names(task);
    ds.group_names = group_names(task);
    ds.normalization.assign(stats.begin(), stats.end());
    const auto width = static_cast<Eigen::Index>(ds.feature_names.size());
    ds.features.setZero(n, width);
    ds.targets.resize(n);
    ds.group_raw.resize(n, static_cast<Eigen::Index>(ds.group_names.size()));
    ds.predicted_load.resize(n);
    ds.actual_load.resize(n);
    ds.actual_pv.resize(n);
    ds.feature_group.resize(static_cast<std::size_t>(width));
    for (Eigen::Index j = 0; j < width; ++j) {
        ds.feature_group[static_cast<std::size_t>(j)] =
            j < kHourCount ? 0 : static_cast<int>(j - kHourCount + 1);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const RawRecord& r = records[static_cast<std::size_t>(i)];
        if (r.index < kFirstHour || r.index > kLastHour) {
            throw DataError("record " + r.timestamp + " has hour outside " +
                            std::to_string(kFirstHour) + "-" + std::to_string(kLastHour));
        }
        ds.features.row(i) = encode_row(r, task, stats).transpose();
        ds.targets(i) = task == Task::classification ? r.target_exceed() : r.target_pv;
        ds.group_raw(i, 0) = r.index;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            ds.group_raw(i, static_cast<Eigen::Index>(j) + 1) = field(r, cols[j]);
        }
        ds.timestamps.push_back(r.timestamp);
        ds.predicted_load(i) = r.hload;
        ds.actual_load(i) = r.target_load;
        ds.actual_pv(i) = r.target_pv;
    }
    return ds;
}

Dataset encode_and_normalize(std::span<const RawRecord> records, Task task,
                             std::span<const std::size_t> stats_rows) {
    if (records.empty()) {
        throw DataError("cannot encode an empty record set");
    }
    std::vector<std::size_t> rows(stats_rows.begin(), stats_rows.end());
    if (rows.empty()) {
        rows.resize(records.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            rows[i] = i;
        }
    }
    std::vector<FeatureStats> stats;
    for (Column c : float_features(task)) {
        double sum = 0.0;
        for (std::size_t i : rows) {
            sum += field(records[i], c);
        }
        const double mean = sum / static_cast<double>(rows.size());
        double ss = 0.0;
        for (std::size_t i : rows) {
            const double d = field(records[i], c) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(rows.size()));
        if (!(sd > 0.0)) {
            throw DataError(std::string("feature '") + display_name(c) +
                            "' has zero variance and cannot be normalized");
        }
        stats.push_back({display_name(c), mean, sd});
    }
    return encode_with(records, task, stats);
}

int decode_hour(const Dataset& ds, Eigen::Index row) {
    int hour = -1;
    for (int k = 0; k < kHourCount; ++k) {
        if (ds.features(row, k) == 1.0) {
            if (hour != -1) {
                return -1;
            }
            hour = kFirstHour + k;
        }
    }
    return hour;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.task = task;
    out.feature_names = feature_names;
    out.normalization = normalization;
    out.group_names = group_names;
    out.feature_group = feature_group;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.features.resize(m, features.cols());
    out.targets.resize(m);
    out.group_raw.resize(m, group_raw.cols());
    const bool has_loads = predicted_load.size() == size();
    if (has_loads) {
        out.predicted_load.resize(m);
        out.actual_load.resize(m);
        out.actual_pv.resize(m);
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]);
        if (i < 0 || i >= size()) {
            throw std::out_of_range("subset row out of range");
        }
        out.features.row(k) = features.row(i);
        out.targets(k) = targets(i);
        out.group_raw.row(k) = group_raw.row(i);
        if (has_loads) {
            out.predicted_load(k) = predicted_load(i);
            out.actual_load(k) = actual_load(i);
            out.actual_pv(k) = actual_pv(i);
        }
        if (!timestamps.empty()) {
            out.timestamps.push_back(timestamps[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

Dataset Dataset::from_matrix(Matrix x, Vector y, std::vector<std::string> names, Task task) {
    if (x.rows() != y.size()) {
        throw std::invalid_argument("feature and target row counts differ");
    }
    Dataset ds;
    ds.task = task;
    if (names.empty()) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            names.push_back("x" + std::to_string(j));
        }
    }
    if (static_cast<Eigen::Index>(names.size()) != x.cols()) {
        throw std::invalid_argument("feature name count does not match width");
    }
    ds.feature_names = names;
    ds.group_names = std::move(names);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        ds.feature_group.push_back(static_cast<int>(j));
    }
    ds.group_raw = x;
    ds.features = std::move(x);
    ds.targets = std::move(y);
    return ds;
}

SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) {
        perm[i] = i;
    }
    CounterRng rng(seed);
    shuffle(perm.begin(), perm.end(), rng);
    const auto n_test =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    SplitIndices out;
    out.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    std::sort(out.test.begin(), out.test.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    const auto idx = split_indices(static_cast<std::size_t>(ds.size()), test_fraction, seed);
    return {ds.subset(idx.train), ds.subset(idx.test)};
}

std::pair<Dataset, Dataset> prepare(std::span<const RawRecord> records, Task task,
                                    double test_fraction, std::uint64_t seed) {
    const auto idx = split_indices(records.size(), test_fraction, seed);
    const Dataset all = encode_and_normalize(records, task, idx.train);
    return {all.subset(idx.train), all.subset(idx.test)};
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
    std::string out;
    if (!ds.timestamps.empty()) {
        out += "timestamp,";
    }
    for (const auto& name : ds.feature_names) {
        out += name;
        out += ',';
    }
    out += "target\n";
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        if (!ds.timestamps.empty()) {
            out += ds.timestamps[static_cast<std::size_t>(i)];
            out += ',';
        }
        for (Eigen::Index j = 0; j < ds.width(); ++j) {
            out += io::format_double(ds.features(i, j));
            out += ',';
        }
        out += io::format_double(ds.targets(i));
        out += '\n';
    }
    io::write_text(path, out);
}

void write_normalization_json(const std::filesystem::path& path, const Dataset& ds) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& s : ds.normalization) {
        j[s.name] = {{"mean", s.mean}, {"std", s.std}};
    }
    io::write_text(path, j.dump(2) + "\n");
}

double clear_sky_irradiance(int day_of_year, int hour) {
    // Seasonal amplitude peaks at the June solstice; daylight half-width
    // grows from 4.5 h in winter to 8 h in summer.
    const double season =
        0.65 + 0.35 * std::cos(2.0 * std::numbers::pi * (day_of_year - 172) / 365.0);
    const double half_day = 4.5 + 3.5 * (season - 0.3) / 0.7;
    const double offset = (hour + 0.5 - 12.5) / half_day;
    if (std::abs(offset) >= 1.0) {
        return 0.0;
    }
    return 1000.0 * season * std::cos(0.5 * std::numbers::pi * offset);
}

double pv_output(double irradiance, double panel_temp, double capacity) {
    const double efficiency = 1.0 - 0.004 * (panel_temp - 25.0);
    return std::clamp(capacity * 0.85 * (irradiance / 1000.0) * efficiency, 0.0, capacity);
}

std::vector<RawRecord> generate_synthetic(const SynthConfig& cfg) {
    if (cfg.days < 1) {
        throw std::invalid_argument("days must be at least 1");
    }
    if (!(cfg.capacity > 0.0)) {
        throw std::invalid_argument("capacity must be positive");
    }
    if (!(cfg.cloud_prob >= 0.0 && cfg.cloud_prob <= 1.0)) {
        throw std::invalid_argument("cloud probability must lie in [0, 1]");
    }
    const auto start = parse_timestamp(cfg.start_date + "T00");
    if (!start) {
        throw std::invalid_argument("malformed start date '" + cfg.start_date + "'");
    }

    struct Hour {
        double stemp_forecast, irra_forecast, panel_temp_measured, pv, load;
    };
    std::vector<RawRecord> out;
    out.reserve(static_cast<std::size_t>(cfg.days) * kHourCount);
    std::array<Hour, 24> prev_day{};
    Hour prev_hour{};

    // Day -1 is a warm-up day so that DPow and the first HPow/HLoad exist.
    for (int d = -1; d < cfg.days; ++d) {
        const std::int64_t day = start->first + d;
        const int doy = day_of_year(day);
        CounterRng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(d + 1)));
        const double mean_temp = 11.0 + 8.0 * std::cos(2.0 * std::numbers::pi * (doy - 200) / 365.0);
        const double anomaly = rng.normal(0.0, 2.5);
        const double heating = 90.0 * std::cos(2.0 * std::numbers::pi * (doy - 15) / 365.0);

        // Hazy days dim every hour. The irradiance forecast misses the haze and
        // part of the cloud events in proportion to the noise level, so only
        // the measured PV reveals them.
        const double blind = std::min(1.0, cfg.noise);
        const double u_haze = rng.uniform();
        const double haze_depth = rng.uniform(0.45, 0.85);
        const double haze = u_haze < std::min(1.0, 2.0 * cfg.cloud_prob) ? haze_depth : 1.0;
        const double forecast_haze = haze + blind * (1.0 - haze);

        std::array<Hour, 24> today{};
        bool cloudy = false;
        for (int h = 0; h < 24; ++h) {
            const double clear = clear_sky_irradiance(doy, h);
            // Cloud events persist from one hour to the next.
            const double u_cloud = rng.uniform();
            const double depth = rng.uniform(0.2, 0.6);
            const double u_seen = rng.uniform();
            const double p_cloud = cloudy ? std::max(cfg.cloud_prob, 0.6 * std::sqrt(cfg.cloud_prob))
                                          : cfg.cloud_prob;
            cloudy = clear > 0.0 && u_cloud < p_cloud;
            double cloud = 1.0, forecast_cloud = 1.0;
            if (cloudy) {
                cloud = depth;
                forecast_cloud = u_seen < 1.0 - 0.5 * blind ? depth : 1.0;
            }
            const double irradiance = clear * haze * cloud;
            const double irra_forecast =
                clear > 0.0 ? std::max(0.0, clear * forecast_haze * forecast_cloud +
                                                cfg.noise * 15.0 * rng.normal())
                            : 0.0;
            const double air = mean_temp + anomaly +
                               4.0 * std::cos(2.0 * std::numbers::pi * (h - 15) / 24.0);
            const double stemp_forecast = air + cfg.noise * 0.5 * rng.normal();
            const double panel_temp = air + 0.02 * irradiance;
            const double panel_measured = panel_temp + cfg.noise * 1.5 * rng.normal();
            const double clean_pv = pv_output(irradiance, panel_temp, cfg.capacity);
            double pv = 0.0;
            if (clear > 0.0) {
                pv = std::clamp(clean_pv + cfg.noise * (10.0 + 0.03 * clean_pv) * rng.normal(), 0.0,
                                cfg.capacity);
            } else {
                rng.normal();
            }
            const double load =
                std::max(0.0, 550.0 + heating + 250.0 * std::exp(-(h - 8.0) * (h - 8.0) / 4.0) +
                                  300.0 * std::exp(-(h - 19.0) * (h - 19.0) / 5.0) +
                                  cfg.noise * 35.0 * rng.normal());
            today[static_cast<std::size_t>(h)] = {stemp_forecast, irra_forecast, panel_measured, pv,
                                                  load};
        }

        if (d >= 0) {
            for (int h = kFirstHour; h <= kLastHour; ++h) {
                const Hour& now = today[static_cast<std::size_t>(h)];
                const Hour& before = h > 0 ? today[static_cast<std::size_t>(h - 1)] : prev_hour;
                RawRecord r;
                r.day = day;
                r.index = h;
                r.timestamp = format_timestamp(day, h);
                r.stemp = now.stemp_forecast;
                r.irra = now.irra_forecast;
                r.ptemp = before.panel_temp_measured;
                r.hpow = before.pv;
                r.dpow = prev_day[static_cast<std::size_t>(h)].pv;
                r.hload = before.load;
                r.target_pv = now.pv;
                r.target_load = now.load;
                out.push_back(std::move(r));
            }
        }
        prev_day = today;
        prev_hour = today[23];
    }
    return out;
}

} // namespace solarxai::data
