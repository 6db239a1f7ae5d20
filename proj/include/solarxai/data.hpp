#pragma once

// Hourly PV / load / weather records: CSV ingestion, cleaning, one-hot and
// z-score encoding, train/test splitting and a synthetic site generator.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace solarxai::data {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kFirstHour = 7;
inline constexpr int kLastHour = 18;
inline constexpr int kHourCount = kLastHour - kFirstHour + 1;
inline constexpr double kDefaultCapacity = 2000.0;

enum class Task { classification, regression };

struct RawRecord {
    std::string timestamp;  // ISO-8601, hour resolution
    std::int64_t day = 0;   // days since 1970-01-01, derived from timestamp
    int index = 0;          // hour of day
    double stemp = 0.0;     // surface temperature forecast, degC
    double irra = 0.0;      // irradiance forecast, W/m^2
    double ptemp = 0.0;     // panel temperature in the previous hour, degC
    double hpow = 0.0;      // previous hour's PV, kWh
    double dpow = 0.0;      // PV at the same hour on the previous day, kWh
    double hload = 0.0;     // previous hour's load, kWh
    double target_pv = 0.0;
    double target_load = 0.0;

    int target_exceed() const noexcept { return target_pv > target_load ? 1 : 0; }
};

/// Float columns of a record in CSV order.
enum class Column { stemp, irra, ptemp, hpow, dpow, hload, target_pv, target_load };
inline constexpr int kColumnCount = 8;
const char* column_name(Column c) noexcept;
double& field(RawRecord& r, Column c) noexcept;
double field(const RawRecord& r, Column c) noexcept;

/// Parses "YYYY-MM-DDTHH[:MM[:SS]]" (a space may replace the T). Returns the
/// day number and the hour, or nothing when malformed.
std::optional<std::pair<std::int64_t, int>> parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t day, int hour);

struct Rejection {
    std::size_t line;  // 1-based, header is line 1
    std::string reason;
};

struct LoadResult {
    std::vector<RawRecord> records;
    std::vector<Rejection> rejected;
    std::size_t dropped_out_of_hours = 0;
};

inline constexpr const char* kCsvHeader =
    "timestamp,index,stemp,irra,ptemp,hpow,dpow,hload,target_pv,target_load";

/// Reads the site CSV. Columns are matched by header name in any order.
/// Throws DataError naming the first missing column.
LoadResult load_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, std::span<const RawRecord> records);

struct Outlier {
    std::size_t record;
    Column column;
    double value;
};

struct CleanResult {
    std::vector<RawRecord> records;
    std::vector<Outlier> outliers;
    std::size_t imputed = 0;  // outliers plus non-finite values replaced
};

/// Marks |z| > zmax per column as outliers and replaces them, together with
/// non-finite values, by linear interpolation in time between the nearest
/// valid neighbours. PV-like columns never interpolate across a day
/// boundary. Records must be time-sorted.
CleanResult clean_and_impute(std::span<const RawRecord> records, double zmax = 5.0);

struct FeatureStats {
    std::string name;
    double mean = 0.0;
    double std = 1.0;
};

/// A preprocessed design matrix. Rows are samples; columns are the twelve
/// hour indicators followed by the float features.
struct Dataset {
    Task task = Task::regression;
    Matrix features;
    Vector targets;
    std::vector<std::string> feature_names;
    std::vector<FeatureStats> normalization;

    // Reporting groups: the hour indicators collapse into one "Index" group.
    std::vector<std::string> group_names;
    std::vector<int> feature_group;  // column -> group
    Matrix group_raw;                // rows x groups, raw units (hour for Index)

    std::vector<std::string> timestamps;
    Vector predicted_load;  // previous hour's load, kWh
    Vector actual_load;     // load in the target hour, kWh
    Vector actual_pv;       // PV in the target hour, kWh

    Eigen::Index size() const noexcept { return features.rows(); }
    Eigen::Index width() const noexcept { return features.cols(); }
    bool empty() const noexcept { return features.rows() == 0; }

    Dataset subset(std::span<const std::size_t> rows) const;

    /// Wraps a bare matrix with one group per column.
    static Dataset from_matrix(Matrix x, Vector y, std::vector<std::string> names = {},
                               Task task = Task::regression);
};

std::vector<std::string> feature_names(Task task);
std::vector<std::string> group_names(Task task);

/// Statistics are computed over `stats_rows` (all rows when empty), so the
/// caller can restrict them to the training split.
Dataset encode_and_normalize(std::span<const RawRecord> records, Task task,
                             std::span<const std::size_t> stats_rows = {});

/// Applies stored statistics instead of computing them.
Dataset encode_with(std::span<const RawRecord> records, Task task,
                    std::span<const FeatureStats> stats);

/// Raw-unit vector for one record in model space (used for "all features
/// zero" style baselines).
Vector encode_row(const RawRecord& r, Task task, std::span<const FeatureStats> stats);

/// Hour recovered from the one-hot block of a row.
int decode_hour(const Dataset& ds, Eigen::Index row);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed);

/// Splits the records, then encodes both halves with training statistics.
std::pair<Dataset, Dataset> prepare(std::span<const RawRecord> records, Task task,
                                    double test_fraction, std::uint64_t seed);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);
void write_normalization_json(const std::filesystem::path& path, const Dataset& ds);

struct SynthConfig {
    int days = 885;
    double capacity = kDefaultCapacity;
    double cloud_prob = 0.1;
    double noise = 1.0;  // multiplies every measurement/forecast noise term
    std::uint64_t seed = 0;
    std::string start_date = "2017-11-01";
};

/// Twelve daylight records per day with clear-sky irradiance, random cloud
/// events (only partly visible to the irradiance forecast), a temperature
/// dependent panel efficiency and a double-peaked load profile.
std::vector<RawRecord> generate_synthetic(const SynthConfig& cfg);

/// Clear-sky irradiance (W/m^2) at the middle of `hour` on `day_of_year`.
double clear_sky_irradiance(int day_of_year, int hour);
/// Generator's PV model: output falls linearly with panel temperature.
double pv_output(double irradiance, double panel_temp, double capacity);

} // namespace solarxai::data
