#pragma once

#include "shmm/model.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace shmm {

struct RawRecord {
  std::chrono::year_month_day date;
  std::optional<double> value;  // mm; empty when missing
  int quality = 0;
  std::string station;
  std::size_t line = 0;
};

struct ParseOptions {
  // Quality code 1 (suspect) is kept unless this is set.
  bool suspect_as_missing = false;
};

// ECA&D daily precipitation text: a header block of lines not starting with
// a digit, then rows "STAID, SOUID, DATE(yyyymmdd), RR(0.1 mm), Q_RR".
// RR = -9999 or Q_RR = 9 marks a missing value. Throws InputError with the
// line number on malformed rows and on empty input.
std::vector<RawRecord> parse_records(std::istream& in,
                                     const ParseOptions& options = {});
std::vector<RawRecord> parse_file(const std::filesystem::path& path,
                                  const ParseOptions& options = {});

// Day of year on the 365-day calendar; February 29 has none.
std::optional<int> day_of_year_365(const std::chrono::year_month_day& date);

// A calendar-normalized series whose missing slots hold NaN.
struct SeriesSkeleton {
  SeriesData series;
  std::vector<std::size_t> missing;  // slot indices
  int first_year = 0;
  int years = 0;
  std::size_t dropped_feb29 = 0;
};

// Drops February 29, orders chronologically and lays out 365 slots for each
// calendar year from the first to the last record. Throws InputError on
// duplicate dates or on a year without any record between the two.
SeriesSkeleton normalize_calendar(const std::vector<RawRecord>& records);

// Fills each missing slot with a value drawn uniformly from the observed
// (non-imputed) values of the same day of year, in slot order from a single
// stream seeded with `seed`. Throws InputError naming a day of year with no
// observed value.
SeriesData impute_missing(const SeriesSkeleton& skeleton, std::uint64_t seed);

struct IngestReport {
  std::size_t records = 0;
  std::size_t dropped_feb29 = 0;
  std::size_t missing = 0;
  std::size_t imputed = 0;
  std::size_t points = 0;
  int first_year = 0;
  int years = 0;
};

// Normalized series CSV: "# station=<id>" then
// index,day_of_year,value,imputed (index 1-based, imputed 0/1).
void write_series_csv(const std::filesystem::path& path,
                      const SeriesData& series);
SeriesData read_series_csv(const std::filesystem::path& path);

}  // namespace shmm
