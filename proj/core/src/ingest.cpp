#include "shmm/ingest.hpp"

#include "shmm/errors.hpp"
#include "shmm/rng.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string_view>

namespace shmm {

namespace {

using namespace std::chrono;

constexpr std::array<int, 12> kCumulative{0,   31,  59,  90,  120, 151,
                                          181, 212, 243, 273, 304, 334};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_field(std::string_view s, std::size_t line, const char* name) {
  s = trim(s);
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw InputError("malformed " + std::string(name) + " field '" +
                     std::string(s) + "'", line);
  }
  return v;
}

}  // namespace

std::optional<int> day_of_year_365(const year_month_day& date) {
  if (!date.ok()) return std::nullopt;
  const auto m = static_cast<unsigned>(date.month());
  const auto d = static_cast<unsigned>(date.day());
  if (m == 2 && d == 29) return std::nullopt;
  return kCumulative[m - 1] + static_cast<int>(d);
}

std::vector<RawRecord> parse_records(std::istream& in,
                                     const ParseOptions& options) {
  std::vector<RawRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool in_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (!std::isdigit(static_cast<unsigned char>(view.front()))) {
      if (in_data) throw InputError("unexpected non-data line", lineno);
      continue;
    }
    in_data = true;
    std::array<std::string_view, 5> fields;
    std::size_t count = 0, start = 0;
    for (std::size_t i = 0; i <= view.size(); ++i) {
      if (i == view.size() || view[i] == ',') {
        if (count == fields.size()) throw InputError("too many fields", lineno);
        fields[count++] = view.substr(start, i - start);
        start = i + 1;
      }
    }
    if (count != fields.size()) {
      throw InputError("expected 5 fields, found " + std::to_string(count), lineno);
    }
    RawRecord rec;
    rec.line = lineno;
    rec.station = std::string(trim(fields[0]));
    parse_field<long long>(fields[1], lineno, "SOUID");
    const auto date = parse_field<long long>(fields[2], lineno, "DATE");
    const auto rr = parse_field<long long>(fields[3], lineno, "RR");
    rec.quality = parse_field<int>(fields[4], lineno, "Q_RR");
    rec.date = year_month_day{year{static_cast<int>(date / 10000)},
                              month{static_cast<unsigned>(date / 100 % 100)},
                              day{static_cast<unsigned>(date % 100)}};
    if (date < 0 || !rec.date.ok()) {
      throw InputError("invalid date " + std::to_string(date), lineno);
    }
    if (rec.quality != 0 && rec.quality != 1 && rec.quality != 9) {
      throw InputError("unknown quality code " + std::to_string(rec.quality), lineno);
    }
    const bool missing = rr == -9999 || rec.quality == 9 ||
                         (options.suspect_as_missing && rec.quality == 1);
    if (!missing) {
      if (rr < 0) throw InputError("negative precipitation " + std::to_string(rr), lineno);
      rec.value = static_cast<double>(rr) / 10.0;
    }
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw InputError("no data rows");
  return out;
}

std::vector<RawRecord> parse_file(const std::filesystem::path& path,
                                  const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse_records(in, options);
}

SeriesSkeleton normalize_calendar(const std::vector<RawRecord>& records) {
  if (records.empty()) throw InputError("no records to normalize");
  std::vector<const RawRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const RawRecord* a, const RawRecord* b) {
    return sys_days{a->date} < sys_days{b->date};
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->date == sorted[i - 1]->date) {
      throw InputError("duplicate date " +
                           std::to_string(static_cast<int>(sorted[i]->date.year())) + "-" +
                           std::to_string(static_cast<unsigned>(sorted[i]->date.month())) + "-" +
                           std::to_string(static_cast<unsigned>(sorted[i]->date.day())),
                       sorted[i]->line);
    }
  }

  const int y0 = static_cast<int>(sorted.front()->date.year());
  const int y1 = static_cast<int>(sorted.back()->date.year());
  std::vector<bool> seen(static_cast<std::size_t>(y1 - y0 + 1), false);
  for (const auto* r : sorted) seen[static_cast<std::size_t>(static_cast<int>(r->date.year()) - y0)] = true;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw InputError("no records for year " + std::to_string(y0 + static_cast<int>(i)) +
                       "; years must be contiguous");
    }
  }

  SeriesSkeleton sk;
  sk.first_year = y0;
  sk.years = y1 - y0 + 1;
  const auto n = static_cast<std::size_t>(sk.years) * 365;
  sk.series.values.assign(n, std::numeric_limits<double>::quiet_NaN());
  sk.series.day_of_year.resize(n);
  sk.series.station = sorted.front()->station;
  for (std::size_t i = 0; i < n; ++i) sk.series.day_of_year[i] = static_cast<int>(i % 365) + 1;

  std::vector<bool> filled(n, false);
  for (const auto* r : sorted) {
    const auto doy = day_of_year_365(r->date);
    if (!doy) {
      ++sk.dropped_feb29;
      continue;
    }
    const std::size_t slot =
        static_cast<std::size_t>(static_cast<int>(r->date.year()) - y0) * 365 +
        static_cast<std::size_t>(*doy - 1);
    filled[slot] = true;
    if (r->value) sk.series.values[slot] = *r->value;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!filled[i] || std::isnan(sk.series.values[i])) sk.missing.push_back(i);
  }
  return sk;
}

SeriesData impute_missing(const SeriesSkeleton& skeleton, std::uint64_t seed) {
  SeriesData out = skeleton.series;
  out.imputed.clear();
  std::map<int, std::vector<double>> donors;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isnan(out.values[i])) donors[out.day_of_year[i]].push_back(out.values[i]);
  }
  Rng rng(seed);
  for (const std::size_t slot : skeleton.missing) {
    const int doy = out.day_of_year[slot];
    const auto it = donors.find(doy);
    if (it == donors.end() || it->second.empty()) {
      throw InputError("day of year " + std::to_string(doy) +
                       " has no observed value to impute from");
    }
    out.values[slot] = it->second[rng.below(it->second.size())];
    out.imputed.push_back(slot);
  }
  return out;
}

}  // namespace shmm
