#include "shmm/errors.hpp"
#include "shmm/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <string_view>

namespace shmm {

void write_series_csv(const std::filesystem::path& path,
                      const SeriesData& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  std::vector<bool> imputed(series.size(), false);
  for (const std::size_t i : series.imputed) {
    if (i < imputed.size()) imputed[i] = true;
  }
  out << "# station=" << series.station << "\n";
  out << "index,day_of_year,value,imputed\n";
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), series.values[i]);
    out << i + 1 << ',' << series.day_of_year[i] << ','
        << std::string_view(buf.data(), static_cast<std::size_t>(r.ptr - buf.data()))
        << ',' << (imputed[i] ? 1 : 0) << '\n';
  }
  if (!out) throw InputError("failed writing " + path.string());
}

SeriesData read_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  SeriesData s;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string_view v(line);
      const auto pos = v.find("station=");
      if (pos != std::string_view::npos) s.station = std::string(v.substr(pos + 8));
      continue;
    }
    if (!header) {
      // The imputed column is optional so that plain simulated series load.
      if (line != "index,day_of_year,value,imputed" && line != "index,day_of_year,value") {
        throw InputError("unexpected series header '" + line + "'", lineno);
      }
      header = true;
      continue;
    }
    const char* p = line.data();
    const char* end = p + line.size();
    auto next = [&](auto& dst) {
      const auto r = std::from_chars(p, end, dst);
      if (r.ec != std::errc{}) throw InputError("malformed series row", lineno);
      p = r.ptr;
      if (p < end && *p == ',') ++p;
    };
    std::size_t index = 0;
    int doy = 0;
    double value = 0.0;
    next(index);
    next(doy);
    next(value);
    int imputed = 0;
    if (p < end) next(imputed);
    if (p != end) throw InputError("malformed series row", lineno);
    if (index != s.size() + 1) throw InputError("series index out of order", lineno);
    if (!(value >= 0.0)) throw InputError("negative or missing value", lineno);
    s.values.push_back(value);
    s.day_of_year.push_back(doy);
    if (imputed) s.imputed.push_back(index - 1);
  }
  if (!header || s.empty()) throw InputError("no data in " + path.string());
  return s;
}

}  // namespace shmm
