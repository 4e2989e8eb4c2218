#include "shmm/stats.hpp"

#include "shmm/errors.hpp"
#include "shmm/parallel.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace shmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::array<int, 12> kMonthLengths{31, 28, 31, 30, 31, 30,
                                            31, 31, 30, 31, 30, 31};

void require_whole_years(const SeriesData& series, int T) {
  if (T < 1) throw std::invalid_argument("period must be positive");
  if (series.empty() || series.size() % static_cast<std::size_t>(T) != 0) {
    throw InputError("series length " + std::to_string(series.size()) +
                     " is not a whole number of " + std::to_string(T) +
                     "-day years");
  }
  if (series.day_of_year.front() != 1) {
    throw InputError("series does not start on day 1");
  }
}

std::vector<std::vector<double>> by_day(const SeriesData& series, int T) {
  std::vector<std::vector<double>> days(static_cast<std::size_t>(T));
  for (std::size_t i = 0; i < series.size(); ++i) {
    const int d = series.day_of_year[i];
    if (d < 1 || d > T) {
      throw ModelError("day_of_year " + std::to_string(d) + " outside 1.." +
                       std::to_string(T));
    }
    days[static_cast<std::size_t>(d - 1)].push_back(series.values[i]);
  }
  return days;
}

std::string format_double(double v) {
  if (is_missing(v)) return "NA";
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), static_cast<std::size_t>(r.ptr - buf.data())};
}

}  // namespace

bool is_missing(double v) { return std::isnan(v); }

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return kNaN;
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

int month_of_day(int day_of_year) {
  if (day_of_year < 1 || day_of_year > 365) {
    throw std::invalid_argument("day of year outside 1..365");
  }
  int d = day_of_year;
  for (int m = 0; m < 12; ++m) {
    if (d <= kMonthLengths[static_cast<std::size_t>(m)]) return m + 1;
    d -= kMonthLengths[static_cast<std::size_t>(m)];
  }
  return 12;
}

DailyMoments daily_moments(const SeriesData& series, int T) {
  if (series.size() < static_cast<std::size_t>(T)) {
    throw InputError("series shorter than one period");
  }
  const auto days = by_day(series, T);
  DailyMoments out;
  for (auto* v : {&out.mean, &out.sd, &out.skewness, &out.kurtosis,
                  &out.rain_frequency}) {
    v->setConstant(T, kNaN);
  }
  for (int d = 0; d < T; ++d) {
    const auto& x = days[static_cast<std::size_t>(d)];
    if (x.empty()) continue;
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    long long wet = 0;
    for (double v : x) {
      sum += v;
      if (v > 0.0) ++wet;
    }
    const double mean = sum / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
      const double c = v - mean;
      m2 += c * c;
      m3 += c * c * c;
      m4 += c * c * c * c;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    out.mean(d) = mean;
    out.sd(d) = std::sqrt(m2);
    out.rain_frequency(d) = static_cast<double>(wet) / n;
    if (m2 > 0.0) {
      out.skewness(d) = m3 / std::pow(m2, 1.5);
      out.kurtosis(d) = m4 / (m2 * m2);
    }
  }
  return out;
}

RowMatrix daily_quantiles(const SeriesData& series, int T,
                          std::span<const double> probs) {
  for (double p : probs) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("probabilities must lie in (0, 1)");
  }
  auto days = by_day(series, T);
  RowMatrix out(T, static_cast<Eigen::Index>(probs.size()));
  for (int d = 0; d < T; ++d) {
    auto& x = days[static_cast<std::size_t>(d)];
    std::sort(x.begin(), x.end());
    for (std::size_t j = 0; j < probs.size(); ++j) {
      out(d, static_cast<Eigen::Index>(j)) = quantile_sorted(x, probs[j]);
    }
  }
  return out;
}

SpellDistribution spells(std::span<const double> values) {
  SpellDistribution out;
  std::size_t i = 0;
  while (i < values.size()) {
    const bool wet = values[i] > 0.0;
    std::size_t j = i;
    while (j < values.size() && (values[j] > 0.0) == wet) ++j;
    ++(wet ? out.wet : out.dry)[static_cast<int>(j - i)];
    i = j;
  }
  return out;
}

Maxima maxima(const SeriesData& series, int T) {
  require_whole_years(series, T);
  const auto years = static_cast<Eigen::Index>(series.size()) / T;
  Maxima out;
  out.day_record = Eigen::VectorXd::Constant(T, -std::numeric_limits<double>::infinity());
  out.yearly_max = Eigen::VectorXd::Constant(years, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double v = series.values[i];
    const int d = series.day_of_year[i] - 1;
    const auto y = static_cast<Eigen::Index>(i) / T;
    out.day_record(d) = std::max(out.day_record(d), v);
    out.yearly_max(y) = std::max(out.yearly_max(y), v);
  }
  return out;
}

Interannual interannual(const SeriesData& series, int T) {
  require_whole_years(series, T);
  const auto years = static_cast<Eigen::Index>(series.size()) / T;
  Interannual out;
  out.yearly_total = Eigen::VectorXd::Zero(years);
  const bool calendar = T == 365;
  if (calendar) out.monthly_total = RowMatrix::Zero(years, 12);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto y = static_cast<Eigen::Index>(i) / T;
    out.yearly_total(y) += series.values[i];
    if (calendar) out.monthly_total(y, month_of_day(series.day_of_year[i]) - 1) += series.values[i];
  }
  auto sample_sd = [](const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() < 2) return kNaN;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
  };
  out.yearly_mean = out.yearly_total.mean();
  out.yearly_sd = sample_sd(out.yearly_total);
  if (calendar) {
    out.monthly_mean.resize(12);
    out.monthly_sd.resize(12);
    for (int m = 0; m < 12; ++m) {
      const Eigen::VectorXd col = out.monthly_total.col(m);
      out.monthly_mean(m) = col.mean();
      out.monthly_sd(m) = sample_sd(col);
    }
  }
  return out;
}

QQData qq_data(std::span<const double> observed,
               std::span<const double> simulated, int grid) {
  if (observed.empty() || simulated.empty()) throw InputError("qq_data needs nonempty inputs");
  if (grid < 1) throw std::invalid_argument("qq grid must be positive");
  std::vector<double> o(observed.begin(), observed.end());
  std::vector<double> s(simulated.begin(), simulated.end());
  std::sort(o.begin(), o.end());
  std::sort(s.begin(), s.end());
  QQData out;
  for (int i = 1; i <= grid; ++i) {
    const double p = static_cast<double>(i) / grid;
    out.probs.push_back(p);
    out.observed.push_back(quantile_sorted(o, p));
    out.simulated.push_back(quantile_sorted(s, p));
  }
  return out;
}

Bands prediction_bands(const Eigen::Ref<const RowMatrix>& ensemble) {
  const Eigen::Index members = ensemble.rows();
  const Eigen::Index coords = ensemble.cols();
  Bands b;
  b.members = static_cast<int>(members);
  b.below_minimum = members < 40;
  b.low.setConstant(coords, kNaN);
  b.mean.setConstant(coords, kNaN);
  b.high.setConstant(coords, kNaN);
  std::vector<double> col;
  col.reserve(static_cast<std::size_t>(members));
  for (Eigen::Index j = 0; j < coords; ++j) {
    col.clear();
    for (Eigen::Index i = 0; i < members; ++i) {
      const double v = ensemble(i, j);
      if (!is_missing(v)) col.push_back(v);
    }
    if (col.empty()) continue;
    // Shifted sum: identical members give mean == low == high exactly.
    const double x0 = col.front();
    double acc = 0.0;
    for (double v : col) acc += v - x0;
    b.mean(j) = x0 + acc / static_cast<double>(col.size());
    std::sort(col.begin(), col.end());
    b.low(j) = quantile_sorted(col, 0.025);
    b.high(j) = quantile_sorted(col, 0.975);
  }
  return b;
}

// --- validation report -------------------------------------------------------

namespace {

// Every statistic of one series, flattened in report order.
struct SeriesStats {
  std::vector<double> moments;    // 5 x T
  std::vector<double> quantiles;  // P x T
  std::vector<double> spells;     // 2 x max_spell frequencies
  std::vector<double> maxima;     // T records + years sorted maxima
  std::vector<double> interannual;
};

std::vector<double> spell_frequencies(const std::map<int, long long>& h,
                                      int max_spell) {
  std::vector<double> f(static_cast<std::size_t>(max_spell), 0.0);
  long long total = 0;
  for (const auto& [len, count] : h) {
    f[static_cast<std::size_t>(std::min(len, max_spell) - 1)] += static_cast<double>(count);
    total += count;
  }
  if (total > 0) {
    for (double& v : f) v /= static_cast<double>(total);
  }
  return f;
}

SeriesStats compute_stats(const SeriesData& s, int T,
                          const ValidationOptions& opt, bool whole_years) {
  SeriesStats out;
  const DailyMoments dm = daily_moments(s, T);
  for (const auto* v : {&dm.mean, &dm.sd, &dm.skewness, &dm.kurtosis,
                        &dm.rain_frequency}) {
    out.moments.insert(out.moments.end(), v->data(), v->data() + v->size());
  }
  const RowMatrix q = daily_quantiles(s, T, opt.probs);
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    for (Eigen::Index d = 0; d < q.rows(); ++d) out.quantiles.push_back(q(d, j));
  const SpellDistribution sp = spells(s.values);
  const auto dry = spell_frequencies(sp.dry, opt.max_spell);
  const auto wet = spell_frequencies(sp.wet, opt.max_spell);
  out.spells = dry;
  out.spells.insert(out.spells.end(), wet.begin(), wet.end());
  if (whole_years) {
    const Maxima mx = maxima(s, T);
    out.maxima.assign(mx.day_record.data(), mx.day_record.data() + T);
    std::vector<double> ym(mx.yearly_max.data(), mx.yearly_max.data() + mx.yearly_max.size());
    std::sort(ym.begin(), ym.end());
    out.maxima.insert(out.maxima.end(), ym.begin(), ym.end());
    const Interannual ia = interannual(s, T);
    out.interannual.push_back(ia.yearly_mean);
    out.interannual.push_back(ia.yearly_sd);
    std::vector<double> yt(ia.yearly_total.data(),
                           ia.yearly_total.data() + ia.yearly_total.size());
    std::sort(yt.begin(), yt.end());
    out.interannual.insert(out.interannual.end(), yt.begin(), yt.end());
    for (Eigen::Index m = 0; m < ia.monthly_mean.size(); ++m) {
      out.interannual.push_back(ia.monthly_mean(m));
      out.interannual.push_back(ia.monthly_sd(m));
    }
  }
  return out;
}

std::vector<ComparisonRow> compare(const std::string& table,
                                   std::vector<ComparisonRow> labels,
                                   const std::vector<double>& observed,
                                   const std::vector<std::vector<double>>& sims) {
  const auto coords = static_cast<Eigen::Index>(observed.size());
  RowMatrix ens(static_cast<Eigen::Index>(sims.size()), coords);
  for (std::size_t i = 0; i < sims.size(); ++i) {
    if (static_cast<Eigen::Index>(sims[i].size()) != coords) {
      throw ModelError("ensemble member " + std::to_string(i) +
                       " has a different calendar");
    }
    for (Eigen::Index j = 0; j < coords; ++j) ens(static_cast<Eigen::Index>(i), j) = sims[i][static_cast<std::size_t>(j)];
  }
  const Bands b = prediction_bands(ens);
  for (Eigen::Index j = 0; j < coords; ++j) {
    auto& row = labels[static_cast<std::size_t>(j)];
    row.table = table;
    row.observed = observed[static_cast<std::size_t>(j)];
    row.sim_mean = b.mean(j);
    row.band_low = b.low(j);
    row.band_high = b.high(j);
  }
  return labels;
}

void add_coverage(std::vector<CoverageLine>& out,
                  const std::vector<ComparisonRow>& rows) {
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CoverageLine& c) {
      return c.table == r.table && c.statistic == r.statistic;
    });
    if (it == out.end()) {
      out.push_back({r.table, r.statistic, 0, 0});
      it = out.end() - 1;
    }
    if (is_missing(r.observed) || is_missing(r.band_low)) continue;
    ++it->total;
    if (r.observed >= r.band_low && r.observed <= r.band_high) ++it->inside;
  }
}

std::string prob_label(double p) {
  return "q" + format_double(p);
}

}  // namespace

ValidationReport build_validation_report(const SeriesData& observed,
                                         const SimulationBatch& batch, int T,
                                         const ValidationOptions& opt) {
  if (batch.series.empty()) throw InputError("empty simulation batch");
  if (opt.max_spell < 1) throw std::invalid_argument("max_spell must be positive");
  for (std::size_t i = 0; i < batch.series.size(); ++i) {
    const auto& s = batch.series[i];
    if (s.size() != observed.size() || s.day_of_year != observed.day_of_year) {
      throw ModelError("ensemble member " + std::to_string(i) +
                       " does not match the observed calendar");
    }
  }
  const bool whole_years = !observed.empty() &&
                           observed.size() % static_cast<std::size_t>(T) == 0 &&
                           observed.day_of_year.front() == 1;

  const SeriesStats obs = compute_stats(observed, T, opt, whole_years);
  std::vector<SeriesStats> sims(batch.series.size());
  parallel_for(sims.size(), opt.jobs, [&](std::size_t i) {
    sims[i] = compute_stats(batch.series[i], T, opt, whole_years);
  });
  auto column = [&](std::vector<double> SeriesStats::*field) {
    std::vector<std::vector<double>> out;
    out.reserve(sims.size());
    for (auto& s : sims) out.push_back(std::move(s.*field));
    return out;
  };

  ValidationReport rep;
  rep.members = static_cast<int>(batch.series.size());
  rep.T = T;
  rep.below_minimum = rep.members < 40;

  {
    std::vector<ComparisonRow> labels;
    for (const char* name : {"mean", "sd", "skewness", "kurtosis", "rain_frequency"})
      for (int d = 1; d <= T; ++d) labels.push_back({"", name, d});
    rep.daily_moments = compare("daily_moments", labels, obs.moments, column(&SeriesStats::moments));
  }
  {
    std::vector<ComparisonRow> labels;
    for (double p : opt.probs)
      for (int d = 1; d <= T; ++d) labels.push_back({"", prob_label(p), d});
    rep.daily_quantiles = compare("daily_quantiles", labels, obs.quantiles, column(&SeriesStats::quantiles));
  }
  {
    std::vector<ComparisonRow> labels;
    for (const char* kind : {"dry", "wet"})
      for (int l = 1; l <= opt.max_spell; ++l) labels.push_back({"", kind, l});
    rep.spells = compare("spells", labels, obs.spells, column(&SeriesStats::spells));
  }
  if (whole_years) {
    const int years = static_cast<int>(observed.size()) / T;
    std::vector<ComparisonRow> labels;
    for (int d = 1; d <= T; ++d) labels.push_back({"", "day_record", d});
    for (int r = 1; r <= years; ++r) labels.push_back({"", "annual_max_sorted", r});
    rep.maxima = compare("maxima", labels, obs.maxima, column(&SeriesStats::maxima));

    labels.clear();
    labels.push_back({"", "yearly_mean", 0});
    labels.push_back({"", "yearly_sd", 0});
    for (int r = 1; r <= years; ++r) labels.push_back({"", "yearly_total_sorted", r});
    if (T == 365) {
      for (int m = 1; m <= 12; ++m) {
        labels.push_back({"", "monthly_mean", m});
        labels.push_back({"", "monthly_sd", m});
      }
    }
    rep.interannual = compare("interannual", labels, obs.interannual, column(&SeriesStats::interannual));
  }

  std::vector<double> pooled;
  pooled.reserve(batch.series.size() * observed.size());
  for (const auto& s : batch.series) pooled.insert(pooled.end(), s.values.begin(), s.values.end());
  rep.qq = qq_data(observed.values, pooled, opt.qq_grid);

  for (const auto* rows : {&rep.daily_moments, &rep.daily_quantiles, &rep.spells,
                           &rep.maxima, &rep.interannual}) {
    add_coverage(rep.coverage, *rows);
  }
  return rep;
}

void write_validation_report(const ValidationReport& report,
                             const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
  };
  struct TableSpec {
    const char* file;
    const char* coordinate;
    const std::vector<ComparisonRow>* rows;
  };
  const std::array<TableSpec, 5> tables{{
      {"daily_moments.csv", "day_of_year", &report.daily_moments},
      {"daily_quantiles.csv", "day_of_year", &report.daily_quantiles},
      {"spells.csv", "length", &report.spells},
      {"maxima.csv", "index", &report.maxima},
      {"interannual.csv", "index", &report.interannual},
  }};
  for (const auto& t : tables) {
    auto out = open(t.file);
    out << "statistic," << t.coordinate << ",observed,sim_mean,band_low,band_high\n";
    for (const auto& r : *t.rows) {
      out << r.statistic << ',' << r.coordinate << ',' << format_double(r.observed)
          << ',' << format_double(r.sim_mean) << ',' << format_double(r.band_low)
          << ',' << format_double(r.band_high) << '\n';
    }
  }
  {
    auto out = open("qq.csv");
    out << "prob,observed,simulated\n";
    for (std::size_t i = 0; i < report.qq.probs.size(); ++i) {
      out << format_double(report.qq.probs[i]) << ','
          << format_double(report.qq.observed[i]) << ','
          << format_double(report.qq.simulated[i]) << '\n';
    }
  }
  {
    auto out = open("summary.txt");
    out << "members " << report.members << "\n";
    out << "period " << report.T << "\n";
    if (report.below_minimum) {
      out << "warning: fewer than 40 members, bands are unreliable\n";
    }
    out << "coverage of observed statistics by 95% bands\n";
    for (const auto& c : report.coverage) {
      char pct[32];
      std::snprintf(pct, sizeof pct, "%.1f", 100.0 * c.fraction());
      out << c.table << ' ' << c.statistic << ' ' << c.inside << '/' << c.total
          << ' ' << pct << "%\n";
    }
  }
}

}  // namespace shmm
