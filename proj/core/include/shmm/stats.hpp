#pragma once

#include "shmm/model.hpp"
#include "shmm/simulate.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace shmm {

// Missing statistics (e.g. skewness of a constant sample) are quiet NaNs.
bool is_missing(double v);

// Linear interpolation between order statistics: with sorted x_1..x_n,
// h = (n - 1) p, Q(p) = x_⌊h⌋ + (h - ⌊h⌋)(x_⌊h⌋+1 - x_⌊h⌋) (0-based).
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);

// Calendar months on the 365-day year (February has 28 days).
int month_of_day(int day_of_year);  // 1..12

struct DailyMoments {
  Eigen::VectorXd mean, sd, skewness, kurtosis, rain_frequency;  // length T
};

// Per day of year over all years: population mean and standard deviation,
// m3 / m2^1.5 and m4 / m2^2 (missing when m2 = 0), and the fraction of
// values > 0. A day with no observation is missing throughout.
DailyMoments daily_moments(const SeriesData& series, int T);

// T x probs.size() table of per-day quantiles.
RowMatrix daily_quantiles(const SeriesData& series, int T,
                          std::span<const double> probs);

struct SpellDistribution {
  std::map<int, long long> dry;  // length -> count
  std::map<int, long long> wet;
};

// Maximal runs of zero and of positive values; runs cut by either end of the
// series count as spells.
SpellDistribution spells(std::span<const double> values);

struct Maxima {
  Eigen::VectorXd day_record;  // length T
  Eigen::VectorXd yearly_max;  // one per year
};

// Requires a whole number of years (length multiple of T).
Maxima maxima(const SeriesData& series, int T);

struct Interannual {
  Eigen::VectorXd yearly_total;
  RowMatrix monthly_total;  // years x 12; empty unless T = 365
  double yearly_mean = 0.0;
  double yearly_sd = 0.0;          // sample sd, n - 1
  Eigen::VectorXd monthly_mean;    // 12
  Eigen::VectorXd monthly_sd;      // 12
};

Interannual interannual(const SeriesData& series, int T);

struct QQData {
  std::vector<double> probs;  // i / G, i = 1..G
  std::vector<double> observed;
  std::vector<double> simulated;
};

// Quantiles of the pooled observed and pooled simulated values on the grid
// p_i = i / G; the last point compares the two maxima.
QQData qq_data(std::span<const double> observed,
               std::span<const double> simulated, int grid = 100);

struct Bands {
  Eigen::VectorXd low, mean, high;  // per coordinate
  int members = 0;
  bool below_minimum = false;  // fewer than 40 members
};

// Rows are ensemble members, columns coordinates. 2.5 % and 97.5 % quantiles
// and means per column, ignoring missing entries.
Bands prediction_bands(const Eigen::Ref<const RowMatrix>& ensemble);

// --- validation report -------------------------------------------------------

struct ComparisonRow {
  std::string table;      // daily_moments, daily_quantiles, ...
  std::string statistic;  // e.g. "mean", "q0.9", "dry", "day_record"
  int coordinate = 0;     // day of year, spell length, rank, month
  double observed = 0.0;
  double sim_mean = 0.0;
  double band_low = 0.0;
  double band_high = 0.0;
};

struct CoverageLine {
  std::string table;
  std::string statistic;
  int inside = 0;
  int total = 0;
  double fraction() const { return total ? static_cast<double>(inside) / total : 0.0; }
};

struct ValidationReport {
  std::vector<ComparisonRow> daily_moments;
  std::vector<ComparisonRow> daily_quantiles;
  std::vector<ComparisonRow> spells;
  std::vector<ComparisonRow> maxima;
  std::vector<ComparisonRow> interannual;
  QQData qq;
  std::vector<CoverageLine> coverage;
  int members = 0;
  int T = 0;
  bool below_minimum = false;
};

struct ValidationOptions {
  std::vector<double> probs{0.5, 0.75, 0.9, 0.95, 0.99};
  int qq_grid = 100;
  int max_spell = 30;  // longer spells are pooled into this length
  int jobs = 1;
};

// Compares an observed series with ensemble members of the same length and
// calendar. Throws ModelError on calendar mismatch.
ValidationReport build_validation_report(const SeriesData& observed,
                                         const SimulationBatch& batch, int T,
                                         const ValidationOptions& options = {});

// Writes daily_moments.csv, daily_quantiles.csv, spells.csv, maxima.csv,
// interannual.csv, qq.csv and summary.txt into `dir`.
void write_validation_report(const ValidationReport& report,
                             const std::filesystem::path& dir);

}  // namespace shmm
