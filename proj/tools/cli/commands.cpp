#include "commands.hpp"

#include "config.hpp"

#include <shmm/errors.hpp>
#include <shmm/inference.hpp>
#include <shmm/ingest.hpp>
#include <shmm/model_io.hpp>
#include <shmm/simulate.hpp>
#include <shmm/spectral.hpp>
#include <shmm/stats.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace shmm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), static_cast<std::size_t>(r.ptr - buf.data())};
}

std::shared_ptr<spdlog::logger> logger() {
  static const auto log = [] {
    auto l = spdlog::get("shmm");
    if (!l) l = spdlog::stderr_color_mt("shmm");
    l->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("SHMM_LOG")) {
      level = spdlog::level::from_str(env);
    }
    l->set_level(level);
    return l;
  }();
  return log;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

json matrix_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Observations as the model sees them: floored onto the grid in
// Discretized mode, then checked against the calendar.
SeriesData prepare_series(SeriesData series, const HyperParams& hyper) {
  if (hyper.mode == EmissionMode::Discretized) {
    series = discretize(series, hyper.resolution);
  }
  check_series(series, hyper);
  return series;
}

struct Context {
  RunConfig cfg;
  int jobs = 1;
  fs::path out_dir;
  std::ostream& out;
};

// --- commands ----------------------------------------------------------------

void cmd_ingest(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.io.input.empty()) throw InputError("ingest needs --input");
  ParseOptions opts;
  opts.suspect_as_missing = cfg.ingest.suspect_as_missing;
  const auto records = parse_file(cfg.io.input, opts);
  const SeriesSkeleton sk = normalize_calendar(records);
  SeriesData series = impute_missing(sk, cfg.seed);
  if (!cfg.io.station.empty()) series.station = cfg.io.station;

  write_series_csv(ctx.out_dir / "series.csv", series);
  json rep = {{"station", series.station},
              {"records", records.size()},
              {"dropped_feb29", sk.dropped_feb29},
              {"missing", sk.missing.size()},
              {"imputed", series.imputed.size()},
              {"points", series.size()},
              {"first_year", sk.first_year},
              {"years", sk.years}};
  write_text(ctx.out_dir / "ingest_report.json", rep.dump(2) + "\n");
  ctx.out << "station " << series.station << ": " << series.size()
          << " points over " << sk.years << " years, " << sk.missing.size()
          << " missing, " << series.imputed.size() << " imputed\n";
}

void cmd_fit(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.io.input.empty()) throw InputError("fit needs --series");
  const SeriesData series = prepare_series(read_series_csv(cfg.io.input), cfg.hyper);
  EMConfig em = cfg.em;
  em.seed = cfg.seed;
  logger()->info("fitting K={} M={} d={} with {} restarts on {} points", cfg.hyper.K,
                 cfg.hyper.M, cfg.hyper.d, em.restarts, series.size());
  const FitReport report = em_fit(series, cfg.hyper, em, ctx.jobs);

  ModelMeta meta;
  meta.station = cfg.io.station.empty() ? series.station : cfg.io.station;
  meta.fit_loglik = report.loglik_trace.back();
  meta.seed = cfg.seed;
  write_model(ctx.out_dir / "model.json", report.params, meta);

  std::ofstream trace(ctx.out_dir / "loglik_trace.csv", std::ios::trunc);
  trace << "restart,iter,loglik\n";
  json runs = json::array();
  for (const auto& r : report.runs) {
    for (std::size_t i = 0; i < r.loglik_trace.size(); ++i) {
      trace << r.index << ',' << i << ',' << num(r.loglik_trace[i]) << '\n';
    }
    runs.push_back({{"restart", r.index},
                    {"final_loglik", r.loglik_trace.empty() ? json(nullptr)
                                                            : json(r.loglik_trace.back())},
                    {"iterations", r.iterations},
                    {"converged", r.converged},
                    {"failed", r.failed},
                    {"error", r.error},
                    {"null_emission_steps", r.null_emission_steps}});
    if (r.failed) logger()->warn("restart {} failed: {}", r.index, r.error);
  }
  json summary = {{"best_restart", report.best_restart},
                  {"loglik", report.loglik_trace.back()},
                  {"iterations", report.iterations},
                  {"converged", report.converged},
                  {"seed", report.seed},
                  {"restarts", runs}};
  write_text(ctx.out_dir / "fit_summary.json", summary.dump(2) + "\n");
  ctx.out << "best restart " << report.best_restart << " loglik "
          << num(report.loglik_trace.back()) << " after " << report.iterations
          << " iterations" << (report.converged ? "" : " (not converged)") << "\n";
}

void cmd_decode(Context& ctx, const std::string& model_path) {
  const auto& cfg = ctx.cfg;
  if (cfg.io.input.empty()) throw InputError("decode needs --series");
  const ModelFile mf = read_model(model_path);
  const SeriesData series = prepare_series(read_series_csv(cfg.io.input), mf.params.hyper);
  std::vector<int> map_path, vit_path;
  try {
    map_path = map_states(e_step(mf.params, series));
    vit_path = viterbi(mf.params, series);
  } catch (const DegenerateLikelihood& e) {
    throw ModelError(std::string("series is impossible under the model: ") + e.what());
  }
  std::ofstream out(ctx.out_dir / "decode.csv", std::ios::trunc);
  if (!out) throw InputError("cannot write decode.csv");
  out << "index,day_of_year,map_state,viterbi_state\n";
  for (std::size_t t = 0; t < series.size(); ++t) {
    out << t + 1 << ',' << series.day_of_year[t] << ',' << map_path[t] + 1 << ','
        << vit_path[t] + 1 << '\n';
  }
  std::size_t differ = 0;
  for (std::size_t t = 0; t < series.size(); ++t) differ += map_path[t] != vit_path[t];
  ctx.out << "decoded " << series.size() << " days; MAP and Viterbi differ on "
          << differ << "\n";
}

void cmd_simulate(Context& ctx, const std::string& model_path) {
  const auto& cfg = ctx.cfg;
  const ModelFile mf = read_model(model_path);
  if (cfg.simulate.n < 1) throw InputError("simulate needs n >= 1");
  if (cfg.simulate.count < 1) throw InputError("simulate needs count >= 1");
  if (cfg.simulate.format != "bin" && cfg.simulate.format != "csv") {
    throw InputError("unknown batch format '" + cfg.simulate.format + "'");
  }
  const SimulationBatch batch =
      bootstrap_ensemble(mf.params, static_cast<std::size_t>(cfg.simulate.n),
                         static_cast<std::size_t>(cfg.simulate.count), cfg.seed,
                         ctx.jobs, cfg.simulate.first_day);
  const fs::path path = ctx.out_dir / ("simulations." + cfg.simulate.format);
  if (cfg.simulate.format == "bin") {
    write_batch_binary(path, batch);
  } else {
    write_batch_csv(path, batch);
  }
  ctx.out << "wrote " << batch.series.size() << " series of " << cfg.simulate.n
          << " days to " << path.string() << "\n";
}

void cmd_validate(Context& ctx, const std::string& batch_path,
                  const std::string& model_path) {
  const auto& cfg = ctx.cfg;
  if (cfg.io.input.empty()) throw InputError("validate needs --series");
  HyperParams hyper = cfg.hyper;
  if (!model_path.empty()) hyper = read_model(model_path).params.hyper;
  SeriesData observed = discretize(read_series_csv(cfg.io.input), hyper.resolution);
  SimulationBatch batch = read_batch(batch_path);
  if (batch.T != hyper.T) {
    throw ModelError("batch period " + std::to_string(batch.T) +
                     " differs from the model period " + std::to_string(hyper.T));
  }
  for (auto& s : batch.series) s = discretize(s, hyper.resolution);
  if (static_cast<int>(batch.series.size()) < 40) {
    logger()->warn("only {} ensemble members; 95% bands need at least 40",
                   batch.series.size());
  }
  ValidationOptions opts;
  opts.probs = cfg.validate.probs;
  opts.qq_grid = cfg.validate.qq_grid;
  opts.max_spell = cfg.validate.max_spell;
  opts.jobs = ctx.jobs;
  const ValidationReport rep = build_validation_report(observed, batch, hyper.T, opts);
  write_validation_report(rep, ctx.out_dir);
  for (const auto& c : rep.coverage) {
    ctx.out << c.table << ' ' << c.statistic << ": " << c.inside << '/' << c.total
            << " inside the 95% band\n";
  }
}

void cmd_spectral(Context& ctx, const std::string& model_path) {
  const auto& cfg = ctx.cfg;
  const bool exact = !model_path.empty();
  if (exact == !cfg.io.input.empty()) {
    throw InputError("spectral needs exactly one of --model or --series");
  }
  std::optional<ModelParams> params;
  SeriesData series;
  int K = cfg.hyper.K;
  int T = cfg.hyper.T;
  if (exact) {
    params = read_model(model_path).params;
    K = params->K();
    T = params->hyper.T;
  } else {
    series = read_series_csv(cfg.io.input);
    check_series(series, cfg.hyper);
  }
  const int N = cfg.spectral.N > 0 ? cfg.spectral.N : 4 * K;
  double y_max = cfg.spectral.y_max;
  if (!(y_max > 0.0)) {
    if (exact) {
      y_max = default_y_max(*params);
    } else {
      std::vector<double> wet;
      for (double v : series.values) if (v > 0.0) wet.push_back(v);
      y_max = wet.empty() ? 1.0 : quantile(series.values, 0.999);
      if (!(y_max > 0.0)) y_max = quantile(wet, 0.999);
    }
  }
  const BasisSpec basis = build_basis(N, y_max);
  SpectralOptions opts;
  opts.rank_tol = cfg.spectral.rank_tol.value_or(exact ? 1e-10 : 1e-3);
  opts.seed = cfg.seed;

  json estimates = json::array();
  std::ofstream sv(ctx.out_dir / "singular_values.csv", std::ios::trunc);
  sv << "t,matrix,index,value\n";
  for (const int t : cfg.spectral.days) {
    if (t < 1 || t > T) throw InputError("spectral day " + std::to_string(t) + " outside 1.." + std::to_string(T));
    const int next = reduce_day(t + 1, T);
    MomentSet at_t, at_next;
    json residuals = nullptr;
    if (exact) {
      at_t = exact_moments(*params, t, basis);
      at_next = exact_moments(*params, next, basis);
      const MomentResiduals r = moment_equation_residuals(at_t, *params, basis);
      residuals = {{"L", r.L}, {"M3", r.M3}, {"N2", r.N2}, {"P2", r.P2}};
    } else {
      at_t = empirical_moments(series, t, basis);
      at_next = empirical_moments(series, next, basis);
    }
    // Spectra go to the CSV before recovery so a rank failure leaves them.
    auto dump_sv = [&](const char* name, const Eigen::MatrixXd& m) {
      const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
      for (Eigen::Index i = 0; i < s.size(); ++i) sv << t << ',' << name << ',' << i + 1 << ',' << num(s(i)) << '\n';
    };
    dump_sv("P2", at_t.P2);
    dump_sv("N2", at_t.N2);
    sv.flush();

    const SpectralEstimate est = spectral_recover(at_t, at_next, K, opts);
    const auto& d = est.diagnostics;
    estimates.push_back({{"t", t},
                         {"O_t", matrix_json(est.O_t)},
                         {"O_next", matrix_json(est.O_next)},
                         {"pi", vector_json(est.pi)},
                         {"Q", matrix_json(est.Q)},
                         {"diagnostics",
                          {{"singular_P2", vector_json(d.singular_P2)},
                           {"singular_N2", vector_json(d.singular_N2)},
                           {"rank_tol", d.rank_tol},
                           {"diagonalization_attempts", d.diagonalization_attempts},
                           {"eigen_imag", d.eigen_imag},
                           {"eigen_gap", d.eigen_gap},
                           {"pi_sum_error", d.pi_sum_error},
                           {"Q_row_sum_error", d.Q_row_sum_error},
                           {"replicates", at_t.replicates},
                           {"moment_residuals", residuals}}}});
    ctx.out << "day " << t << ": recovered " << K << " states, sigma_K(P2) = "
            << num(d.singular_P2(K - 1)) << "\n";
  }
  json doc = {{"mode", exact ? "exact" : "empirical"},
              {"K", K},
              {"basis", {{"N", basis.N}, {"y_max", basis.y_max}}},
              {"seed", cfg.seed},
              {"estimates", estimates}};
  write_text(ctx.out_dir / "spectral.json", doc.dump(2) + "\n");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e)) return kInputError;
  if (dynamic_cast<const FitError*>(&e)) return kFitFailure;
  if (dynamic_cast<const ModelError*>(&e)) return kModelMismatch;
  if (dynamic_cast<const SpectralError*>(&e)) return kSpectralRank;
  if (dynamic_cast<const DegenerateLikelihood*>(&e)) return kFitFailure;
  return kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Seasonal hidden Markov models for daily rainfall", "shmm"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::optional<std::string> output_dir;
  std::optional<std::string> profile;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master random seed");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output-dir", output_dir, "Directory for output files");
  app.add_option("--profile", profile, "Default settings")
      ->check(CLI::IsMember({"reproduction", "quick"}));

  std::string input, series_path, model_path, batch_path, station, format;
  std::optional<int> restarts, count, N, K;
  std::optional<long long> n;
  std::optional<std::vector<int>> days;
  bool suspect = false;

  auto* ingest = app.add_subcommand("ingest", "Parse, normalize and impute a station file");
  ingest->add_option("--input", input, "ECA&D precipitation file")->required();
  ingest->add_option("--station", station, "Station label override");
  ingest->add_flag("--suspect-as-missing", suspect, "Treat quality code 1 as missing");

  auto* fit = app.add_subcommand("fit", "Fit a model by multi-restart EM");
  fit->add_option("--series", series_path, "Normalized series CSV")->required();
  fit->add_option("--restarts", restarts, "Number of EM restarts");

  auto* decode = app.add_subcommand("decode", "MAP and Viterbi state paths");
  decode->add_option("--model", model_path, "Model JSON")->required();
  decode->add_option("--series", series_path, "Normalized series CSV")->required();

  auto* simulate = app.add_subcommand("simulate", "Simulate a bootstrap ensemble");
  simulate->add_option("--model", model_path, "Model JSON")->required();
  simulate->add_option("--count", count, "Ensemble members");
  simulate->add_option("--n", n, "Days per member");
  simulate->add_option("--format", format, "bin or csv");

  auto* validate = app.add_subcommand("validate", "Compare a series with an ensemble");
  validate->add_option("--series", series_path, "Observed series CSV")->required();
  validate->add_option("--batch", batch_path, "Simulation batch (.bin or .csv)")->required();
  validate->add_option("--model", model_path, "Model JSON supplying T and the grid");

  auto* spectral = app.add_subcommand("spectral", "Spectral recovery from moments");
  spectral->add_option("--model", model_path, "Model JSON (analytic moments)");
  spectral->add_option("--series", series_path, "Series CSV (sample moments)");
  spectral->add_option("--days", days, "Days of year to recover");
  spectral->add_option("--N", N, "Basis size");
  spectral->add_option("--K", K, "Number of states (sample moments)");

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("shmm");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    std::string file_text;
    std::string chosen = "reproduction";
    if (!config_path.empty()) {
      file_text = read_text(config_path);
      const RunConfig peek = apply_config_json(profile_defaults("reproduction"), file_text);
      chosen = peek.profile;
    }
    if (profile) chosen = *profile;
    RunConfig cfg = profile_defaults(chosen);
    if (!file_text.empty()) cfg = apply_config_json(cfg, file_text);
    cfg.profile = chosen;
    if (seed) cfg.seed = *seed;
    if (output_dir) cfg.io.output_dir = *output_dir;
    if (!input.empty()) cfg.io.input = input;
    if (!series_path.empty()) cfg.io.input = series_path;
    if (!station.empty()) cfg.io.station = station;
    if (suspect) cfg.ingest.suspect_as_missing = true;
    if (restarts) cfg.em.restarts = *restarts;
    if (count) cfg.simulate.count = *count;
    if (n) cfg.simulate.n = *n;
    if (!format.empty()) cfg.simulate.format = format;
    if (days) cfg.spectral.days = *days;
    if (N) cfg.spectral.N = *N;
    if (K) cfg.hyper.K = *K;

    Context ctx{cfg, jobs, fs::path(cfg.io.output_dir), out};
    fs::create_directories(ctx.out_dir);
    write_text(ctx.out_dir / "effective_config.json", config_to_json(cfg));

    if (*ingest) cmd_ingest(ctx);
    else if (*fit) cmd_fit(ctx);
    else if (*decode) cmd_decode(ctx, model_path);
    else if (*simulate) cmd_simulate(ctx, model_path);
    else if (*validate) cmd_validate(ctx, batch_path, model_path);
    else if (*spectral) cmd_spectral(ctx, model_path);
    return kOk;
  } catch (const std::exception& e) {
    err << "shmm: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace shmm::cli
