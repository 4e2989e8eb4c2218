#include "config.hpp"

#include <shmm/errors.hpp>
#include <shmm/model_io.hpp>

#include <json.hpp>

#include <functional>
#include <map>

namespace shmm::cli {

namespace {

using nlohmann::json;

template <class T>
T as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw InputError("config field '" + key + "' has the wrong type");
  }
}

// Applies each present key through its handler; unknown keys are errors.
void visit(const json& obj, const std::string& where,
           const std::map<std::string, std::function<void(const json&)>>& handlers) {
  if (!obj.is_object()) throw InputError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) {
      throw InputError("unknown config field '" + (where.empty() ? key : where + "." + key) + "'");
    }
    it->second(value);
  }
}

}  // namespace

RunConfig profile_defaults(std::string_view profile) {
  RunConfig c;
  c.hyper.K = 4;
  c.hyper.M = 3;
  c.hyper.d = 2;
  c.hyper.T = 365;
  c.hyper.mode = EmissionMode::Discretized;
  c.hyper.resolution = 0.1;
  c.em.restarts = 40;
  if (profile == "reproduction") {
    c.profile = "reproduction";
  } else if (profile == "quick") {
    c.profile = "quick";
    c.hyper.K = 2;
    c.hyper.M = 2;
    c.hyper.d = 1;
    c.em.restarts = 3;
    c.em.max_iters = 100;
    c.simulate.count = 100;
    c.simulate.n = 3650;
    c.validate.ensemble_count = 100;
  } else {
    throw InputError("unknown profile '" + std::string(profile) + "'");
  }
  return c;
}

RunConfig apply_config_json(RunConfig c, std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  visit(root, "", {
      {"profile", [&](const json& v) { c.profile = as<std::string>(v, "profile"); }},
      {"seed", [&](const json& v) { c.seed = as<std::uint64_t>(v, "seed"); }},
      {"hyper", [&](const json& h) {
         visit(h, "hyper", {
             {"K", [&](const json& v) { c.hyper.K = as<int>(v, "hyper.K"); }},
             {"M", [&](const json& v) { c.hyper.M = as<int>(v, "hyper.M"); }},
             {"d", [&](const json& v) { c.hyper.d = as<int>(v, "hyper.d"); }},
             {"T", [&](const json& v) { c.hyper.T = as<int>(v, "hyper.T"); }},
             {"mode", [&](const json& v) {
                c.hyper.mode = emission_mode_from_string(as<std::string>(v, "hyper.mode"));
              }},
             {"resolution", [&](const json& v) { c.hyper.resolution = as<double>(v, "hyper.resolution"); }},
         });
       }},
      {"em", [&](const json& e) {
         visit(e, "em", {
             {"restarts", [&](const json& v) { c.em.restarts = as<int>(v, "em.restarts"); }},
             {"epsilon", [&](const json& v) { c.em.epsilon = as<double>(v, "em.epsilon"); }},
             {"max_iters", [&](const json& v) { c.em.max_iters = as<int>(v, "em.max_iters"); }},
             {"optimizer", [&](const json& o) {
                visit(o, "em.optimizer", {
                    {"max_evals", [&](const json& v) { c.em.optimizer.max_evals = as<int>(v, "em.optimizer.max_evals"); }},
                    {"barrier_weight", [&](const json& v) { c.em.optimizer.barrier_weight = as<double>(v, "em.optimizer.barrier_weight"); }},
                });
              }},
         });
       }},
      {"spectral", [&](const json& s) {
         visit(s, "spectral", {
             {"N", [&](const json& v) { c.spectral.N = as<int>(v, "spectral.N"); }},
             {"y_max", [&](const json& v) { c.spectral.y_max = as<double>(v, "spectral.y_max"); }},
             {"rank_tol", [&](const json& v) {
                if (v.is_null()) {
                  c.spectral.rank_tol.reset();
                } else {
                  c.spectral.rank_tol = as<double>(v, "spectral.rank_tol");
                }
              }},
             {"days", [&](const json& v) { c.spectral.days = as<std::vector<int>>(v, "spectral.days"); }},
         });
       }},
      {"simulate", [&](const json& s) {
         visit(s, "simulate", {
             {"count", [&](const json& v) { c.simulate.count = as<int>(v, "simulate.count"); }},
             {"n", [&](const json& v) { c.simulate.n = as<long long>(v, "simulate.n"); }},
             {"first_day", [&](const json& v) { c.simulate.first_day = as<int>(v, "simulate.first_day"); }},
             {"format", [&](const json& v) { c.simulate.format = as<std::string>(v, "simulate.format"); }},
         });
       }},
      {"validate", [&](const json& s) {
         visit(s, "validate", {
             {"ensemble_count", [&](const json& v) { c.validate.ensemble_count = as<int>(v, "validate.ensemble_count"); }},
             {"probs", [&](const json& v) { c.validate.probs = as<std::vector<double>>(v, "validate.probs"); }},
             {"qq_grid", [&](const json& v) { c.validate.qq_grid = as<int>(v, "validate.qq_grid"); }},
             {"max_spell", [&](const json& v) { c.validate.max_spell = as<int>(v, "validate.max_spell"); }},
         });
       }},
      {"ingest", [&](const json& s) {
         visit(s, "ingest", {
             {"suspect_as_missing", [&](const json& v) { c.ingest.suspect_as_missing = as<bool>(v, "ingest.suspect_as_missing"); }},
         });
       }},
      {"io", [&](const json& s) {
         visit(s, "io", {
             {"input", [&](const json& v) { c.io.input = as<std::string>(v, "io.input"); }},
             {"output_dir", [&](const json& v) { c.io.output_dir = as<std::string>(v, "io.output_dir"); }},
             {"station", [&](const json& v) { c.io.station = as<std::string>(v, "io.station"); }},
         });
       }},
  });
  return c;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["profile"] = c.profile;
  j["seed"] = c.seed;
  j["hyper"] = {{"K", c.hyper.K},
                {"M", c.hyper.M},
                {"d", c.hyper.d},
                {"T", c.hyper.T},
                {"mode", to_string(c.hyper.mode)},
                {"resolution", c.hyper.resolution}};
  j["em"] = {{"restarts", c.em.restarts},
             {"epsilon", c.em.epsilon},
             {"max_iters", c.em.max_iters},
             {"optimizer", {{"max_evals", c.em.optimizer.max_evals},
                            {"barrier_weight", c.em.optimizer.barrier_weight}}}};
  j["spectral"] = {{"N", c.spectral.N},
                   {"y_max", c.spectral.y_max},
                   {"rank_tol", c.spectral.rank_tol ? json(*c.spectral.rank_tol) : json(nullptr)},
                   {"days", c.spectral.days}};
  j["simulate"] = {{"count", c.simulate.count},
                   {"n", c.simulate.n},
                   {"first_day", c.simulate.first_day},
                   {"format", c.simulate.format}};
  j["validate"] = {{"ensemble_count", c.validate.ensemble_count},
                   {"probs", c.validate.probs},
                   {"qq_grid", c.validate.qq_grid},
                   {"max_spell", c.validate.max_spell}};
  j["ingest"] = {{"suspect_as_missing", c.ingest.suspect_as_missing}};
  j["io"] = {{"input", c.io.input},
             {"output_dir", c.io.output_dir},
             {"station", c.io.station}};
  return j.dump(2) + "\n";
}

}  // namespace shmm::cli
