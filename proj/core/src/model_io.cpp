#include "shmm/model_io.hpp"

#include "shmm/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace shmm {

using nlohmann::json;

namespace {

json matrix_to_json(const RowMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

RowMatrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                           const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ModelError(std::string(name) + ": expected " + std::to_string(rows) +
                     " rows");
  }
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    // An empty beta (d = 0) may be written as [] per row.
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ModelError(std::string(name) + ": row " + std::to_string(i) +
                       " should have " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

}  // namespace

std::string to_string(EmissionMode mode) {
  return mode == EmissionMode::Continuous ? "continuous" : "discretized";
}

EmissionMode emission_mode_from_string(std::string_view text) {
  if (text == "continuous") return EmissionMode::Continuous;
  if (text == "discretized") return EmissionMode::Discretized;
  throw InputError("unknown emission mode '" + std::string(text) + "'");
}

std::string model_to_json(const ModelParams& params, const ModelMeta& meta) {
  const auto& h = params.hyper;
  json doc;
  doc["hyper"] = {{"K", h.K},
                  {"M", h.M},
                  {"d", h.d},
                  {"T", h.T},
                  {"mode", to_string(h.mode)},
                  {"resolution", h.resolution}};
  doc["Q"] = matrix_to_json(params.Q);
  doc["p"] = matrix_to_json(params.p);
  doc["lambda"] = matrix_to_json(params.lambda);
  doc["beta"] = matrix_to_json(params.beta);
  json m = {{"station", meta.station}};
  m["fit_loglik"] = meta.fit_loglik ? json(*meta.fit_loglik) : json(nullptr);
  m["seed"] = meta.seed ? json(*meta.seed) : json(nullptr);
  doc["meta"] = std::move(m);
  return doc.dump(2) + "\n";
}

ModelFile model_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("model file is not valid JSON: ") + e.what());
  }
  ModelFile out;
  try {
    const json& h = doc.at("hyper");
    HyperParams hyper;
    hyper.K = h.at("K").get<int>();
    hyper.M = h.at("M").get<int>();
    hyper.d = h.at("d").get<int>();
    hyper.T = h.value("T", 365);
    hyper.mode = emission_mode_from_string(h.value("mode", "continuous"));
    hyper.resolution = h.value("resolution", 0.1);
    if (hyper.K < 1 || hyper.M < 2 || hyper.d < 0 || hyper.T < 1) {
      throw ModelError("model file: invalid hyperparameters");
    }
    out.params.hyper = hyper;
    out.params.Q = matrix_from_json(doc.at("Q"), hyper.K, hyper.K, "Q");
    out.params.p = matrix_from_json(doc.at("p"), hyper.K, hyper.M, "p");
    out.params.lambda =
        matrix_from_json(doc.at("lambda"), hyper.K, hyper.M - 1, "lambda");
    out.params.beta =
        matrix_from_json(doc.at("beta"), hyper.K, 2 * hyper.d, "beta");
    if (doc.contains("meta") && doc["meta"].is_object()) {
      const json& m = doc["meta"];
      out.meta.station = m.value("station", "");
      if (m.contains("fit_loglik") && m["fit_loglik"].is_number()) {
        out.meta.fit_loglik = m["fit_loglik"].get<double>();
      }
      if (m.contains("seed") && m["seed"].is_number_integer()) {
        out.meta.seed = m["seed"].get<std::uint64_t>();
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("model file: ") + e.what());
  }
  require_valid(out.params);
  return out;
}

void write_model(const std::filesystem::path& path, const ModelParams& params,
                 const ModelMeta& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os << model_to_json(params, meta);
}

ModelFile read_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace shmm
