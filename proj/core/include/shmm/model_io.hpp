#pragma once

#include "shmm/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace shmm {

struct ModelMeta {
  std::string station;
  std::optional<double> fit_loglik;
  std::optional<std::uint64_t> seed;
};

struct ModelFile {
  ModelParams params;
  ModelMeta meta;
};

// JSON document:
//   {"hyper": {"K","M","d","T","mode","resolution"},
//    "Q": [[...]], "p": [[...]], "lambda": [[...]], "beta": [[...]],
//    "meta": {"station","fit_loglik","seed"}}
// Doubles are written in shortest round-trip form, so reading a written
// model reproduces every parameter bit for bit.
std::string model_to_json(const ModelParams& params, const ModelMeta& meta = {});

// Throws InputError on malformed JSON or missing fields, ModelError when the
// parameters violate the model invariants.
ModelFile model_from_json(std::string_view text);

void write_model(const std::filesystem::path& path, const ModelParams& params,
                 const ModelMeta& meta = {});
ModelFile read_model(const std::filesystem::path& path);

std::string to_string(EmissionMode mode);
EmissionMode emission_mode_from_string(std::string_view text);

}  // namespace shmm
