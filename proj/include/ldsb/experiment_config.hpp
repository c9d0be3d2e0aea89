#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ldsb/datasets.hpp"
#include "ldsb/model.hpp"
#include "ldsb/sb_analysis.hpp"
#include "ldsb/training.hpp"

namespace ldsb::cli {

enum class DatasetFamily { Ifm, CollageXor, CollageSphere };

std::string to_string(DatasetFamily f);
DatasetFamily parse_family(const std::string& s);

struct DatasetConfig {
  DatasetFamily family = DatasetFamily::Ifm;
  IfmSpec spec;
};

struct ModelConfig {
  Regime regime = Regime::Rich;
  std::size_t width = 100;
};

struct AnalysisConfig {
  // Empty means auto_rank.
  std::optional<std::size_t> rank = 1;
  double energy = 0.99;
  double lambda = 1.0;
  // Mixing pairs per evaluation row.
  std::size_t pairs_per_row = 10;
  std::size_t projector_steps = 2000;
  double projector_lr = 0.1;
  std::size_t projector_batch = 0;
  // Gaussian noise scale of the set used for diversity metrics.
  double sigma_div = 1.0;
};

struct RobustnessConfig {
  Vector sigmas{0.0, 0.25, 0.5, 1.0, 2.0};
  std::size_t trials = 5;
};

struct NtkConfig {
  std::size_t d = 100000;
  double gamma = 7.0;
};

// Everything a subcommand needs. The master seed drives data generation,
// initialization, batching and evaluation noise through named streams.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  AnalysisConfig analysis;
  RobustnessConfig robustness;
  NtkConfig ntk;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  // FNV-1a of the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

// Overlays `j` onto `base`. Unknown keys and wrongly typed values throw
// InvalidInput.
ExperimentConfig apply_json(const ExperimentConfig& base, const nlohmann::json& j);

ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Seeds for the second-stage models, derived from the master seed.
std::uint64_t derived_seed(std::uint64_t master, const std::string& purpose);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace ldsb::cli
