#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ldsb/linalg.hpp"

namespace ldsb {

enum class CoordRole { Linear, Nonlinear, Noise };

struct FeatureMeta {
  std::optional<std::size_t> linear_coord;
  std::optional<double> margin_gamma;
  std::vector<CoordRole> coord_roles;

  friend bool operator==(const FeatureMeta&, const FeatureMeta&) = default;
};

struct LabeledDataset {
  Matrix X;                 // n x d
  std::vector<int> y;       // labels in [0, num_classes)
  int num_classes = 2;
  FeatureMeta meta;

  std::size_t n() const noexcept { return X.rows(); }
  std::size_t d() const noexcept { return X.cols(); }

  // Throws InvalidInput when the dataset invariants do not hold.
  void validate() const;
  // Same labels and metadata, rows replaced.
  LabeledDataset with_features(Matrix features) const;
  LabeledDataset subset(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Binary labels: class 1 is y = +1, class 0 is y = -1.
inline double signed_label(int label) { return label == 1 ? 1.0 : -1.0; }

// Independent-features-model family. Coordinate 0 is linear with margin
// gamma, the next num_nonlinear coordinates are nonlinear, the remainder are
// label-independent Gaussian noise.
struct IfmSpec {
  std::size_t d = 20;
  double gamma = 1.5;
  std::size_t n_train = 1000;
  std::size_t n_val = 500;
  std::size_t n_test = 1000;
  std::size_t num_nonlinear = 19;
  std::size_t num_noise = 0;
  std::uint64_t seed = 0;
  // Width of the label-directed jitter added to the linear coordinate.
  double jitter = 0.25;

  void validate() const;
};

struct DatasetSplits {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

enum class CollagePattern { Xor, Sphere };

// One stratified draw of n rows.
LabeledDataset gen_ifm(const IfmSpec& spec, std::size_t n, std::uint64_t stream);
DatasetSplits gen_ifm_splits(const IfmSpec& spec);

// The point-mass dataset D: every +-1 pattern on the d-1 nonlinear
// coordinates with x_0 = gamma (label 1), plus the single point
// (-gamma, 0, ..., 0) (label 0). Positive rows come first, ordered by the
// binary counter over patterns (bit set -> -1).
LabeledDataset gen_pointmass_d(std::size_t d, double gamma, bool include_bias_coord);

LabeledDataset gen_collage(const IfmSpec& spec, CollagePattern pattern, std::size_t n,
                           std::uint64_t stream);
DatasetSplits gen_collage_splits(const IfmSpec& spec, CollagePattern pattern);

// Radius used to split the sphere pattern: the median norm of a standard
// Gaussian in `dim` dimensions, so both classes are equally likely.
double sphere_pattern_radius(std::size_t dim);

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

std::string serialize_dataset(const LabeledDataset& ds);
LabeledDataset parse_dataset(const std::string& text);

}  // namespace ldsb
