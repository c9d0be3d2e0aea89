#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"

#include "ldsb/datasets.hpp"
#include "ldsb/error.hpp"

using namespace ldsb;

namespace {

IfmSpec small_spec() {
  IfmSpec s;
  s.d = 8;
  s.num_nonlinear = 5;
  s.num_noise = 2;
  s.n_train = 200;
  s.n_val = 50;
  s.n_test = 100;
  s.seed = 17;
  return s;
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_dataset(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("ifm rows follow the feature roles") {
  const IfmSpec spec = small_spec();
  const LabeledDataset ds = gen_ifm(spec, 300, 0);
  REQUIRE(ds.n() == 300);
  REQUIRE(ds.d() == 8);
  ds.validate();
  std::size_t ones = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double s = signed_label(ds.y[i]);
    ones += ds.y[i] == 1;
    // Linear coordinate separates with margin gamma.
    CHECK(s * ds.X(i, 0) >= spec.gamma);
    CHECK(s * ds.X(i, 0) <= spec.gamma + spec.jitter);
    for (std::size_t j = 1; j <= spec.num_nonlinear; ++j) {
      if (ds.y[i] == 1) CHECK(std::abs(ds.X(i, j)) == 1.0);
      else CHECK(ds.X(i, j) == 0.0);
    }
  }
  CHECK(ones == 150);
  CHECK(ds.meta.linear_coord == std::optional<std::size_t>(0));
  CHECK(ds.meta.coord_roles[0] == CoordRole::Linear);
  CHECK(ds.meta.coord_roles[5] == CoordRole::Nonlinear);
  CHECK(ds.meta.coord_roles[7] == CoordRole::Noise);
}

TEST_CASE("generation is deterministic and splits differ") {
  const IfmSpec spec = small_spec();
  const DatasetSplits a = gen_ifm_splits(spec);
  const DatasetSplits b = gen_ifm_splits(spec);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.X.row(0)[0] != a.test.X.row(0)[0]);
  CHECK(a.val.n() == 50);
  IfmSpec other = spec;
  other.seed = 18;
  CHECK(!(gen_ifm_splits(other).train == a.train));
}

TEST_CASE("ifm spec validation") {
  IfmSpec s = small_spec();
  s.gamma = 0.5;
  CHECK_THROWS_AS(s.validate(), Error);
  s = small_spec();
  s.d = 9;
  CHECK_THROWS_AS(s.validate(), Error);
  s = small_spec();
  s.n_val = 1;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("point-mass dataset") {
  const double gamma = 2.0;
  const LabeledDataset ds = gen_pointmass_d(5, gamma, false);
  REQUIRE(ds.n() == 17);
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(ds.y[i] == 1);
    CHECK(ds.X(i, 0) == gamma);
    double n2 = 0.0;
    for (double v : ds.X.row(i)) n2 += v * v;
    CHECK(n2 == doctest::Approx(4.0 + gamma * gamma));
    rows.insert({ds.X.row(i).begin(), ds.X.row(i).end()});
  }
  CHECK(rows.size() == 16);
  CHECK(ds.y[16] == 0);
  CHECK(ds.X(16, 0) == -gamma);
  for (std::size_t j = 1; j < 5; ++j) CHECK(ds.X(16, j) == 0.0);
  // Counter order: pattern 1 flips the first nonlinear coordinate.
  CHECK(ds.X(0, 1) == 1.0);
  CHECK(ds.X(1, 1) == -1.0);

  const LabeledDataset with_bias = gen_pointmass_d(5, gamma, true);
  CHECK(with_bias.d() == 6);
  for (std::size_t i = 0; i < with_bias.n(); ++i) CHECK(with_bias.X(i, 5) == 1.0);
  CHECK_THROWS_AS(gen_pointmass_d(22, gamma, false), Error);
}

TEST_CASE("collage patterns label by their block") {
  IfmSpec spec = small_spec();
  spec.num_noise = 2;
  const LabeledDataset xr = gen_collage(spec, CollagePattern::Xor, 400, 0);
  for (std::size_t i = 0; i < xr.n(); ++i) {
    const bool same = (xr.X(i, 1) > 0) == (xr.X(i, 2) > 0);
    CHECK(same == (xr.y[i] == 1));
    CHECK(signed_label(xr.y[i]) * xr.X(i, 0) >= spec.gamma);
  }
  const LabeledDataset sp = gen_collage(spec, CollagePattern::Sphere, 400, 0);
  const double radius = sphere_pattern_radius(spec.num_nonlinear);
  for (std::size_t i = 0; i < sp.n(); ++i) {
    double n2 = 0.0;
    for (std::size_t j = 1; j <= spec.num_nonlinear; ++j) n2 += sp.X(i, j) * sp.X(i, j);
    CHECK((std::sqrt(n2) > radius) == (sp.y[i] == 1));
  }
}

TEST_CASE("sphere radius is close to the chi median") {
  // Median of chi-square with 2 dof is 2 ln 2.
  CHECK(sphere_pattern_radius(2) == doctest::Approx(std::sqrt(2.0 * std::log(2.0))).epsilon(0.02));
}

TEST_CASE("csv round trip is bit exact") {
  LabeledDataset ds = gen_ifm(small_spec(), 40, 1);
  ds.X(0, 7) = 0.1 + 0.2;
  ds.X(1, 7) = -1e-300;
  const LabeledDataset back = parse_dataset(serialize_dataset(ds));
  CHECK(back == ds);

  const auto path = std::filesystem::temp_directory_path() / "ldsb_test_roundtrip.csv";
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);
  std::filesystem::remove(path);
}

TEST_CASE("parse errors carry line numbers") {
  const std::string header = "# ldsb-dataset v1 d=2 L=2 linear_coord=none gamma=none\n";
  CHECK(parse_error_line("") == 1);
  CHECK(parse_error_line("x,y,label\n") == 1);
  CHECK(parse_error_line("# ldsb-dataset v1 d=2 L=2 linear_coord=none gamma=none bogus=1\n") == 1);
  CHECK(parse_error_line(header + "1,2,0\n3,4,1\n5,abc,0\n") == 4);
  CHECK(parse_error_line(header + "1,2,0\n3,4\n") == 3);
  CHECK(parse_error_line(header + "1,2,0\n3,4,2\n") == 3);
  CHECK(parse_error_line(header + "1,2,0\n3,4,0\n") == 3);
  CHECK(parse_dataset(header + "1,2,0\n\n3,4,1\n").n() == 2);
  CHECK_THROWS_AS(load_dataset("/nonexistent/ldsb.csv"), Error);
}
