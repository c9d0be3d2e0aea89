#include "ldsb/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ldsb/error.hpp"
#include "ldsb/io.hpp"
#include "ldsb/rng.hpp"

namespace ldsb {

void LabeledDataset::validate() const {
  if (num_classes < 2) throw Error(ErrorKind::InvalidInput, "dataset needs at least 2 classes");
  if (y.size() != X.rows()) throw Error(ErrorKind::InvalidInput, "label count differs from row count");
  if (X.rows() < 2) throw Error(ErrorKind::InvalidInput, "dataset needs at least 2 rows");
  if (!X.all_finite()) throw Error(ErrorKind::InvalidInput, "dataset has non-finite features");
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int label : y) {
    if (label < 0 || label >= num_classes) throw Error(ErrorKind::InvalidInput, "label out of range");
    ++counts[static_cast<std::size_t>(label)];
  }
  if (std::find(counts.begin(), counts.end(), 0u) != counts.end())
    throw Error(ErrorKind::InvalidInput, "some class has no examples");
  if (meta.linear_coord && (!meta.margin_gamma || *meta.margin_gamma <= 0.0))
    throw Error(ErrorKind::InvalidInput, "linear_coord set without a positive margin");
  if (!meta.coord_roles.empty() && meta.coord_roles.size() != X.cols())
    throw Error(ErrorKind::InvalidInput, "coord_roles length differs from d");
}

LabeledDataset LabeledDataset::with_features(Matrix features) const {
  if (features.rows() != X.rows()) throw Error(ErrorKind::ShapeError, "with_features: row count differs");
  LabeledDataset out = *this;
  out.X = std::move(features);
  return out;
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.meta = meta;
  out.X = Matrix(rows.size(), X.cols());
  out.y.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(X.row(rows[r]).begin(), X.row(rows[r]).end(), out.X.row(r).begin());
    out.y[r] = y[rows[r]];
  }
  return out;
}

void IfmSpec::validate() const {
  if (num_nonlinear < 1) throw Error(ErrorKind::InvalidSpec, "num_nonlinear must be >= 1");
  if (d != 1 + num_nonlinear + num_noise)
    throw Error(ErrorKind::InvalidSpec, "d must equal 1 + num_nonlinear + num_noise");
  if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw Error(ErrorKind::InvalidSpec, "gamma must be >= 1");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw Error(ErrorKind::InvalidSpec, "jitter must be >= 0");
  if (n_train < 2 || n_test < 2) throw Error(ErrorKind::InvalidSpec, "n_train and n_test must be >= 2");
  if (n_val == 1) throw Error(ErrorKind::InvalidSpec, "n_val must be 0 or >= 2");
}

namespace {

// Balanced labels in a random order.
std::vector<int> stratified_labels(std::size_t n, Rng& rng) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i < n / 2 ? 1 : 0;
  for (std::size_t i = n; i > 1; --i) std::swap(y[i - 1], y[rng.below(i)]);
  return y;
}

FeatureMeta ifm_meta(const IfmSpec& spec) {
  FeatureMeta meta;
  meta.linear_coord = 0;
  meta.margin_gamma = spec.gamma;
  meta.coord_roles.assign(spec.d, CoordRole::Noise);
  meta.coord_roles[0] = CoordRole::Linear;
  for (std::size_t j = 0; j < spec.num_nonlinear; ++j) meta.coord_roles[1 + j] = CoordRole::Nonlinear;
  return meta;
}

double linear_coordinate(int label, double gamma, double jitter, Rng& rng) {
  const double s = signed_label(label);
  return s * (gamma + rng.uniform(0.0, jitter));
}

}  // namespace

LabeledDataset gen_ifm(const IfmSpec& spec, std::size_t n, std::uint64_t stream) {
  spec.validate();
  if (n < 2) throw Error(ErrorKind::InvalidSpec, "gen_ifm: n must be >= 2");
  Rng rng = Rng(spec.seed).stream("ifm").substream(stream);
  LabeledDataset ds;
  ds.num_classes = 2;
  ds.meta = ifm_meta(spec);
  ds.y = stratified_labels(n, rng);
  ds.X = Matrix(n, spec.d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.X.row(i);
    const int label = ds.y[i];
    row[0] = linear_coordinate(label, spec.gamma, spec.jitter, rng);
    for (std::size_t j = 0; j < spec.num_nonlinear; ++j)
      row[1 + j] = label == 1 ? (rng.coin() ? 1.0 : -1.0) : 0.0;
    for (std::size_t j = 1 + spec.num_nonlinear; j < spec.d; ++j) row[j] = rng.normal();
  }
  return ds;
}

DatasetSplits gen_ifm_splits(const IfmSpec& spec) {
  DatasetSplits s;
  s.train = gen_ifm(spec, spec.n_train, 0);
  if (spec.n_val > 0) s.val = gen_ifm(spec, spec.n_val, 1);
  s.test = gen_ifm(spec, spec.n_test, 2);
  return s;
}

LabeledDataset gen_pointmass_d(std::size_t d, double gamma, bool include_bias_coord) {
  if (d < 2) throw Error(ErrorKind::InvalidInput, "gen_pointmass_d: d must be >= 2");
  if (d > 21) throw Error(ErrorKind::TooLarge, "gen_pointmass_d: d > 21 would materialize too many rows");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorKind::InvalidInput, "gamma must be > 0");
  const std::size_t patterns = std::size_t{1} << (d - 1);
  const std::size_t cols = d + (include_bias_coord ? 1 : 0);
  LabeledDataset ds;
  ds.num_classes = 2;
  ds.X = Matrix(patterns + 1, cols);
  ds.y.assign(patterns + 1, 1);
  for (std::size_t p = 0; p < patterns; ++p) {
    auto row = ds.X.row(p);
    row[0] = gamma;
    for (std::size_t j = 0; j + 1 < d; ++j) row[1 + j] = ((p >> j) & 1u) ? -1.0 : 1.0;
    if (include_bias_coord) row[d] = 1.0;
  }
  auto neg = ds.X.row(patterns);
  neg[0] = -gamma;
  if (include_bias_coord) neg[d] = 1.0;
  ds.y[patterns] = 0;

  ds.meta.linear_coord = 0;
  ds.meta.margin_gamma = gamma;
  ds.meta.coord_roles.assign(cols, CoordRole::Nonlinear);
  ds.meta.coord_roles[0] = CoordRole::Linear;
  if (include_bias_coord) ds.meta.coord_roles[d] = CoordRole::Noise;
  return ds;
}

double sphere_pattern_radius(std::size_t dim) {
  // Wilson-Hilferty approximation of the chi-square median.
  const double k = static_cast<double>(dim);
  const double t = 1.0 - 2.0 / (9.0 * k);
  return std::sqrt(k * t * t * t);
}

LabeledDataset gen_collage(const IfmSpec& spec, CollagePattern pattern, std::size_t n,
                           std::uint64_t stream) {
  spec.validate();
  if (spec.num_nonlinear < 2) throw Error(ErrorKind::InvalidSpec, "gen_collage: num_nonlinear must be >= 2");
  if (n < 2) throw Error(ErrorKind::InvalidSpec, "gen_collage: n must be >= 2");
  Rng rng = Rng(spec.seed).stream(pattern == CollagePattern::Xor ? "collage-xor" : "collage-sphere").substream(stream);

  LabeledDataset ds;
  ds.num_classes = 2;
  ds.meta = ifm_meta(spec);
  if (pattern == CollagePattern::Xor) {
    for (std::size_t j = 3; j <= spec.num_nonlinear; ++j) ds.meta.coord_roles[j] = CoordRole::Noise;
  }
  ds.y = stratified_labels(n, rng);
  ds.X = Matrix(n, spec.d);

  const std::size_t block = spec.num_nonlinear;
  const double radius = sphere_pattern_radius(block);
  // Rows within this relative band of the radius are resampled so the
  // sphere block keeps a positive margin.
  constexpr double kBand = 0.05;

  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.X.row(i);
    const int label = ds.y[i];
    row[0] = linear_coordinate(label, spec.gamma, spec.jitter, rng);
    if (pattern == CollagePattern::Xor) {
      // label 1 <=> the two pattern coordinates share a sign.
      const bool s1 = rng.coin();
      const bool s2 = label == 1 ? s1 : !s1;
      row[1] = (s1 ? 1.0 : -1.0) * rng.uniform(0.5, 1.5);
      row[2] = (s2 ? 1.0 : -1.0) * rng.uniform(0.5, 1.5);
      for (std::size_t j = 3; j <= block; ++j) row[j] = rng.normal();
    } else {
      // label 1 <=> outside the sphere.
      for (;;) {
        double n2 = 0.0;
        for (std::size_t j = 1; j <= block; ++j) {
          row[j] = rng.normal();
          n2 += row[j] * row[j];
        }
        const double r = std::sqrt(n2);
        if (label == 1 && r > radius * (1.0 + kBand)) break;
        if (label == 0 && r < radius * (1.0 - kBand)) break;
      }
    }
    for (std::size_t j = 1 + block; j < spec.d; ++j) row[j] = rng.normal();
  }
  return ds;
}

DatasetSplits gen_collage_splits(const IfmSpec& spec, CollagePattern pattern) {
  DatasetSplits s;
  s.train = gen_collage(spec, pattern, spec.n_train, 0);
  if (spec.n_val > 0) s.val = gen_collage(spec, pattern, spec.n_val, 1);
  s.test = gen_collage(spec, pattern, spec.n_test, 2);
  return s;
}

// ---------------------------------------------------------------------------
// CSV persistence

namespace {

char role_char(CoordRole r) {
  switch (r) {
    case CoordRole::Linear: return 'L';
    case CoordRole::Nonlinear: return 'N';
    case CoordRole::Noise: return 'Z';
  }
  return 'Z';
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view tok, std::size_t line) {
  std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError(line, "bad number '" + s + "'");
  return v;
}

long long parse_int(std::string_view tok, std::size_t line) {
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(line, "bad integer '" + std::string(tok) + "'");
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string serialize_dataset(const LabeledDataset& ds) {
  std::ostringstream out;
  out << "# ldsb-dataset v1 d=" << ds.d() << " L=" << ds.num_classes << " linear_coord=";
  if (ds.meta.linear_coord) out << *ds.meta.linear_coord; else out << "none";
  out << " gamma=";
  if (ds.meta.margin_gamma) out << format_double(*ds.meta.margin_gamma); else out << "none";
  if (!ds.meta.coord_roles.empty()) {
    out << " roles=";
    for (CoordRole r : ds.meta.coord_roles) out << role_char(r);
  }
  out << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (double v : ds.X.row(i)) out << format_double(v) << ',';
    out << ds.y[i] << '\n';
  }
  return out.str();
}

LabeledDataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty file");
  std::string_view header = trim(line);
  constexpr std::string_view kMagic = "# ldsb-dataset v1";
  if (header.substr(0, kMagic.size()) != kMagic) throw ParseError(1, "missing '# ldsb-dataset v1' header");

  std::optional<std::size_t> d;
  std::optional<int> num_classes;
  LabeledDataset ds;
  std::string roles;
  bool saw_linear = false, saw_gamma = false;
  std::istringstream hs{std::string(header.substr(kMagic.size()))};
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ParseError(1, "malformed header field '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "d") {
      const long long v = parse_int(val, 1);
      if (v < 1) throw ParseError(1, "d must be >= 1");
      d = static_cast<std::size_t>(v);
    } else if (key == "L") {
      const long long v = parse_int(val, 1);
      if (v < 2) throw ParseError(1, "L must be >= 2");
      num_classes = static_cast<int>(v);
    } else if (key == "linear_coord") {
      saw_linear = true;
      if (val != "none") ds.meta.linear_coord = static_cast<std::size_t>(parse_int(val, 1));
    } else if (key == "gamma") {
      saw_gamma = true;
      if (val != "none") ds.meta.margin_gamma = parse_double(val, 1);
    } else if (key == "roles") {
      roles = val;
    } else {
      throw ParseError(1, "unknown header field '" + key + "'");
    }
  }
  if (!d || !num_classes || !saw_linear || !saw_gamma) throw ParseError(1, "header is missing a required field");
  ds.num_classes = *num_classes;
  if (!roles.empty()) {
    if (roles.size() != *d) throw ParseError(1, "roles length differs from d");
    for (char c : roles) {
      if (c == 'L') ds.meta.coord_roles.push_back(CoordRole::Linear);
      else if (c == 'N') ds.meta.coord_roles.push_back(CoordRole::Nonlinear);
      else if (c == 'Z') ds.meta.coord_roles.push_back(CoordRole::Noise);
      else throw ParseError(1, "bad role character");
    }
  }

  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    std::size_t fields = 0;
    std::size_t start = 0;
    std::vector<std::string_view> toks;
    while (true) {
      const auto comma = sv.find(',', start);
      toks.push_back(trim(sv.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    fields = toks.size();
    if (fields != *d + 1)
      throw ParseError(lineno, "expected " + std::to_string(*d + 1) + " fields, found " + std::to_string(fields));
    for (std::size_t j = 0; j < *d; ++j) values.push_back(parse_double(toks[j], lineno));
    const long long label = parse_int(toks[*d], lineno);
    if (label < 0 || label >= *num_classes) throw ParseError(lineno, "label out of range");
    ds.y.push_back(static_cast<int>(label));
  }
  if (ds.y.empty()) throw ParseError(lineno, "no data rows");
  ds.X = Matrix(ds.y.size(), *d, std::move(values));
  try {
    ds.validate();
  } catch (const Error& e) {
    throw ParseError(lineno, e.what());
  }
  return ds;
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(ds));
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path));
}

}  // namespace ldsb
