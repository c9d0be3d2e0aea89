#include "ldsb/experiment_config.hpp"

#include <cstdio>
#include <set>

#include "ldsb/error.hpp"
#include "ldsb/rng.hpp"

namespace ldsb::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidInput, "config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw Error(ErrorKind::InvalidInput, "config: unknown key '" + where + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    const json& v = j.at(key);
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw Error(ErrorKind::InvalidInput, "");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw Error(ErrorKind::InvalidInput, "");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw Error(ErrorKind::InvalidInput, "");
    }
    out = v.get<T>();
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidInput, "config: bad value for '" + where + key + "'");
  }
}

std::string read_string(const json& j, const char* key, const std::string& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw Error(ErrorKind::InvalidInput, "config: '" + where + key + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace

std::string to_string(DatasetFamily f) {
  switch (f) {
    case DatasetFamily::Ifm: return "ifm";
    case DatasetFamily::CollageXor: return "collage-xor";
    case DatasetFamily::CollageSphere: return "collage-sphere";
  }
  return "ifm";
}

DatasetFamily parse_family(const std::string& s) {
  if (s == "ifm") return DatasetFamily::Ifm;
  if (s == "collage-xor") return DatasetFamily::CollageXor;
  if (s == "collage-sphere") return DatasetFamily::CollageSphere;
  throw Error(ErrorKind::InvalidInput, "unknown dataset family '" + s + "'");
}

void ExperimentConfig::validate() const {
  dataset.spec.validate();
  if (dataset.family != DatasetFamily::Ifm && dataset.spec.num_nonlinear < 2)
    throw Error(ErrorKind::InvalidSpec, "collage datasets need num_nonlinear >= 2");
  if (model.width < 1) throw Error(ErrorKind::InvalidInput, "model.width must be >= 1");
  train.validate();
  if (analysis.rank && (*analysis.rank < 1 || *analysis.rank >= dataset.spec.d))
    throw Error(ErrorKind::InvalidRank, "analysis.rank must lie in [1, d)");
  if (!(analysis.energy > 0.0 && analysis.energy < 1.0))
    throw Error(ErrorKind::InvalidInput, "analysis.energy must be in (0, 1)");
  if (!(analysis.lambda >= 0.0)) throw Error(ErrorKind::InvalidInput, "analysis.lambda must be >= 0");
  if (analysis.pairs_per_row < 1) throw Error(ErrorKind::InvalidInput, "analysis.pairs_per_row must be >= 1");
  if (!(analysis.projector_lr > 0.0)) throw Error(ErrorKind::InvalidInput, "analysis.projector_lr must be > 0");
  if (!(analysis.sigma_div >= 0.0)) throw Error(ErrorKind::InvalidInput, "analysis.sigma_div must be >= 0");
  if (robustness.trials < 1) throw Error(ErrorKind::InvalidInput, "robustness.trials must be >= 1");
  for (std::size_t i = 0; i < robustness.sigmas.size(); ++i) {
    if (!(robustness.sigmas[i] >= 0.0)) throw Error(ErrorKind::InvalidInput, "robustness.sigmas must be >= 0");
    if (i > 0 && !(robustness.sigmas[i] > robustness.sigmas[i - 1]))
      throw Error(ErrorKind::InvalidInput, "robustness.sigmas must be increasing");
  }
  if (ntk.d < 3) throw Error(ErrorKind::InvalidInput, "ntk.d must be >= 3");
  if (!(ntk.gamma > 0.0)) throw Error(ErrorKind::InvalidInput, "ntk.gamma must be > 0");
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  const IfmSpec& s = dataset.spec;
  j["dataset"] = {{"family", to_string(dataset.family)},
                  {"d", s.d},
                  {"gamma", s.gamma},
                  {"n_train", s.n_train},
                  {"n_val", s.n_val},
                  {"n_test", s.n_test},
                  {"num_nonlinear", s.num_nonlinear},
                  {"num_noise", s.num_noise},
                  {"jitter", s.jitter}};
  j["model"] = {{"regime", to_string(model.regime)}, {"width", model.width}};
  j["train"] = {{"steps", train.steps},
                {"batch_size", train.batch_size},
                {"peak_lr", train.peak_lr},
                {"momentum", train.momentum},
                {"weight_decay", train.weight_decay},
                {"warmup_frac", train.warmup_frac},
                {"eval_every", train.eval_every}};
  j["analysis"] = {{"rank", analysis.rank ? nlohmann::ordered_json(*analysis.rank) : nlohmann::ordered_json("auto")},
                   {"energy", analysis.energy},
                   {"lambda", analysis.lambda},
                   {"pairs_per_row", analysis.pairs_per_row},
                   {"projector_steps", analysis.projector_steps},
                   {"projector_lr", analysis.projector_lr},
                   {"projector_batch", analysis.projector_batch},
                   {"sigma_div", analysis.sigma_div}};
  j["robustness"] = {{"sigmas", robustness.sigmas}, {"trials", robustness.trials}};
  j["ntk"] = {{"d", ntk.d}, {"gamma", ntk.gamma}};
  return j;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

ExperimentConfig apply_json(const ExperimentConfig& base, const nlohmann::json& j) {
  ExperimentConfig c = base;
  check_keys(j, "", {"seed", "dataset", "model", "train", "analysis", "robustness", "ntk"});
  read(j, "seed", c.seed, "");
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    check_keys(d, "dataset.", {"family", "d", "gamma", "n_train", "n_val", "n_test", "num_nonlinear", "num_noise", "jitter"});
    c.dataset.family = parse_family(read_string(d, "family", to_string(c.dataset.family), "dataset."));
    IfmSpec& s = c.dataset.spec;
    read(d, "d", s.d, "dataset.");
    read(d, "gamma", s.gamma, "dataset.");
    read(d, "n_train", s.n_train, "dataset.");
    read(d, "n_val", s.n_val, "dataset.");
    read(d, "n_test", s.n_test, "dataset.");
    read(d, "num_nonlinear", s.num_nonlinear, "dataset.");
    read(d, "num_noise", s.num_noise, "dataset.");
    read(d, "jitter", s.jitter, "dataset.");
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model.", {"regime", "width"});
    c.model.regime = parse_regime(read_string(m, "regime", to_string(c.model.regime), "model."));
    read(m, "width", c.model.width, "model.");
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train.", {"steps", "batch_size", "peak_lr", "momentum", "weight_decay", "warmup_frac", "eval_every"});
    read(t, "steps", c.train.steps, "train.");
    read(t, "batch_size", c.train.batch_size, "train.");
    read(t, "peak_lr", c.train.peak_lr, "train.");
    read(t, "momentum", c.train.momentum, "train.");
    read(t, "weight_decay", c.train.weight_decay, "train.");
    read(t, "warmup_frac", c.train.warmup_frac, "train.");
    read(t, "eval_every", c.train.eval_every, "train.");
  }
  if (j.contains("analysis")) {
    const json& a = j["analysis"];
    check_keys(a, "analysis.", {"rank", "energy", "lambda", "pairs_per_row", "projector_steps", "projector_lr",
                                "projector_batch", "sigma_div"});
    if (a.contains("rank")) {
      const json& r = a["rank"];
      if (r.is_string() && r.get<std::string>() == "auto") {
        c.analysis.rank.reset();
      } else if (r.is_number_unsigned()) {
        c.analysis.rank = r.get<std::size_t>();
      } else {
        throw Error(ErrorKind::InvalidInput, "config: analysis.rank must be a positive integer or \"auto\"");
      }
    }
    read(a, "energy", c.analysis.energy, "analysis.");
    read(a, "lambda", c.analysis.lambda, "analysis.");
    read(a, "pairs_per_row", c.analysis.pairs_per_row, "analysis.");
    read(a, "projector_steps", c.analysis.projector_steps, "analysis.");
    read(a, "projector_lr", c.analysis.projector_lr, "analysis.");
    read(a, "projector_batch", c.analysis.projector_batch, "analysis.");
    read(a, "sigma_div", c.analysis.sigma_div, "analysis.");
  }
  if (j.contains("robustness")) {
    const json& r = j["robustness"];
    check_keys(r, "robustness.", {"sigmas", "trials"});
    if (r.contains("sigmas")) {
      if (!r["sigmas"].is_array()) throw Error(ErrorKind::InvalidInput, "config: robustness.sigmas must be an array");
      c.robustness.sigmas.clear();
      for (const auto& v : r["sigmas"]) {
        if (!v.is_number()) throw Error(ErrorKind::InvalidInput, "config: robustness.sigmas must hold numbers");
        c.robustness.sigmas.push_back(v.get<double>());
      }
    }
    read(r, "trials", c.robustness.trials, "robustness.");
  }
  if (j.contains("ntk")) {
    const json& n = j["ntk"];
    check_keys(n, "ntk.", {"d", "gamma"});
    read(n, "d", c.ntk.d, "ntk.");
    read(n, "gamma", c.ntk.gamma, "ntk.");
  }
  return c;
}

namespace {

std::string lr_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct GridEntry {
  std::string name;
  Regime regime;
  std::size_t lr, batch, wd;
};

std::vector<GridEntry> grid_entries() {
  std::vector<GridEntry> out;
  for (Regime r : {Regime::Rich, Regime::Lazy})
    for (std::size_t li = 0; li < 2; ++li)
      for (std::size_t bi = 0; bi < 2; ++bi)
        for (std::size_t wi = 0; wi < 2; ++wi) {
          const TrainConfig t = train_preset(r, li, bi, wi);
          out.push_back({to_string(r) + "-lr" + lr_label(t.peak_lr) + "-bs" + std::to_string(t.batch_size) + "-wd" +
                             lr_label(t.weight_decay),
                         r, li, bi, wi});
        }
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names{"ifm-basic", "ifm-lazy", "collage-xor", "collage-sphere"};
  for (const auto& g : grid_entries()) names.push_back(g.name);
  return names;
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "ifm-basic") return c;
  if (name == "ifm-lazy") {
    c.model.regime = Regime::Lazy;
    c.train = train_preset(Regime::Lazy);
    return c;
  }
  if (name == "collage-xor" || name == "collage-sphere") {
    c.dataset.family = name == "collage-xor" ? DatasetFamily::CollageXor : DatasetFamily::CollageSphere;
    c.dataset.spec.gamma = 1.0;
    c.dataset.spec.jitter = 0.0;
    c.train = train_preset(Regime::Rich, 0, 0, 1);
    return c;
  }
  for (const auto& g : grid_entries()) {
    if (g.name != name) continue;
    c.model.regime = g.regime;
    c.train = train_preset(g.regime, g.lr, g.batch, g.wd);
    return c;
  }
  throw Error(ErrorKind::InvalidInput, "unknown preset '" + name + "'");
}

std::uint64_t derived_seed(std::uint64_t master, const std::string& purpose) {
  return Rng(master).stream(purpose).next_u64();
}

}  // namespace ldsb::cli
