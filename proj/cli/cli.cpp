#include "ldsb/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ldsb/datasets.hpp"
#include "ldsb/error.hpp"
#include "ldsb/experiment_config.hpp"
#include "ldsb/io.hpp"
#include "ldsb/model.hpp"
#include "ldsb/ntk_verify.hpp"
#include "ldsb/orthop.hpp"
#include "ldsb/sb_analysis.hpp"
#include "ldsb/training.hpp"

#ifndef LDSB_VERSION
#define LDSB_VERSION "0.0.0"
#endif

namespace ldsb::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Flags {
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<std::string> config;
  std::optional<std::string> data;
  std::optional<std::string> val;
  std::optional<std::string> fit_data;
  std::optional<std::string> checkpoint;
  std::optional<std::string> ind;
  std::optional<std::string> proj;
  std::optional<std::string> regime;
  std::optional<std::string> rank;
  std::optional<double> lambda;
  std::optional<std::string> sigmas;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> d;
  std::optional<double> gamma;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> width;
  std::optional<double> lr;
};

Vector parse_sigmas(const std::string& text) {
  Vector out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size())
      throw Error(ErrorKind::InvalidInput, "--sigmas: bad number '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidInput, "--sigmas: empty list");
  return out;
}

ExperimentConfig resolve_config(const Flags& f, bool ntk_command) {
  std::string name = "ifm-basic";
  if (f.preset) {
    name = *f.preset;
  } else if (f.regime && *f.regime == "lazy") {
    name = "ifm-lazy";
  }
  ExperimentConfig c = preset(name);
  if (f.config) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(*f.config));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidInput, "config: " + std::string(e.what()));
    }
    c = apply_json(c, j);
  }
  if (f.seed) c.seed = *f.seed;
  if (f.regime) c.model.regime = parse_regime(*f.regime);
  if (f.rank) {
    if (*f.rank == "auto") {
      c.analysis.rank.reset();
    } else {
      try {
        std::size_t pos = 0;
        const long long k = std::stoll(*f.rank, &pos);
        if (pos != f.rank->size() || k < 1) throw std::invalid_argument("");
        c.analysis.rank = static_cast<std::size_t>(k);
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidInput, "--rank must be a positive integer or 'auto'");
      }
    }
  }
  if (f.lambda) c.analysis.lambda = *f.lambda;
  if (f.sigmas) c.robustness.sigmas = parse_sigmas(*f.sigmas);
  if (f.trials) c.robustness.trials = *f.trials;
  if (ntk_command) {
    if (f.d) c.ntk.d = *f.d;
    if (f.gamma) c.ntk.gamma = *f.gamma;
  } else {
    if (f.d) {
      IfmSpec& s = c.dataset.spec;
      if (*f.d < 2 + s.num_noise) throw Error(ErrorKind::InvalidSpec, "--d too small for the noise block");
      s.d = *f.d;
      s.num_nonlinear = *f.d - 1 - s.num_noise;
    }
    if (f.gamma) c.dataset.spec.gamma = *f.gamma;
  }
  if (f.steps) c.train.steps = *f.steps;
  if (f.width) c.model.width = *f.width;
  if (f.lr) c.train.peak_lr = *f.lr;
  c.dataset.spec.seed = c.seed;
  c.train.seed = c.seed;
  c.validate();
  return c;
}

DatasetSplits generate(const ExperimentConfig& c) {
  switch (c.dataset.family) {
    case DatasetFamily::Ifm: return gen_ifm_splits(c.dataset.spec);
    case DatasetFamily::CollageXor: return gen_collage_splits(c.dataset.spec, CollagePattern::Xor);
    case DatasetFamily::CollageSphere: return gen_collage_splits(c.dataset.spec, CollagePattern::Sphere);
  }
  throw Error(ErrorKind::InternalInconsistency, "unreachable dataset family");
}

// Lazily generated splits shared by the commands that fall back to the
// configured dataset when no file is given.
class DataSource {
 public:
  explicit DataSource(const ExperimentConfig& c) : config_(c) {}

  const DatasetSplits& splits() {
    if (!splits_) splits_ = generate(config_);
    return *splits_;
  }
  LabeledDataset train(const std::optional<std::string>& path) {
    return path ? load_dataset(*path) : splits().train;
  }
  LabeledDataset test(const std::optional<std::string>& path) { return path ? load_dataset(*path) : splits().test; }
  std::optional<LabeledDataset> val(const std::optional<std::string>& path) {
    if (path) return load_dataset(*path);
    if (splits().val.n() == 0) return std::nullopt;
    return splits().val;
  }

 private:
  const ExperimentConfig& config_;
  std::optional<DatasetSplits> splits_;
};

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& contents) {
    write_file_atomic(dir_ / name, contents);
    files_.push_back(name);
  }
  void manifest(const std::string& command, const ExperimentConfig& c, const ojson& inputs, const ojson& summary) {
    ojson m;
    m["tool"] = "ldsb";
    m["version"] = LDSB_VERSION;
    m["command"] = command;
    m["config_hash"] = c.hash();
    m["config"] = c.to_json();
    m["inputs"] = inputs;
    m["outputs"] = files_;
    m["summary"] = summary;
    write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string projector_json(const Projector& P) {
  ojson j;
  j["d"] = P.d();
  j["k"] = P.k();
  ojson cols = ojson::array();
  for (std::size_t c = 0; c < P.k(); ++c) cols.push_back(P.basis().col(c));
  j["basis_columns"] = cols;
  return j.dump(2) + "\n";
}

std::string spectrum_csv(const MLP& net) {
  const Vector s = singular_values(net.W);
  const Vector frac = singular_decay(net);
  std::string out = "index,singular_value,energy_fraction\n";
  char buf[96];
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, s[i], frac[i]);
    out += buf;
  }
  return out;
}

MLP fresh_model(const ExperimentConfig& c, const LabeledDataset& data, std::uint64_t seed) {
  return init_from_seed(c.model.regime, c.model.width, data.d(), static_cast<std::size_t>(data.num_classes), seed);
}

TrainResult train_logged(Writer& w, const std::string& log_name, const MLP& init, const LabeledDataset& data,
                         const TrainConfig& tc, const LabeledDataset* val) {
  try {
    return train(init, data, tc, val);
  } catch (const DivergenceError& e) {
    w.write(log_name, e.log().to_csv());
    throw;
  }
}

struct AnalysisOutput {
  Projector P;
  SBReport report;
};

AnalysisOutput analyze_model(const ExperimentConfig& c, const MLP& net, Regime regime, const LabeledDataset& fit,
                             const LabeledDataset& eval) {
  const std::size_t k = c.analysis.rank ? *c.analysis.rank : auto_rank(net, c.analysis.energy);
  Projector P = Projector::zero(net.d());
  if (regime == Regime::Rich) {
    P = top_subspace(net, k);
  } else {
    ProjectorOptions po;
    po.steps = c.analysis.projector_steps;
    po.lr = c.analysis.projector_lr;
    po.batch = c.analysis.projector_batch;
    po.seed = c.seed;
    P = optimize_projector(net, fit, k, c.analysis.lambda, po).P;
  }
  Rng rng = Rng(c.seed).stream("mixing");
  SBReport rep = mixing_metrics(net, eval, P, c.analysis.pairs_per_row * eval.n(), rng);
  return {std::move(P), rep};
}

void write_analysis_extras(Writer& w, const MLP& net, const LabeledDataset& eval) {
  w.write("spectrum.csv", spectrum_csv(net));
  if (net.d() < 2) return;
  const Projector P2 = top_subspace(net, 2);
  Vector mean(net.d(), 0.0);
  for (std::size_t i = 0; i < eval.n(); ++i)
    for (std::size_t t = 0; t < eval.d(); ++t) mean[t] += eval.X(i, t) / static_cast<double>(eval.n());
  const BoundaryGrid grid = boundary_grid(net, P2, 3.0, 41, P2.apply_perp(mean));
  w.write("boundary.csv", grid.to_csv());
  ojson plane;
  plane["range"] = 3.0;
  plane["resolution"] = 41;
  try {
    plane["linear_probe_agreement"] = linear_probe_nonlinearity(net, eval, P2);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateLabels) throw;
    plane["linear_probe_agreement"] = nullptr;
  }
  w.write("plane.json", plane.dump(2) + "\n");
}

LabeledDataset noisy_copy(const LabeledDataset& data, double sigma, std::uint64_t seed) {
  LabeledDataset out = data;
  Rng rng = Rng(seed).stream("diversity");
  for (double& v : out.X.data()) v += sigma * rng.normal();
  return out;
}

std::string diversity_json(const MLP& f, const MLP& f_ind, const MLP& f_proj, const LabeledDataset& data,
                           double sigma_div) {
  ojson j;
  j["sigma_div"] = sigma_div;
  j["f_proj"] = ojson::parse(diversity_report(f, f_proj, data).to_json());
  j["f_ind"] = ojson::parse(diversity_report(f, f_ind, data).to_json());
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

int cmd_gen(const Flags& fl, std::ostream& out) {
  const ExperimentConfig c = resolve_config(fl, false);
  const DatasetSplits s = generate(c);
  Writer w(fl.out);
  w.write("train.csv", serialize_dataset(s.train));
  if (s.val.n() > 0) w.write("val.csv", serialize_dataset(s.val));
  w.write("test.csv", serialize_dataset(s.test));
  ojson meta = c.to_json()["dataset"];
  meta["seed"] = c.seed;
  meta["rows"] = {{"train", s.train.n()}, {"val", s.val.n()}, {"test", s.test.n()}};
  w.write("meta.json", meta.dump(2) + "\n");
  w.manifest("gen", c, ojson::object(), meta["rows"]);
  out << "gen: " << to_string(c.dataset.family) << " d=" << c.dataset.spec.d << " rows " << s.train.n() << "/"
      << s.val.n() << "/" << s.test.n() << " -> " << fl.out << "\n";
  return 0;
}

int cmd_train(const Flags& fl, std::ostream& out) {
  const ExperimentConfig c = resolve_config(fl, false);
  DataSource src(c);
  const LabeledDataset data = src.train(fl.data);
  const std::optional<LabeledDataset> val = src.val(fl.val);
  Writer w(fl.out);
  const TrainResult r =
      train_logged(w, "train_log.csv", fresh_model(c, data, c.seed), data, c.train, val ? &*val : nullptr);
  w.write("checkpoint.json", serialize_checkpoint(r.net));
  w.write("train_log.csv", r.log.to_csv());
  const TrainRecord& first = r.log.records.front();
  const TrainRecord& last = r.log.records.back();
  ojson summary{{"train_acc", last.train_acc},
                {"val_acc", last.val_acc},
                {"effrank_initial", first.effrank_W},
                {"effrank_final", last.effrank_W}};
  w.manifest("train", c, {{"data", fl.data ? *fl.data : "generated"}}, summary);
  out << "train: " << to_string(c.model.regime) << " acc=" << fmt(last.train_acc) << " val=" << fmt(last.val_acc)
      << " effrank " << fmt(first.effrank_W) << "->" << fmt(last.effrank_W) << " -> " << fl.out << "\n";
  return 0;
}

int cmd_analyze(const Flags& fl, std::ostream& out) {
  if (!fl.checkpoint) throw Error(ErrorKind::InvalidInput, "analyze: --checkpoint is required");
  const ExperimentConfig c = resolve_config(fl, false);
  const MLP net = load_checkpoint(*fl.checkpoint);
  DataSource src(c);
  const LabeledDataset eval = src.test(fl.data);
  const LabeledDataset fit = fl.fit_data ? load_dataset(*fl.fit_data) : (fl.data ? eval : src.splits().train);
  const Regime regime = fl.regime ? parse_regime(*fl.regime) : net.regime;
  const AnalysisOutput a = analyze_model(c, net, regime, fit, eval);
  Writer w(fl.out);
  w.write("sb_report.json", a.report.to_json());
  w.write("projector.json", projector_json(a.P));
  write_analysis_extras(w, net, eval);
  w.manifest("analyze", c, {{"checkpoint", *fl.checkpoint}, {"data", fl.data ? *fl.data : "generated"}},
             ojson::parse(a.report.to_json()));
  out << "analyze: k=" << a.report.rank_P << " acc=" << fmt(a.report.acc) << " pperp_ra=" << fmt(a.report.pperp_ra)
      << " p_ra=" << fmt(a.report.p_ra) << " pperp_lc=" << fmt(a.report.pperp_lc) << " p_lc=" << fmt(a.report.p_lc)
      << " -> " << fl.out << "\n";
  return 0;
}

int cmd_orthop(const Flags& fl, std::ostream& out) {
  if (!fl.checkpoint) throw Error(ErrorKind::InvalidInput, "orthop: --checkpoint is required");
  const ExperimentConfig c = resolve_config(fl, false);
  const MLP f = load_checkpoint(*fl.checkpoint);
  DataSource src(c);
  const LabeledDataset data = src.train(fl.data);
  const std::optional<LabeledDataset> val = src.val(fl.val);
  TrainConfig tc = c.train;
  tc.seed = derived_seed(c.seed, "f_proj");
  Writer w(fl.out);
  const OrthoPResult r = orthop_train(f, data, c.analysis.rank, tc, val ? &*val : nullptr);
  w.write("f_proj.json", serialize_checkpoint(r.f_proj));
  w.write("f_proj_log.csv", r.log.to_csv());
  w.write("projector.json", projector_json(r.P));
  const TrainRecord& last = r.log.records.back();
  w.manifest("orthop", c, {{"checkpoint", *fl.checkpoint}, {"data", fl.data ? *fl.data : "generated"}},
             {{"rank", r.P.k()}, {"train_acc", last.train_acc}, {"val_acc", last.val_acc}});
  out << "orthop: k=" << r.P.k() << " f_proj acc=" << fmt(last.train_acc) << " val=" << fmt(last.val_acc) << " -> "
      << fl.out << "\n";
  return 0;
}

int cmd_robustness(const Flags& fl, std::ostream& out) {
  if (!fl.checkpoint || !fl.ind || !fl.proj)
    throw Error(ErrorKind::InvalidInput, "robustness: --checkpoint, --ind and --proj are required");
  const ExperimentConfig c = resolve_config(fl, false);
  const MLP f = load_checkpoint(*fl.checkpoint);
  const MLP f_ind = load_checkpoint(*fl.ind);
  const MLP f_proj = load_checkpoint(*fl.proj);
  DataSource src(c);
  const LabeledDataset test = src.test(fl.data);
  const RobustnessCurve curve =
      robustness_sweep(f, f_ind, f_proj, test, c.robustness.sigmas, c.robustness.trials, Rng(c.seed).stream("robustness"));
  Writer w(fl.out);
  w.write("robustness.csv", curve.to_csv());
  const std::string div =
      diversity_json(f, f_ind, f_proj, noisy_copy(test, c.analysis.sigma_div, c.seed), c.analysis.sigma_div);
  w.write("diversity.json", div);
  w.manifest("robustness", c,
             {{"checkpoint", *fl.checkpoint}, {"ind", *fl.ind}, {"proj", *fl.proj}, {"data", fl.data ? *fl.data : "generated"}},
             ojson::parse(div));
  out << "robustness: " << curve.sigmas.size() << " sigmas x " << c.robustness.trials << " trials -> " << fl.out << "\n";
  return 0;
}

int cmd_ntk(const Flags& fl, std::ostream& out) {
  const ExperimentConfig c = resolve_config(fl, true);
  const NTKReport r = ntk_report(c.ntk.d, c.ntk.gamma);
  Writer w(fl.out);
  w.write("ntk_report.json", r.to_json());
  w.manifest("ntk", c, ojson::object(), ojson::parse(r.to_json()));
  out << "ntk: d=" << r.d << " gamma=" << r.gamma << " xi=" << fmt(r.xi) << " neg(0)=" << r.neg_at_0
      << " neg(0.73)=" << r.neg_at_073 << " -> " << fl.out << "\n";
  return 0;
}

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::InternalInconsistency, std::string("stage ") + name + ": " + e.what());
  }
}

int cmd_pipeline(const Flags& fl, std::ostream& out) {
  const ExperimentConfig c = resolve_config(fl, false);
  Writer w(fl.out);
  DataSource src(c);
  const DatasetSplits& s = stage("gen", [&]() -> const DatasetSplits& { return src.splits(); });
  w.write("train.csv", serialize_dataset(s.train));
  if (s.val.n() > 0) w.write("val.csv", serialize_dataset(s.val));
  w.write("test.csv", serialize_dataset(s.test));
  const LabeledDataset* val = s.val.n() > 0 ? &s.val : nullptr;

  const TrainResult f = stage("train", [&] {
    return train_logged(w, "f_log.csv", fresh_model(c, s.train, c.seed), s.train, c.train, val);
  });
  w.write("f.json", serialize_checkpoint(f.net));
  w.write("f_log.csv", f.log.to_csv());

  const AnalysisOutput a = stage("analyze", [&] {
    AnalysisOutput r = analyze_model(c, f.net, c.model.regime, s.train, s.test);
    w.write("sb_report.json", r.report.to_json());
    w.write("projector.json", projector_json(r.P));
    write_analysis_extras(w, f.net, s.test);
    return r;
  });

  TrainConfig second = c.train;
  second.seed = derived_seed(c.seed, "f_proj");
  const OrthoPResult op = stage("orthop", [&] { return orthop_train(f.net, s.train, c.analysis.rank, second, val); });
  w.write("f_proj.json", serialize_checkpoint(op.f_proj));
  w.write("f_proj_log.csv", op.log.to_csv());
  w.write("orthop_projector.json", projector_json(op.P));

  TrainConfig ind = c.train;
  ind.seed = derived_seed(c.seed, "f_ind");
  const TrainResult fi = stage("independent", [&] {
    return train_logged(w, "f_ind_log.csv", fresh_model(c, s.train, ind.seed), s.train, ind, val);
  });
  w.write("f_ind.json", serialize_checkpoint(fi.net));
  w.write("f_ind_log.csv", fi.log.to_csv());

  const std::string div = stage("diversity", [&] {
    return diversity_json(f.net, fi.net, op.f_proj, noisy_copy(s.test, c.analysis.sigma_div, c.seed), c.analysis.sigma_div);
  });
  w.write("diversity.json", div);

  const RobustnessCurve curve = stage("robustness", [&] {
    return robustness_sweep(f.net, fi.net, op.f_proj, s.test, c.robustness.sigmas, c.robustness.trials,
                            Rng(c.seed).stream("robustness"));
  });
  w.write("robustness.csv", curve.to_csv());

  ojson summary;
  summary["test_acc"] = {{"f", evaluate(f.net, s.test)}, {"f_ind", evaluate(fi.net, s.test)}, {"f_proj", evaluate(op.f_proj, s.test)}};
  summary["sb_report"] = ojson::parse(a.report.to_json());
  summary["diversity"] = ojson::parse(div);
  w.manifest("pipeline", c, ojson::object(), summary);
  out << "pipeline: " << to_string(c.dataset.family) << " " << to_string(c.model.regime)
      << " acc f=" << fmt(summary["test_acc"]["f"].get<double>())
      << " f_proj=" << fmt(summary["test_acc"]["f_proj"].get<double>()) << " pperp_ra=" << fmt(a.report.pperp_ra)
      << " p_ra=" << fmt(a.report.p_ra) << " -> " << fl.out << "\n";
  return 0;
}

bool is_validation(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput:
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidRank:
    case ErrorKind::ParseError:
      return true;
    default:
      return false;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-dimensional simplicity bias experiments", "ldsb"};
  app.require_subcommand(1);
  Flags fl;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", fl.out, "Output directory");
    sub->add_option("--seed", fl.seed, "Master seed");
    sub->add_option("--preset", fl.preset, "Named preset");
    sub->add_option("--config", fl.config, "JSON config file");
    sub->add_option("--regime", fl.regime, "rich or lazy")->check(CLI::IsMember({"rich", "lazy"}));
    sub->add_option("--steps", fl.steps, "Training steps");
    sub->add_option("--width", fl.width, "Hidden width");
    sub->add_option("--lr", fl.lr, "Peak learning rate");
    sub->add_option("--d", fl.d, "Input dimension");
    sub->add_option("--gamma", fl.gamma, "Linear margin");
  };
  auto data_opts = [&](CLI::App* sub) {
    sub->add_option("--data", fl.data, "Dataset CSV");
    sub->add_option("--val", fl.val, "Validation dataset CSV");
  };
  auto analysis_opts = [&](CLI::App* sub) {
    sub->add_option("--rank", fl.rank, "Projector rank K or 'auto'");
    sub->add_option("--lambda", fl.lambda, "Complement weight of the projector objective");
  };
  auto sweep_opts = [&](CLI::App* sub) {
    sub->add_option("--sigmas", fl.sigmas, "Comma-separated noise levels");
    sub->add_option("--trials", fl.trials, "Noise draws per level");
  };

  CLI::App* gen = app.add_subcommand("gen", "Generate dataset splits");
  common(gen);
  CLI::App* trn = app.add_subcommand("train", "Train a network");
  common(trn);
  data_opts(trn);
  CLI::App* ana = app.add_subcommand("analyze", "Projector and mixing metrics");
  common(ana);
  data_opts(ana);
  analysis_opts(ana);
  ana->add_option("--checkpoint", fl.checkpoint, "Network checkpoint");
  ana->add_option("--fit-data", fl.fit_data, "Dataset for the projector fit");
  CLI::App* orp = app.add_subcommand("orthop", "Train on the complement of the dominant subspace");
  common(orp);
  data_opts(orp);
  analysis_opts(orp);
  orp->add_option("--checkpoint", fl.checkpoint, "First-stage checkpoint");
  CLI::App* rob = app.add_subcommand("robustness", "Noise sweep and diversity");
  common(rob);
  data_opts(rob);
  sweep_opts(rob);
  rob->add_option("--checkpoint", fl.checkpoint, "Checkpoint of f");
  rob->add_option("--ind", fl.ind, "Checkpoint of the independent model");
  rob->add_option("--proj", fl.proj, "Checkpoint of the projected model");
  CLI::App* ntk = app.add_subcommand("ntk", "Kernel closed-form report");
  common(ntk);
  CLI::App* pip = app.add_subcommand("pipeline", "Train, analyze, OrthoP, diversity and robustness");
  common(pip);
  analysis_opts(pip);
  sweep_opts(pip);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return 0;
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return 1;
  }

  try {
    if (*gen) return cmd_gen(fl, out);
    if (*trn) return cmd_train(fl, out);
    if (*ana) return cmd_analyze(fl, out);
    if (*orp) return cmd_orthop(fl, out);
    if (*rob) return cmd_robustness(fl, out);
    if (*ntk) return cmd_ntk(fl, out);
    if (*pip) return cmd_pipeline(fl, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation(e.kind()) ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace ldsb::cli
