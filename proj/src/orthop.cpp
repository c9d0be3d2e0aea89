#include "ldsb/orthop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "ldsb/error.hpp"

namespace ldsb {

MLP init_from_seed(Regime regime, std::size_t m, std::size_t d, std::size_t c, std::uint64_t seed) {
  Rng rng = Rng(seed).stream("init");
  return init_network(regime, m, d, c, rng);
}

LabeledDataset project_out(const LabeledDataset& data, const Projector& P) {
  return data.with_features(P.apply_perp_rows(data.X));
}

OrthoPResult orthop_train(const MLP& f, const LabeledDataset& data, std::optional<std::size_t> rank,
                          const TrainConfig& config, const LabeledDataset* val) {
  f.validate();
  const std::size_t k = rank ? *rank : auto_rank(f);
  Projector P = top_subspace(f, k);
  const LabeledDataset proj = project_out(data, P);
  std::optional<LabeledDataset> proj_val;
  if (val) proj_val = project_out(*val, P);
  MLP init = init_from_seed(f.regime, f.m(), f.d(), f.c(), config.seed);
  TrainResult r = train(init, proj, config, proj_val ? &*proj_val : nullptr);
  // Fold P_perp into the first layer so f_proj(x) = g(P_perp x) on raw inputs.
  Matrix WQ = matmul(r.net.W, P.basis());
  r.net.W -= matmul_nt(WQ, P.basis());
  return {std::move(r.net), std::move(P), std::move(r.log)};
}

// ---------------------------------------------------------------------------

std::string DiversityReport::to_json() const {
  nlohmann::ordered_json j;
  j["mist_div"] = mist_div;
  j["cc_logit_corr"] = cc_logit_corr;
  j["degenerate_flag"] = degenerate_flag;
  j["percent"] = {{"mist_div", std::round(mist_div * 10000.0) / 100.0},
                  {"cc_logit_corr", std::round(cc_logit_corr * 10000.0) / 100.0}};
  return j.dump(2) + "\n";
}

MistakeDiversity mistake_diversity(std::span<const int> pred_f, std::span<const int> pred_g,
                                   std::span<const int> y) {
  if (pred_f.size() != y.size() || pred_g.size() != y.size())
    throw Error(ErrorKind::ShapeError, "mistake_diversity: length mismatch");
  std::size_t wf = 0, wg = 0, both = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool ef = pred_f[i] != y[i];
    const bool eg = pred_g[i] != y[i];
    wf += ef;
    wg += eg;
    both += ef && eg;
  }
  const std::size_t lo = std::min(wf, wg);
  if (lo == 0) return {0.0, true};
  return {1.0 - static_cast<double>(both) / static_cast<double>(lo), false};
}

MistakeDiversity mistake_diversity(const MLP& f, const MLP& g, const LabeledDataset& data) {
  return mistake_diversity(predict(f, data.X), predict(g, data.X), data.y);
}

LogitCorrelation cc_logit_corr(const Matrix& lf, const Matrix& lg, std::span<const int> y, int num_classes) {
  if (lf.rows() != y.size() || lg.rows() != y.size() || lf.cols() != lg.cols())
    throw Error(ErrorKind::ShapeError, "cc_logit_corr: shape mismatch");
  const std::size_t c = lf.cols();
  double class_sum = 0.0;
  std::size_t class_count = 0;
  for (int cls = 0; cls < num_classes; ++cls) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) rows.push_back(i);
    if (rows.size() < 3)
      throw Error(ErrorKind::InsufficientData, "cc_logit_corr: class " + std::to_string(cls) + " has fewer than 3 samples");
    const double nr = static_cast<double>(rows.size());
    double coord_sum = 0.0;
    std::size_t coord_count = 0;
    for (std::size_t j = 0; j < c; ++j) {
      double mf = 0.0, mg = 0.0;
      for (std::size_t i : rows) {
        mf += lf(i, j);
        mg += lg(i, j);
      }
      mf /= nr;
      mg /= nr;
      double sff = 0.0, sgg = 0.0, sfg = 0.0;
      for (std::size_t i : rows) {
        const double a = lf(i, j) - mf;
        const double b = lg(i, j) - mg;
        sff += a * a;
        sgg += b * b;
        sfg += a * b;
      }
      if (!(sff > 0.0) || !(sgg > 0.0)) continue;
      coord_sum += std::clamp(sfg / std::sqrt(sff * sgg), -1.0, 1.0);
      ++coord_count;
    }
    if (coord_count == 0) continue;
    class_sum += coord_sum / static_cast<double>(coord_count);
    ++class_count;
  }
  if (class_count == 0) return {0.0, true};
  return {class_sum / static_cast<double>(class_count), false};
}

LogitCorrelation cc_logit_corr(const MLP& f, const MLP& g, const LabeledDataset& data) {
  return cc_logit_corr(forward(f, data.X), forward(g, data.X), data.y, data.num_classes);
}

DiversityReport diversity_report(const MLP& f, const MLP& g, const LabeledDataset& data) {
  const MistakeDiversity md = mistake_diversity(f, g, data);
  const LogitCorrelation lc = cc_logit_corr(f, g, data);
  return {md.value, lc.value, md.degenerate || lc.degenerate};
}

namespace {

std::vector<int> ensemble_from_logits(Matrix lf, const Matrix& lg) {
  lf += lg;
  lf *= 0.5;
  return argmax_rows(lf);
}

double accuracy(std::span<const int> pred, std::span<const int> y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += pred[i] == y[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

}  // namespace

std::vector<int> ensemble_predict(const MLP& f, const MLP& g, const Matrix& X) {
  if (f.c() != g.c() || f.d() != g.d()) throw Error(ErrorKind::ShapeError, "ensemble_predict: models differ in shape");
  return ensemble_from_logits(forward(f, X), forward(g, X));
}

// ---------------------------------------------------------------------------

double RobustnessCurve::at(double sigma, const std::string& model) const {
  const auto mi = std::find(models.begin(), models.end(), model);
  const auto si = std::find(sigmas.begin(), sigmas.end(), sigma);
  if (mi == models.end() || si == sigmas.end()) throw Error(ErrorKind::InvalidInput, "RobustnessCurve: no such cell");
  return accuracy[static_cast<std::size_t>(si - sigmas.begin())][static_cast<std::size_t>(mi - models.begin())];
}

std::string RobustnessCurve::to_csv() const {
  std::ostringstream out;
  out << "sigma,model,accuracy\n";
  char buf[160];
  for (std::size_t s = 0; s < sigmas.size(); ++s)
    for (std::size_t j = 0; j < models.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g\n", sigmas[s], models[j].c_str(), accuracy[s][j]);
      out << buf;
    }
  return out.str();
}

RobustnessCurve robustness_sweep(const MLP& f, const MLP& f_ind, const MLP& f_proj, const LabeledDataset& data,
                                 const Vector& sigmas, std::size_t trials, const Rng& rng) {
  if (trials < 1) throw Error(ErrorKind::InvalidInput, "robustness_sweep: trials must be >= 1");
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    if (!(sigmas[s] >= 0.0) || !std::isfinite(sigmas[s]))
      throw Error(ErrorKind::InvalidInput, "robustness_sweep: sigmas must be finite and nonnegative");
    if (s > 0 && !(sigmas[s] > sigmas[s - 1]))
      throw Error(ErrorKind::InvalidInput, "robustness_sweep: sigmas must be increasing");
  }
  if (data.n() == 0) throw Error(ErrorKind::InvalidInput, "robustness_sweep: empty dataset");

  RobustnessCurve curve;
  curve.sigmas = sigmas;
  curve.models = {"f", "f_ind", "f_proj", "ens_f_f_ind", "ens_f_f_proj"};
  curve.accuracy.assign(sigmas.size(), std::vector<double>(curve.models.size(), 0.0));

  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    const std::size_t reps = sigmas[s] == 0.0 ? 1 : trials;
    for (std::size_t t = 0; t < reps; ++t) {
      Matrix X = data.X;
      if (sigmas[s] > 0.0) {
        Rng cell = rng.substream(s).substream(t);
        for (double& v : X.data()) v += sigmas[s] * cell.normal();
      }
      const Matrix lf = forward(f, X);
      const Matrix li = forward(f_ind, X);
      const Matrix lp = forward(f_proj, X);
      const double acc[5] = {accuracy(argmax_rows(lf), data.y), accuracy(argmax_rows(li), data.y),
                             accuracy(argmax_rows(lp), data.y), accuracy(ensemble_from_logits(lf, li), data.y),
                             accuracy(ensemble_from_logits(lf, lp), data.y)};
      for (std::size_t j = 0; j < 5; ++j) curve.accuracy[s][j] += acc[j] / static_cast<double>(reps);
    }
  }
  return curve;
}

}  // namespace ldsb
