#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ldsb/datasets.hpp"
#include "ldsb/model.hpp"
#include "ldsb/rng.hpp"
#include "ldsb/sb_analysis.hpp"
#include "ldsb/training.hpp"

namespace ldsb {

// Initialization stream used for every network trained from a config seed.
MLP init_from_seed(Regime regime, std::size_t m, std::size_t d, std::size_t c, std::uint64_t seed);

// Rows replaced by P_perp x.
LabeledDataset project_out(const LabeledDataset& data, const Projector& P);

struct OrthoPResult {
  MLP f_proj;
  Projector P;
  TrainLog log;
};

// P = top_subspace(f, k), with k = auto_rank(f) when `rank` is empty. f_proj
// has f's width and regime, a fresh initialization from config.seed, and is
// trained on P_perp x. The returned network has W P_perp as its first layer,
// so it takes raw inputs. The caller supplies a seed different from f's.
OrthoPResult orthop_train(const MLP& f, const LabeledDataset& data, std::optional<std::size_t> rank,
                          const TrainConfig& config, const LabeledDataset* val = nullptr);

struct DiversityReport {
  double mist_div = 0.0;
  double cc_logit_corr = 0.0;
  bool degenerate_flag = false;

  std::string to_json() const;
};

struct MistakeDiversity {
  double value = 0.0;
  bool degenerate = false;
};

// 1 - |both wrong| / min(|f wrong|, |g wrong|); 0 and flagged when either
// model makes no mistakes.
MistakeDiversity mistake_diversity(const MLP& f, const MLP& g, const LabeledDataset& data);
MistakeDiversity mistake_diversity(std::span<const int> pred_f, std::span<const int> pred_g,
                                   std::span<const int> y);

struct LogitCorrelation {
  double value = 0.0;
  bool degenerate = false;
};

// Per class, Pearson correlation of each logit coordinate between the two
// models, averaged over coordinates and then over classes. Coordinates with
// zero variance are skipped.
LogitCorrelation cc_logit_corr(const MLP& f, const MLP& g, const LabeledDataset& data);
LogitCorrelation cc_logit_corr(const Matrix& logits_f, const Matrix& logits_g, std::span<const int> y,
                               int num_classes);

DiversityReport diversity_report(const MLP& f, const MLP& g, const LabeledDataset& data);

// argmax of the averaged logits, ties toward the smaller index.
std::vector<int> ensemble_predict(const MLP& f, const MLP& g, const Matrix& X);


struct RobustnessCurve {
  Vector sigmas;
  std::vector<std::string> models;
  // accuracy[s][j]: sigma index s, model index j.
  std::vector<std::vector<double>> accuracy;

  double at(double sigma, const std::string& model) const;
  std::string to_csv() const;
};

// Evaluates f, f_ind, f_proj and the ensembles ens(f, f_ind), ens(f, f_proj)
// on X + sigma N(0, I), averaged over trials. Trial t at sigma index s draws
// its noise from substream (s, t) of `rng`, shared by all models.
RobustnessCurve robustness_sweep(const MLP& f, const MLP& f_ind, const MLP& f_proj, const LabeledDataset& data,
                                 const Vector& sigmas, std::size_t trials, const Rng& rng);

}  // namespace ldsb
