#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldsb/datasets.hpp"
#include "ldsb/linalg.hpp"
#include "ldsb/model.hpp"
#include "ldsb/rng.hpp"

namespace ldsb {

// Orthogonal projector P = Q Q^T onto a k-dimensional subspace of R^d, with
// complement P_perp = I - P. k = 0 is representable for test harnesses.
class Projector {
 public:
  // Q must have orthonormal columns (checked to 1e-10).
  explicit Projector(Matrix q);

  static Projector identity(std::size_t d);
  static Projector zero(std::size_t d);
  static Projector from_span(const Matrix& vectors);

  std::size_t d() const noexcept { return q_.rows(); }
  std::size_t k() const noexcept { return q_.cols(); }
  const Matrix& basis() const noexcept { return q_; }

  Vector apply(std::span<const double> x) const;
  Vector apply_perp(std::span<const double> x) const;
  Matrix apply_rows(const Matrix& X) const;
  Matrix apply_perp_rows(const Matrix& X) const;
  // Dense d x d matrix of P.
  Matrix matrix() const;

 private:
  Matrix q_;
};

struct SBReport {
  std::size_t rank_P = 0;
  double acc = 0.0;
  double pperp_ra = 0.0;
  double p_ra = 0.0;
  double pperp_lc = 0.0;
  double p_lc = 0.0;
  double effrank_W = 0.0;
  std::size_t num_pairs = 0;
  std::size_t skipped_pairs = 0;

  // Raw [0, 1] values plus x100 percentages rounded to two decimals.
  std::string to_json() const;
};

// exp(entropy) of the normalized squared singular values.
double effective_rank(const Matrix& M);
double effective_rank_from_singular_values(std::span<const double> s);

// sigma_i^2 / sum_j sigma_j^2 of the first-layer weights.
Vector singular_decay(const MLP& net);

// Top-k right singular vectors of W.
Projector top_subspace(const MLP& net, std::size_t k);

// Smallest k whose leading squared singular values hold `energy` of the total.
std::size_t auto_rank(const MLP& net, double energy = 0.99);
std::size_t auto_rank_from_singular_values(std::span<const double> s, double energy);

struct ProjectorOptions {
  std::size_t steps = 2000;
  double lr = 0.1;
  // 0 means full batch.
  std::size_t batch = 0;
  std::uint64_t seed = 0;
  // Start from a random orthonormal basis instead of the top singular
  // directions of W.
  bool random_init = false;
};

struct ProjectorFit {
  Projector P;
  double initial_objective = 0.0;
  double best_objective = 0.0;
  std::size_t best_step = 0;
  // Set when no iterate improved on the starting point.
  bool convergence_warning = false;
};

// (1/n) sum_i [ CE(f(P x_i), y_i) + lambda * CE(f(P_perp x_i), uniform) ].
double projector_objective(const MLP& net, const LabeledDataset& data, const Matrix& Q, double lambda);

// Minimizes projector_objective over rank-k projectors P = Q Q^T by gradient
// steps on Q (Grassmann gradient, cosine-decayed step) followed by
// re-orthonormalization. Returns the best iterate; `net` is read only.
ProjectorFit optimize_projector(const MLP& net, const LabeledDataset& data, std::size_t k, double lambda,
                                const ProjectorOptions& opt = {});

// Randomized-accuracy and logit-change metrics on mixed inputs
// P x1 + P_perp x2 over num_pairs i.i.d. uniform pairs.
SBReport mixing_metrics(const MLP& net, const LabeledDataset& data, const Projector& P, std::size_t num_pairs,
                        Rng& rng);

struct BoundaryGrid {
  std::size_t res = 0;
  double range = 0.0;
  Vector coords;            // res values in [-range, range]
  std::vector<int> labels;  // labels[i * res + j] at (coords[i], coords[j])

  int at(std::size_t i, std::size_t j) const { return labels[i * res + j]; }
  std::string to_csv() const;
};

// Predictions on base_point + u q1 + v q2 over a res x res grid.
BoundaryGrid boundary_grid(const MLP& net, const Projector& P2, double range, std::size_t res,
                           std::span<const double> base_point);

// Agreement between the network's decision rule restricted to the P2 plane
// and the best logistic-regression fit of that rule.
double linear_probe_nonlinearity(const MLP& net, const LabeledDataset& data, const Projector& P2);

}  // namespace ldsb
