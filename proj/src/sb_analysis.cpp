#include "ldsb/sb_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "ldsb/error.hpp"
#include "ldsb/training.hpp"

namespace ldsb {

Projector::Projector(Matrix q) : q_(std::move(q)) {
  if (q_.rows() == 0) throw Error(ErrorKind::InvalidInput, "Projector: d must be >= 1");
  if (q_.cols() > q_.rows()) throw Error(ErrorKind::InvalidRank, "Projector: k exceeds d");
  if (!q_.all_finite()) throw Error(ErrorKind::InvalidInput, "Projector: non-finite basis");
  const Matrix gram = matmul_tn(q_, q_);
  for (std::size_t i = 0; i < gram.rows(); ++i)
    for (std::size_t j = 0; j < gram.cols(); ++j)
      if (std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)) > 1e-10)
        throw Error(ErrorKind::DegenerateBasis, "Projector: basis columns are not orthonormal");
}

Projector Projector::identity(std::size_t d) { return Projector(Matrix::identity(d)); }
Projector Projector::zero(std::size_t d) { return Projector(Matrix(d, 0)); }
Projector Projector::from_span(const Matrix& vectors) { return Projector(orthonormalize(vectors)); }

Vector Projector::apply(std::span<const double> x) const {
  if (x.size() != d()) throw Error(ErrorKind::ShapeError, "Projector: vector length differs from d");
  Vector coeff(k(), 0.0);
  for (std::size_t i = 0; i < d(); ++i)
    for (std::size_t j = 0; j < k(); ++j) coeff[j] += q_(i, j) * x[i];
  Vector out(d(), 0.0);
  for (std::size_t i = 0; i < d(); ++i)
    for (std::size_t j = 0; j < k(); ++j) out[i] += q_(i, j) * coeff[j];
  return out;
}

Vector Projector::apply_perp(std::span<const double> x) const {
  Vector p = apply(x);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] - p[i];
  return p;
}

Matrix Projector::apply_rows(const Matrix& X) const {
  if (X.cols() != d()) throw Error(ErrorKind::ShapeError, "Projector: row length differs from d");
  Matrix out(X.rows(), d());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const Vector p = apply(X.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

Matrix Projector::apply_perp_rows(const Matrix& X) const {
  Matrix out = apply_rows(X);
  for (std::size_t t = 0; t < out.size(); ++t) out.data()[t] = X.data()[t] - out.data()[t];
  return out;
}

Matrix Projector::matrix() const { return matmul_nt(q_, q_); }

// ---------------------------------------------------------------------------

namespace {

double pct(double v) { return std::round(v * 10000.0) / 100.0; }

}  // namespace

std::string SBReport::to_json() const {
  nlohmann::ordered_json j;
  j["rank_P"] = rank_P;
  j["acc"] = acc;
  j["pperp_ra"] = pperp_ra;
  j["p_ra"] = p_ra;
  j["pperp_lc"] = pperp_lc;
  j["p_lc"] = p_lc;
  j["effrank_W"] = effrank_W;
  j["num_pairs"] = num_pairs;
  j["skipped_pairs"] = skipped_pairs;
  j["percent"] = {{"acc", pct(acc)},           {"pperp_ra", pct(pperp_ra)}, {"p_ra", pct(p_ra)},
                  {"pperp_lc", pct(pperp_lc)}, {"p_lc", pct(p_lc)}};
  return j.dump(2) + "\n";
}

double effective_rank_from_singular_values(std::span<const double> s) {
  double total = 0.0;
  for (double v : s) total += v * v;
  if (!(total > 0.0)) throw Error(ErrorKind::UndefinedRank, "effective rank of a zero matrix");
  double entropy = 0.0;
  for (double v : s) {
    const double p = v * v / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

double effective_rank(const Matrix& M) { return effective_rank_from_singular_values(singular_values(M)); }

Vector singular_decay(const MLP& net) {
  const Vector s = singular_values(net.W);
  double total = 0.0;
  for (double v : s) total += v * v;
  if (!(total > 0.0)) throw Error(ErrorKind::UndefinedRank, "singular_decay: W is zero");
  Vector out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] * s[i] / total;
  return out;
}

Projector top_subspace(const MLP& net, std::size_t k) {
  if (k < 1 || k > net.d()) throw Error(ErrorKind::InvalidRank, "top_subspace: k must lie in [1, d]");
  const SvdResult r = svd(net.W);
  Matrix q(net.d(), k);
  // Fewer singular vectors than d when m < d: pad with a completion.
  const std::size_t avail = std::min(k, r.Vt.rows());
  for (std::size_t j = 0; j < avail; ++j)
    for (std::size_t i = 0; i < net.d(); ++i) q(i, j) = r.Vt(j, i);
  if (avail < k) {
    std::size_t axis = 0;
    for (std::size_t j = avail; j < k; ++j) {
      for (;; ++axis) {
        Vector cand(net.d(), 0.0);
        cand[axis] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
          for (std::size_t t = 0; t < j; ++t) {
            double p = 0.0;
            for (std::size_t i = 0; i < net.d(); ++i) p += q(i, t) * cand[i];
            for (std::size_t i = 0; i < net.d(); ++i) cand[i] -= p * q(i, t);
          }
        const double nrm = norm2(cand);
        if (nrm > 1e-6) {
          for (std::size_t i = 0; i < net.d(); ++i) q(i, j) = cand[i] / nrm;
          ++axis;
          break;
        }
      }
    }
  }
  return Projector(std::move(q));
}

std::size_t auto_rank_from_singular_values(std::span<const double> s, double energy) {
  if (!(energy > 0.0 && energy < 1.0)) throw Error(ErrorKind::InvalidInput, "auto_rank: energy must be in (0, 1)");
  double total = 0.0;
  for (double v : s) total += v * v;
  if (!(total > 0.0)) throw Error(ErrorKind::UndefinedRank, "auto_rank: zero spectrum");
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    acc += s[i] * s[i];
    if (acc >= energy * total) return i + 1;
  }
  return s.size();
}

std::size_t auto_rank(const MLP& net, double energy) {
  return auto_rank_from_singular_values(singular_values(net.W), energy);
}

// ---------------------------------------------------------------------------
// Projector optimization

namespace {

Matrix one_hot(std::span<const int> y, std::size_t c) {
  Matrix t(y.size(), c);
  for (std::size_t i = 0; i < y.size(); ++i) t(i, static_cast<std::size_t>(y[i])) = 1.0;
  return t;
}

Matrix uniform_targets(std::size_t n, std::size_t c) { return Matrix(n, c, 1.0 / static_cast<double>(c)); }

// X Q Q^T, row-wise.
Matrix project_rows(const Matrix& X, const Matrix& Q) { return matmul_nt(matmul(X, Q), Q); }

struct ObjectiveGrad {
  double value = 0.0;
  Matrix grad;  // d x k, Grassmann (horizontal) gradient
};

ObjectiveGrad objective_and_grad(const MLP& net, const Matrix& X, std::span<const int> y, const Matrix& Q,
                                 double lambda) {
  const std::size_t n = X.rows();
  const std::size_t c = net.c();
  const Matrix Px = project_rows(X, Q);
  Matrix Pperp = X;
  Pperp -= Px;

  const LossAndInputGrad t1 = loss_and_input_grad(net, Px, one_hot(y, c));
  ObjectiveGrad out;
  out.value = t1.loss;
  // d/dQ of <G, X Q Q^T> is (G^T X + X^T G) Q.
  Matrix S = matmul_tn(t1.dX, X);
  if (lambda != 0.0) {
    const LossAndInputGrad t2 = loss_and_input_grad(net, Pperp, uniform_targets(n, c));
    out.value += lambda * t2.loss;
    Matrix S2 = matmul_tn(t2.dX, X);
    S2 *= lambda;
    S -= S2;
  }
  Matrix sym = S + S.transpose();
  Matrix euclid = matmul(sym, Q);
  // Remove the component inside span(Q); the objective only sees Q Q^T.
  Matrix inside = matmul(Q, matmul_tn(Q, euclid));
  euclid -= inside;
  out.grad = std::move(euclid);
  return out;
}

double objective_only(const MLP& net, const Matrix& X, std::span<const int> y, const Matrix& Q, double lambda) {
  const Matrix Px = project_rows(X, Q);
  double v = loss_value(net, Px, y, 0.0);
  if (lambda != 0.0) {
    Matrix Pperp = X;
    Pperp -= Px;
    const Matrix logp = log_softmax_rows(forward(net, Pperp));
    double ce = 0.0;
    for (double l : logp.data()) ce -= l;
    v += lambda * ce / static_cast<double>(logp.size());
  }
  return v;
}

}  // namespace

double projector_objective(const MLP& net, const LabeledDataset& data, const Matrix& Q, double lambda) {
  if (Q.rows() != net.d()) throw Error(ErrorKind::ShapeError, "projector_objective: Q rows differ from d");
  return objective_only(net, data.X, data.y, Q, lambda);
}

ProjectorFit optimize_projector(const MLP& net, const LabeledDataset& data, std::size_t k, double lambda,
                                const ProjectorOptions& opt) {
  net.validate();
  if (data.d() != net.d()) throw Error(ErrorKind::ShapeError, "optimize_projector: dataset d differs from network d");
  if (k < 1 || k >= net.d()) throw Error(ErrorKind::InvalidRank, "optimize_projector: k must lie in [1, d)");
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidInput, "optimize_projector: lambda must be >= 0");
  if (!(opt.lr > 0.0)) throw Error(ErrorKind::InvalidInput, "optimize_projector: lr must be > 0");

  Rng rng = Rng(opt.seed).stream("projector");
  Matrix Q;
  if (opt.random_init) {
    Q = Matrix(net.d(), k);
    for (auto& v : Q.data()) v = rng.normal();
    Q = orthonormalize(Q);
  } else {
    Q = top_subspace(net, k).basis();
  }

  const bool full_batch = opt.batch == 0 || opt.batch >= data.n();
  const double initial = objective_only(net, data.X, data.y, Q, lambda);
  ProjectorFit fit{Projector(Q), initial, initial, 0, false};
  Matrix best = Q;

  Matrix xb;
  std::vector<int> yb;
  for (std::size_t step = 0; step < opt.steps; ++step) {
    const double lr = opt.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                                     static_cast<double>(opt.steps)));
    ObjectiveGrad og;
    if (full_batch) {
      og = objective_and_grad(net, data.X, data.y, Q, lambda);
      if (og.value < fit.best_objective) {
        fit.best_objective = og.value;
        fit.best_step = step;
        best = Q;
      }
    } else {
      xb = Matrix(opt.batch, data.d());
      yb.resize(opt.batch);
      for (std::size_t r = 0; r < opt.batch; ++r) {
        const std::size_t idx = rng.below(data.n());
        std::copy(data.X.row(idx).begin(), data.X.row(idx).end(), xb.row(r).begin());
        yb[r] = data.y[idx];
      }
      og = objective_and_grad(net, xb, yb, Q, lambda);
    }
    Matrix next = Q;
    for (std::size_t t = 0; t < next.size(); ++t) next.data()[t] -= lr * og.grad.data()[t];
    Q = orthonormalize(next);

    if (!full_batch && ((step + 1) % 50 == 0 || step + 1 == opt.steps)) {
      const double v = objective_only(net, data.X, data.y, Q, lambda);
      if (v < fit.best_objective) {
        fit.best_objective = v;
        fit.best_step = step + 1;
        best = Q;
      }
    }
  }
  if (full_batch) {
    const double v = objective_only(net, data.X, data.y, Q, lambda);
    if (v < fit.best_objective) {
      fit.best_objective = v;
      fit.best_step = opt.steps;
      best = Q;
    }
  }
  fit.convergence_warning = !(fit.best_objective < fit.initial_objective);
  fit.P = Projector(std::move(best));
  return fit;
}

// ---------------------------------------------------------------------------
// Mixing metrics

SBReport mixing_metrics(const MLP& net, const LabeledDataset& data, const Projector& P, std::size_t num_pairs,
                        Rng& rng) {
  if (num_pairs < 1) throw Error(ErrorKind::InvalidInput, "mixing_metrics: num_pairs must be >= 1");
  if (P.d() != net.d() || data.d() != net.d())
    throw Error(ErrorKind::ShapeError, "mixing_metrics: dimension mismatch");
  if (data.n() == 0) throw Error(ErrorKind::InvalidInput, "mixing_metrics: empty dataset");

  const std::size_t d = net.d();
  std::vector<std::size_t> i1(num_pairs), i2(num_pairs);
  for (std::size_t p = 0; p < num_pairs; ++p) {
    i1[p] = rng.below(data.n());
    i2[p] = rng.below(data.n());
  }
  Matrix X1(num_pairs, d), X2(num_pairs, d);
  for (std::size_t p = 0; p < num_pairs; ++p) {
    std::copy(data.X.row(i1[p]).begin(), data.X.row(i1[p]).end(), X1.row(p).begin());
    std::copy(data.X.row(i2[p]).begin(), data.X.row(i2[p]).end(), X2.row(p).begin());
  }
  Matrix mixed = P.apply_rows(X1);
  mixed += P.apply_perp_rows(X2);

  const Matrix f1 = forward(net, X1);
  const Matrix f2 = forward(net, X2);
  const Matrix fm = forward(net, mixed);
  const std::vector<int> pred = argmax_rows(fm);

  SBReport rep;
  rep.rank_P = P.k();
  rep.num_pairs = num_pairs;
  std::size_t hit1 = 0, hit2 = 0, lc_count = 0;
  double lc1 = 0.0, lc2 = 0.0;
  for (std::size_t p = 0; p < num_pairs; ++p) {
    hit1 += pred[p] == data.y[i1[p]] ? 1 : 0;
    hit2 += pred[p] == data.y[i2[p]] ? 1 : 0;
    const double n1 = norm2(f1.row(p));
    const double n2 = norm2(f2.row(p));
    if (n1 == 0.0 || n2 == 0.0) {
      ++rep.skipped_pairs;
      continue;
    }
    double d1 = 0.0, d2 = 0.0;
    for (std::size_t j = 0; j < net.c(); ++j) {
      d1 += (fm(p, j) - f1(p, j)) * (fm(p, j) - f1(p, j));
      d2 += (fm(p, j) - f2(p, j)) * (fm(p, j) - f2(p, j));
    }
    lc1 += std::sqrt(d1) / n1;
    lc2 += std::sqrt(d2) / n2;
    ++lc_count;
  }
  if (rep.skipped_pairs * 10 > num_pairs)
    throw Error(ErrorKind::DegenerateLogits, "mixing_metrics: more than 10% of pairs have zero logits");
  const double np = static_cast<double>(num_pairs);
  rep.pperp_ra = static_cast<double>(hit1) / np;
  rep.p_ra = static_cast<double>(hit2) / np;
  rep.pperp_lc = lc_count ? lc1 / static_cast<double>(lc_count) : 0.0;
  rep.p_lc = lc_count ? lc2 / static_cast<double>(lc_count) : 0.0;
  rep.acc = evaluate(net, data);
  rep.effrank_W = effective_rank(net.W);
  return rep;
}

// ---------------------------------------------------------------------------
// Decision-boundary views

std::string BoundaryGrid::to_csv() const {
  std::ostringstream out;
  out << "u,v,label\n";
  char buf[96];
  for (std::size_t i = 0; i < res; ++i)
    for (std::size_t j = 0; j < res; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", coords[i], coords[j], at(i, j));
      out << buf;
    }
  return out.str();
}

BoundaryGrid boundary_grid(const MLP& net, const Projector& P2, double range, std::size_t res,
                           std::span<const double> base_point) {
  if (P2.k() != 2) throw Error(ErrorKind::InvalidRank, "boundary_grid: projector must have rank 2");
  if (P2.d() != net.d() || base_point.size() != net.d())
    throw Error(ErrorKind::ShapeError, "boundary_grid: dimension mismatch");
  if (res < 1) throw Error(ErrorKind::InvalidInput, "boundary_grid: res must be >= 1");
  BoundaryGrid g;
  g.res = res;
  g.range = range;
  g.coords.resize(res);
  for (std::size_t i = 0; i < res; ++i)
    g.coords[i] = res == 1 ? 0.0 : -range + 2.0 * range * static_cast<double>(i) / static_cast<double>(res - 1);
  const Matrix& Q = P2.basis();
  Matrix pts(res * res, net.d());
  for (std::size_t i = 0; i < res; ++i)
    for (std::size_t j = 0; j < res; ++j) {
      auto row = pts.row(i * res + j);
      for (std::size_t t = 0; t < net.d(); ++t) row[t] = base_point[t] + g.coords[i] * Q(t, 0) + g.coords[j] * Q(t, 1);
    }
  g.labels = predict(net, pts);
  return g;
}

double linear_probe_nonlinearity(const MLP& net, const LabeledDataset& data, const Projector& P2) {
  if (P2.k() != 2) throw Error(ErrorKind::InvalidRank, "linear_probe_nonlinearity: projector must have rank 2");
  if (P2.d() != net.d() || data.d() != net.d())
    throw Error(ErrorKind::ShapeError, "linear_probe_nonlinearity: dimension mismatch");
  const std::size_t n = data.n();
  if (n == 0) throw Error(ErrorKind::InvalidInput, "linear_probe_nonlinearity: empty dataset");
  const std::size_t d = net.d();
  const Matrix& Q = P2.basis();

  // Fixed complement: P_perp of the data mean.
  Vector mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < d; ++t) mean[t] += data.X(i, t) / static_cast<double>(n);
  const Vector base = P2.apply_perp(mean);

  Matrix coords = matmul(data.X, Q);  // n x 2
  Matrix pts(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < d; ++t) pts(i, t) = base[t] + coords(i, 0) * Q(t, 0) + coords(i, 1) * Q(t, 1);
  const std::vector<int> pseudo = predict(net, pts);
  const std::size_t c = net.c();
  std::vector<std::size_t> counts(c, 0);
  for (int l : pseudo) ++counts[static_cast<std::size_t>(l)];
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t v) { return v > 0; }) < 2)
    throw Error(ErrorKind::DegenerateLabels, "linear_probe_nonlinearity: network predicts a single class");

  // Standardize the plane coordinates, then multinomial logistic regression
  // by full-batch gradient descent.
  double mu[2] = {0.0, 0.0}, sd[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 2; ++a) mu[a] += coords(i, static_cast<std::size_t>(a)) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 2; ++a) {
      const double t = coords(i, static_cast<std::size_t>(a)) - mu[a];
      sd[a] += t * t / static_cast<double>(n);
    }
  Matrix feat(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 2; ++a) {
      const double s = std::sqrt(sd[a]);
      feat(i, static_cast<std::size_t>(a)) = s > 0.0 ? (coords(i, static_cast<std::size_t>(a)) - mu[a]) / s : 0.0;
    }
    feat(i, 2) = 1.0;
  }
  Matrix w(3, c);
  const Matrix target = one_hot(pseudo, c);
  constexpr int kIters = 3000;
  constexpr double kStep = 2.0;
  for (int it = 0; it < kIters; ++it) {
    const Matrix logp = log_softmax_rows(matmul(feat, w));
    Matrix G(n, c);
    for (std::size_t t = 0; t < G.size(); ++t)
      G.data()[t] = (std::exp(logp.data()[t]) - target.data()[t]) / static_cast<double>(n);
    Matrix grad = matmul_tn(feat, G);
    grad *= kStep;
    w -= grad;
  }
  const std::vector<int> fitted = argmax_rows(matmul(feat, w));
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) agree += fitted[i] == pseudo[i] ? 1 : 0;
  return static_cast<double>(agree) / static_cast<double>(n);
}

}  // namespace ldsb
