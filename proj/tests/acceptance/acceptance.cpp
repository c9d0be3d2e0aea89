// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "ldsb/datasets.hpp"
#include "ldsb/experiment_config.hpp"
#include "ldsb/model.hpp"
#include "ldsb/ntk_verify.hpp"
#include "ldsb/orthop.hpp"
#include "ldsb/sb_analysis.hpp"
#include "ldsb/training.hpp"

using namespace ldsb;

namespace {

constexpr std::uint64_t kSeeds[] = {0, 1, 2};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

cli::ExperimentConfig seeded(const std::string& preset, std::uint64_t seed) {
  cli::ExperimentConfig c = cli::preset(preset);
  c.seed = seed;
  c.dataset.spec.seed = seed;
  c.train.seed = seed;
  return c;
}

DatasetSplits generate(const cli::ExperimentConfig& c) {
  switch (c.dataset.family) {
    case cli::DatasetFamily::Ifm: return gen_ifm_splits(c.dataset.spec);
    case cli::DatasetFamily::CollageXor: return gen_collage_splits(c.dataset.spec, CollagePattern::Xor);
    case cli::DatasetFamily::CollageSphere: return gen_collage_splits(c.dataset.spec, CollagePattern::Sphere);
  }
  return {};
}

MLP fresh(const cli::ExperimentConfig& c, const LabeledDataset& data, std::uint64_t seed) {
  return init_from_seed(c.model.regime, c.model.width, data.d(), static_cast<std::size_t>(data.num_classes), seed);
}

// ---------------------------------------------------------------------------

Outcome support_vectors() {
  double worst_res = 0.0, worst_dual = 0.0;
  for (std::size_t d = 4; d <= 14; ++d)
    for (double gamma : {1.0, 3.0, 7.0}) {
      const DenseDualCheck c = dense_dual_check(d, gamma);
      worst_res = std::max(worst_res, c.support_residual_max);
      worst_dual = std::max(worst_dual, c.dual_rel_diff_max);
    }
  return {worst_res <= 1e-7 && worst_dual <= 1e-7,
          fmt("max |yf-1| = %.2e, max dual rel diff = %.2e", worst_res, worst_dual)};
}

Outcome ntk_thresholds() {
  const double gamma = 7.0;
  const std::size_t d = 100000;
  const NTKSetup s = build_setup(d, gamma);
  const double n073 = margin_fn_neg(s, 0.73);
  const double n0 = margin_fn_neg(s, 0.0);
  const double p095 = margin_fn_pos(s, -0.95 * gamma);
  const double pg = margin_fn_pos(s, gamma);
  const double inv_norm = 1.0 / std::sqrt(gamma * gamma + static_cast<double>(d));
  const double rel = std::abs(pg - inv_norm) / inv_norm;
  return {n073 > 0.0 && n0 < 0.0 && p095 < 0.0 && rel <= 1e-7,
          fmt("neg(0.73) = %.4g, neg(0) = %.4g, pos(-6.65) = %.4g, pos(7) rel err = %.2e", n073, n0, p095, rel)};
}

Outcome xi_bracket() {
  const double lo = 2.0 / std::numbers::pi - 1.0 / (std::numbers::pi * std::numbers::pi) - 0.05;
  const double hi = 2.05;
  bool ok = true;
  std::string detail = "xi:";
  for (std::size_t d : {1000u, 10000u, 100000u})
    for (double gamma : {7.0, 20.0}) {
      const double xi = build_setup(d, gamma).xi;
      ok = ok && xi >= lo && xi <= hi;
      detail += fmt(" (%zu,%g)=%.4f", d, gamma, xi);
    }
  return {ok, detail + fmt(" in [%.4f, %.2f]", lo, hi)};
}

Outcome rich_values() {
  const std::size_t d = 8;
  bool ok = true;
  double worst_theta = 0.0, worst_margin = 0.0, worst_spread = 0.0, closest = -1e300;
  for (double gamma : {1.0, 2.0, 5.0}) {
    const double expected = std::sqrt(gamma * gamma + 1.0) / 4.0;
    for (int sign : {1, -1}) {
      const RichNeuron t = rich_theta(gamma, d, sign);
      worst_theta = std::max(worst_theta, std::abs(rich_dual_value(t.w, t.b, t.a, gamma, d) - expected));
    }
    Rng rng = Rng(static_cast<std::uint64_t>(gamma)).stream("random-neurons");
    const RichMaximizerReport r = rich_maximizer_check(gamma, d, 100000, rng);
    ok = ok && r.max_random < expected;
    closest = std::max(closest, r.max_random - expected);

    const Vector m = nustar_margins(gamma, gen_pointmass_d(d, gamma, false));
    const auto [mn, mx] = std::minmax_element(m.begin(), m.end());
    worst_margin = std::max(worst_margin, std::abs(*mn - expected));
    worst_spread = std::max(worst_spread, *mx - *mn);
  }
  ok = ok && worst_theta <= 1e-9 && worst_margin <= 1e-9 && worst_spread <= 1e-9;
  return {ok, fmt("|g(theta)-expected| <= %.1e, best random - expected = %.4f, nu* margin err %.1e, spread %.1e",
                  worst_theta, closest, worst_margin, worst_spread)};
}

struct RichRun {
  MLP f;
  DatasetSplits splits;
  cli::ExperimentConfig config;
};

std::vector<RichRun> rich_runs;

Outcome rich_emergence() {
  std::vector<double> ratio, cosv, pperp_ra_rel, p_ra, pperp_lc;
  for (std::uint64_t seed : kSeeds) {
    const cli::ExperimentConfig c = seeded("ifm-basic", seed);
    const DatasetSplits s = generate(c);
    const MLP f0 = fresh(c, s.train, seed);
    TrainConfig tc = c.train;
    tc.steps = 4000;
    const MLP f = train(f0, s.train, tc).net;
    ratio.push_back(effective_rank(f.W) / effective_rank(f0.W));
    const Projector P = top_subspace(f, 1);
    cosv.push_back(std::abs(P.basis()(0, 0)));
    Rng rng = Rng(seed).stream("mixing");
    const SBReport r = mixing_metrics(f, s.test, P, 10 * s.test.n(), rng);
    pperp_ra_rel.push_back(r.pperp_ra / r.acc);
    p_ra.push_back(r.p_ra);
    pperp_lc.push_back(r.pperp_lc);
    rich_runs.push_back({f, s, c});
  }
  const double mr = median(ratio), mc = median(cosv), mra = median(pperp_ra_rel), mp = median(p_ra),
               ml = median(pperp_lc);
  return {mr < 0.35 && mc >= 0.9 && mra >= 0.95 && mp <= 0.65 && ml <= 0.15,
          fmt("effrank ratio %.3f, |cos| %.4f, Pperp-RA/acc %.3f, P-RA %.3f, Pperp-LC %.3f", mr, mc, mra, mp, ml)};
}

Outcome lazy_contrast() {
  std::vector<double> ratio, pperp_ra_rel, p_ra;
  for (std::uint64_t seed : kSeeds) {
    const cli::ExperimentConfig c = seeded("ifm-lazy", seed);
    const DatasetSplits s = generate(c);
    const MLP f0 = fresh(c, s.train, seed);
    const MLP f = train(f0, s.train, c.train).net;
    ratio.push_back(effective_rank(f.W) / effective_rank(f0.W));
    ProjectorOptions po;
    po.steps = c.analysis.projector_steps;
    po.lr = c.analysis.projector_lr;
    po.batch = c.analysis.projector_batch;
    po.seed = seed;
    const ProjectorFit fit = optimize_projector(f, s.train, 1, 1.0, po);
    Rng rng = Rng(seed).stream("mixing");
    const SBReport r = mixing_metrics(f, s.test, fit.P, 10 * s.test.n(), rng);
    pperp_ra_rel.push_back(r.pperp_ra / r.acc);
    p_ra.push_back(r.p_ra);
  }
  const double mr = median(ratio), mra = median(pperp_ra_rel), mp = median(p_ra);
  return {mr >= 0.8 && mra >= 0.9 && mp <= 0.65,
          fmt("effrank ratio %.3f, Pperp-RA/acc %.3f, P-RA %.3f", mr, mra, mp)};
}

Outcome fproj_viability() {
  if (rich_runs.empty()) return {false, "rich runs unavailable"};
  std::vector<double> acc;
  for (const RichRun& run : rich_runs) {
    TrainConfig tc = run.config.train;
    tc.seed = cli::derived_seed(run.config.seed, "f_proj");
    const OrthoPResult r = orthop_train(run.f, run.splits.train, run.config.analysis.rank, tc);
    acc.push_back(evaluate(r.f_proj, run.splits.test));
  }
  const double m = median(acc), lo = *std::min_element(acc.begin(), acc.end());
  return {m >= 0.95, fmt("f_proj test accuracy median %.4f (min %.4f)", m, lo)};
}

struct CollageRun {
  DiversityReport proj, ind;
  RobustnessCurve curve;
};

std::vector<CollageRun> collage_runs;

void run_collage() {
  const Vector sigmas{0.25, 0.5, 1.0, 2.0};
  for (std::uint64_t seed : kSeeds) {
    const cli::ExperimentConfig c = seeded("collage-xor", seed);
    const DatasetSplits s = generate(c);
    const MLP f = train(fresh(c, s.train, seed), s.train, c.train).net;
    TrainConfig proj_tc = c.train;
    proj_tc.seed = cli::derived_seed(seed, "f_proj");
    const MLP f_proj = orthop_train(f, s.train, c.analysis.rank, proj_tc).f_proj;
    TrainConfig ind_tc = c.train;
    ind_tc.seed = cli::derived_seed(seed, "f_ind");
    const MLP f_ind = train(fresh(c, s.train, ind_tc.seed), s.train, ind_tc).net;

    LabeledDataset noisy = s.test;
    Rng rng = Rng(seed).stream("diversity");
    for (double& v : noisy.X.data()) v += c.analysis.sigma_div * rng.normal();
    CollageRun run;
    run.proj = diversity_report(f, f_proj, noisy);
    run.ind = diversity_report(f, f_ind, noisy);
    run.curve = robustness_sweep(f, f_ind, f_proj, s.test, sigmas, c.robustness.trials, Rng(seed).stream("robustness"));
    collage_runs.push_back(std::move(run));
  }
}

Outcome diversity_direction() {
  if (collage_runs.empty()) run_collage();
  std::vector<double> md_p, md_i, cc_p, cc_i;
  for (const CollageRun& r : collage_runs) {
    md_p.push_back(r.proj.mist_div);
    md_i.push_back(r.ind.mist_div);
    cc_p.push_back(r.proj.cc_logit_corr);
    cc_i.push_back(r.ind.cc_logit_corr);
  }
  const double a = median(md_p), b = median(md_i), x = median(cc_p), y = median(cc_i);
  return {a > b && x < y, fmt("Mist-Div f_proj %.3f vs f_ind %.3f, CC-LogitCorr f_proj %.3f vs f_ind %.3f", a, b, x, y)};
}

Outcome robustness_direction() {
  if (collage_runs.empty()) run_collage();
  const Vector& sigmas = collage_runs.front().curve.sigmas;
  double best = -1.0, best_sigma = 0.0;
  std::string detail = "median gain:";
  for (double sigma : sigmas) {
    std::vector<double> gain;
    for (const CollageRun& r : collage_runs)
      gain.push_back(r.curve.at(sigma, "ens_f_f_proj") - r.curve.at(sigma, "ens_f_f_ind"));
    const double g = median(gain);
    detail += fmt(" s=%.2f:%+.3f", sigma, g);
    if (g > best) {
      best = g;
      best_sigma = sigma;
    }
  }
  return {best >= 0.02, detail + fmt(" (best at sigma %.2f)", best_sigma)};
}

// Unit oracles, recomputed here so the gate does not depend on the unit
// test binaries.
double fd_gradient_error() {
  Rng rng(5);
  Rng init = rng.stream("init");
  double worst = 0.0;
  for (Regime regime : {Regime::Rich, Regime::Lazy}) {
    MLP net = init_network(regime, 6, 4, 3, init);
    Matrix X(8, 4);
    for (double& v : X.data()) v = rng.normal();
    std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
    const double wd = 0.01;
    const LossAndGrad lg = loss_and_grad(net, X, y, wd);
    auto probe = [&](std::vector<double>& params, const std::vector<double>& grad) {
      for (std::size_t k = 0; k < params.size(); ++k) {
        const double keep = params[k];
        params[k] = keep + 1e-6;
        const double up = loss_value(net, X, y, wd);
        params[k] = keep - 1e-6;
        const double down = loss_value(net, X, y, wd);
        params[k] = keep;
        const double num = (up - down) / 2e-6;
        const double scale = std::max({std::abs(num), std::abs(grad[k]), 1e-3});
        worst = std::max(worst, std::abs(num - grad[k]) / scale);
      }
    };
    probe(net.W.data(), lg.grad.dW.data());
    probe(net.b, lg.grad.db);
    probe(net.A.data(), lg.grad.dA.data());

    Matrix targets(8, 3, 1.0 / 3.0);
    const LossAndInputGrad ig = loss_and_input_grad(net, X, targets);
    for (std::size_t k = 0; k < X.size(); ++k) {
      const double keep = X.data()[k];
      X.data()[k] = keep + 1e-6;
      const double up = loss_and_input_grad(net, X, targets).loss;
      X.data()[k] = keep - 1e-6;
      const double down = loss_and_input_grad(net, X, targets).loss;
      X.data()[k] = keep;
      const double num = (up - down) / 2e-6;
      const double scale = std::max({std::abs(num), std::abs(ig.dX.data()[k]), 1e-3});
      worst = std::max(worst, std::abs(num - ig.dX.data()[k]) / scale);
    }
  }
  return worst;
}

Outcome unit_oracles() {
  const bool kappa_ok = kappa(1.0) == 2.0 && std::abs(kappa(0.0) - 1.0 / std::numbers::pi) <= 1e-16 &&
                        std::abs(kappa(-1.0)) <= 1e-16;
  double rank_err = 0.0;
  Rng rng(2);
  for (std::size_t k = 1; k <= 6; ++k) {
    Matrix v(8, k);
    for (double& x : v.data()) x = rng.normal();
    rank_err = std::max(rank_err, std::abs(effective_rank(Projector::from_span(v).matrix()) - static_cast<double>(k)));
  }
  const double grad_err = fd_gradient_error();

  IfmSpec spec;
  spec.seed = 3;
  const LabeledDataset ds = gen_ifm(spec, 200, 0);
  const bool data_ok = parse_dataset(serialize_dataset(ds)) == ds;
  Rng init(4);
  const MLP net = init_lazy(30, 20, 2, init);
  const bool ckpt_ok = parse_checkpoint(serialize_checkpoint(net)) == net;

  return {kappa_ok && rank_err <= 1e-9 && grad_err <= 1e-6 && data_ok && ckpt_ok,
          fmt("kappa %s, effrank err %.1e, grad rel err %.1e, dataset round trip %s, checkpoint round trip %s",
              kappa_ok ? "exact" : "WRONG", rank_err, grad_err, data_ok ? "exact" : "DIFFERS",
              ckpt_ok ? "exact" : "DIFFERS")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
  double limit_seconds;  // 0 means no runtime bound
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "NTK support-vector identity", support_vectors, 10.0},
      {2, "NTK sign thresholds at d=1e5", ntk_thresholds, 5.0},
      {3, "xi bracket", xi_bracket, 0.0},
      {4, "rich max-margin values", rich_values, 0.0},
      {5, "rich-regime LD-SB", rich_emergence, 180.0},
      {6, "lazy-regime contrast", lazy_contrast, 300.0},
      {7, "f_proj viability", fproj_viability, 0.0},
      {8, "diversity direction", diversity_direction, 0.0},
      {9, "robustness direction", robustness_direction, 0.0},
      {10, "unit oracles", unit_oracles, 0.0},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_seconds > 0.0 && secs > c.limit_seconds) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s limit]", c.limit_seconds);
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
