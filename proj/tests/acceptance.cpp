// Acceptance battery: ten end-to-end properties of the correction library,
// each printed as one PASS/FAIL line with its check count and runtime.
// The process exits with the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bpb/ck_cs.hpp"
#include "bpb/core.hpp"
#include "bpb/harness.hpp"
#include "bpb/partition.hpp"
#include "bpb/predual.hpp"
#include "bpb/ucx.hpp"

using namespace bpb;

namespace {

struct Check {
  std::size_t total = 0;
  std::size_t failed = 0;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    ++total;
    if (!ok) {
      ++failed;
      if (notes.size() < 5) notes.push_back(what);
    }
  }
};

double ledger_value(const harness::RunReport& rep, const std::string& key) {
  for (const auto& [name, value] : rep.ledger)
    if (name == key) return value;
  return std::nan("");
}

Kernel random_kernel(Rng& rng, std::size_t m, std::size_t n,
                     bool normalized) {
  Kernel k;
  k.source_dim = n;
  k.rows.resize(m);
  for (Meas& row : k.rows) {
    row.masses.resize(n);
    for (double& v : row.masses)
      v = rng.uniform() < 0.15 ? 0.0 : rng.uniform(-1.0, 1.0);
  }
  if (normalized) {
    const double norm = kernel_norm(k);
    if (norm > 0.0) k = kernel_scale(k, 1.0 / norm);
  }
  return k;
}

struct FlattenInput {
  Kernel mu;
  std::size_t s0 = 0;
  Fn f0;
  double delta = 0.0;
};

// Unit kernel, its dominant row, a function pairing with that row above
// 1 - delta^2/12, and a flat budget spent on low-mass coordinates so the
// flat zone is usually non-empty.
FlattenInput random_flatten_input(Rng& rng) {
  FlattenInput in;
  const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform_int(0, 5));
  const std::size_t m = 2 + static_cast<std::size_t>(rng.uniform_int(0, 4));
  in.mu = random_kernel(rng, m, n, true);
  for (std::size_t s = 0; s < m; ++s)
    if (tv_norm(in.mu.rows[s]) > tv_norm(in.mu.rows[in.s0])) in.s0 = s;
  in.delta = rng.uniform(0.1, 0.9);

  const Vec& row = in.mu.rows[in.s0].masses;
  std::size_t t_peak = 0;
  for (std::size_t t = 1; t < n; ++t)
    if (std::fabs(row[t]) > std::fabs(row[t_peak])) t_peak = t;

  const double budget = 0.45 * in.delta * in.delta / 12.0;
  double spent = 0.0;
  in.f0.values.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double sgn = row[t] < 0.0 ? -1.0 : 1.0;
    if (t != t_peak && rng.uniform() < 0.4) {
      const double prop = rng.uniform(-0.9, 0.9);
      const double cost = std::fabs(row[t]) * (1.0 - sgn * prop);
      if (spent + cost <= budget) {
        in.f0.values[t] = prop;
        spent += cost;
        continue;
      }
    }
    in.f0.values[t] = sgn;
  }
  return in;
}

Vec random_unit_dual(Rng& rng, std::size_t n, const NormTag& space) {
  for (;;) {
    Vec v(n);
    for (double& x : v) x = rng.gaussian();
    const double dn = dual_norm(v, space);
    if (dn > 0.1) {
      for (double& x : v) x /= dn;
      return v;
    }
  }
}

void criterion_eta_grid(Check& c) {
  for (double eps : {0.25, 0.5, 1.0}) {
    for (int i = 0; i < 200; ++i) {
      harness::InstanceSpec spec;
      spec.pipeline = "ck-cs";
      spec.n = 2 + static_cast<std::size_t>(i) % 7;
      spec.m = 2 + (static_cast<std::size_t>(i) / 7) % 7;
      spec.slack = 0.9 * eps * eps / 432.0;
      spec.seed = 1000 + static_cast<std::uint64_t>(eps * 1e4) + i;
      const harness::Instance inst = harness::gen_instance(spec);
      const harness::RunReport rep = harness::run_and_verify(inst, eps);
      c.expect(rep.exit_code == harness::kExitVerified,
               "run not verified: " + rep.error);
      if (rep.exit_code != harness::kExitVerified) continue;
      c.expect(std::fabs(kernel_norm(rep.s_kernel) - 1.0) <= 1e-9,
               "corrected kernel norm off 1");
      const double at =
          sup_norm(kernel_apply(rep.s_kernel, Fn{rep.certificate.witness}));
      c.expect(std::fabs(at - 1.0) <= 1e-9, "attained value off 1");
      c.expect(rep.certificate.dist_point < eps, "point moved too far");
      c.expect(rep.certificate.dist_operator < eps, "kernel moved too far");
    }
  }
}

void criterion_flatten(Check& c) {
  for (int run = 0; run < 500; ++run) {
    Rng rng(2000 + run);
    const FlattenInput in = random_flatten_input(rng);
    const ckcs::FlattenOutput out =
        ckcs::flatten_peak(in.mu, in.s0, in.f0, in.delta);

    std::vector<bool> in_v(in.f0.dim(), false);
    for (std::size_t t : out.V) in_v[t] = true;

    for (std::size_t s : out.U)
      for (std::size_t t : out.V)
        c.expect(out.mu_prime.rows[s].masses[t] == 0.0,
                 "pruned row keeps mass on the flat zone");

    const double norm_prime = kernel_norm(out.mu_prime);
    for (std::size_t s : out.U)
      c.expect(pair(out.h0, out.mu_prime.rows[s]) > norm_prime - in.delta,
               "pruned row pairs below norm - delta");

    double move = 0.0;
    for (std::size_t t = 0; t < in.f0.dim(); ++t)
      move = std::max(move, std::fabs(out.h0.values[t] - in.f0.values[t]));
    c.expect(move < in.delta, "flattened point moved too far");

    c.expect(sup_norm(out.h0) == 1.0, "flattened point not unit");
    for (std::size_t t = 0; t < in.f0.dim(); ++t)
      if (!in_v[t])
        c.expect(std::fabs(out.h0.values[t]) == 1.0,
                 "point not a sign off the flat zone");

    c.expect(kernel_norm(kernel_sub(out.mu_prime, in.mu)) < in.delta,
             "kernel moved too far");
  }
}

void criterion_contraction(Check& c) {
  std::size_t runs = 0;
  for (int chain = 0; chain < 63; ++chain) {
    Rng rng(3000 + chain);
    const FlattenInput in = random_flatten_input(rng);
    const ckcs::FlattenOutput fl =
        ckcs::flatten_peak(in.mu, in.s0, in.f0, in.delta);
    const double r = rng.uniform(0.7, 0.95);

    Kernel cur = fl.mu_prime;
    double delta_n = in.delta;
    double bound = in.delta;
    for (int step = 0; step < 8; ++step) {
      const ckcs::JwStepResult res =
          ckcs::jw_step(cur, fl.U, fl.V, fl.h0, delta_n, r);
      ++runs;

      for (std::size_t s : fl.U)
        for (std::size_t t : fl.V)
          c.expect(res.mu_prime.rows[s].masses[t] == 0.0,
                   "step leaked mass onto the flat zone");

      const double norm_prime = kernel_norm(res.mu_prime);
      c.expect(pair(fl.h0, res.mu_prime.rows[res.s1]) >=
                   norm_prime - r * delta_n,
               "contracted defect above r*delta");
      c.expect(kernel_norm(kernel_sub(res.mu_prime, cur)) <= r * delta_n,
               "step moved the kernel above r*delta");

      bound *= r;
      double best = -2.0;
      for (std::size_t s : fl.U)
        best = std::max(best, pair(fl.h0, res.mu_prime.rows[s]));
      c.expect(norm_prime - best <= bound,
               "defect not geometrically decayed");

      cur = res.mu_prime;
      delta_n *= r;
    }
  }
  c.expect(runs >= 500, "fewer than 500 contraction steps exercised");
}

void criterion_partition(Check& c) {
  for (int run = 0; run < 200; ++run) {
    Rng rng(4000 + run);
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_int(0, 6));
    const std::size_t p = 1 + static_cast<std::size_t>(rng.uniform_int(0, 2));
    GeneralOperator T;
    T.source_norm = NormTag::sup();
    T.target_norm = NormTag::euclid();
    T.matrix.assign(p, Vec(n));
    for (Vec& row : T.matrix)
      for (double& v : row) v = rng.uniform(-1.0, 1.0);
    if (p == 3) {
      double lip = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        double col = 0.0;
        for (std::size_t i = 0; i < p; ++i) col += T.matrix[i][t] * T.matrix[i][t];
        lip += std::sqrt(col);
      }
      if (lip > 1.8) T = op_scale(T, 1.8 / lip);
    }
    Fn f0;
    f0.values.resize(n);
    for (double& v : f0.values) v = rng.uniform(-1.0, 1.0);
    const double eps = rng.uniform(0.3, 0.9);

    const part::PartitionResult res = part::build_partition(T, f0, eps);
    for (const auto& block : res.projection.blocks)
      c.expect(oscillation(f0, block) < eps, "block oscillation above eps");

    const GeneralOperator& P = res.projection.projector;
    if (!res.projection.blocks.empty()) {
      // Averaging weights are quotients and block sums are pinned in block
      // order, so idempotence and the unit norm hold to the float-exactness
      // slack rather than bitwise.
      const GeneralOperator PP = op_compose(P, P);
      double drift = 0.0;
      for (std::size_t i = 0; i < PP.matrix.size(); ++i)
        for (std::size_t j = 0; j < PP.matrix[i].size(); ++j)
          drift = std::max(drift,
                           std::fabs(PP.matrix[i][j] - P.matrix[i][j]));
      c.expect(drift <= kFloatSlack, "projector not idempotent");
      c.expect(std::fabs(oracle_norm(P).value - 1.0) <= kFloatSlack,
               "projector norm off 1");
    }
    c.expect(oracle_norm(op_sub(T, op_compose(T, P))).value < eps,
             "projected operator too far from the original");
  }
}

void criterion_ucx_chain(Check& c) {
  const double eps = 0.5;
  for (int i = 0; i < 200; ++i) {
    harness::InstanceSpec spec;
    spec.pipeline = "ucx";
    spec.n = 2 + static_cast<std::size_t>(i) % 7;
    spec.m = 2 + static_cast<std::size_t>(i) % 2;
    spec.slack = ucx::eta(eps) / 2.0;
    spec.seed = 5000 + i;
    const harness::Instance inst = harness::gen_instance(spec);
    const harness::RunReport rep = harness::run_and_verify(inst, eps);
    c.expect(rep.exit_code == harness::kExitVerified,
             "run not verified: " + rep.error);
    if (rep.exit_code != harness::kExitVerified) continue;
    const double total = ledger_value(rep, "chain_total");
    const double budget = ledger_value(rep, "chain_budget");
    c.expect(total <= budget, "distance chain exceeds its budget");
    c.expect(budget < eps, "chain budget not below eps");
    c.expect(rep.certificate.dist_point < eps, "point moved too far");
    c.expect(rep.certificate.dist_operator < eps, "operator moved too far");
  }
}

void criterion_predual_rank(Check& c) {
  const double eps = 0.5;
  for (int i = 0; i < 200; ++i) {
    harness::InstanceSpec spec;
    spec.pipeline = "predual";
    spec.n = 3 + static_cast<std::size_t>(i) % 3;
    spec.m = 10 + static_cast<std::size_t>(i) % 3;
    spec.slack = predual::eta(eps) / 2.0;
    spec.seed = 6000 + i;
    const harness::Instance inst = harness::gen_instance(spec);
    const harness::RunReport rep = harness::run_and_verify(inst, eps);
    c.expect(rep.exit_code == harness::kExitVerified,
             "run not verified: " + rep.error);
    if (rep.exit_code != harness::kExitVerified) continue;

    const double delta = ledger_value(rep, "delta");
    const double tail = ledger_value(rep, "tail_norm");
    c.expect(tail < 4.0 * delta, "truncation tail above 4*delta");

    const auto rank = static_cast<std::size_t>(ledger_value(rep,
                                                            "truncation_m"));
    c.expect(rank >= 1 && rank < spec.m, "truncation rank not proper");
    for (std::size_t j = rank; j < rep.s_op.matrix.size(); ++j)
      for (double v : rep.s_op.matrix[j])
        c.expect(v == 0.0, "corrected operator not finite rank");
  }
}

void criterion_scalar_pnorm(Check& c) {
  const std::vector<double> ps = {1.5, 2.0, 3.0};
  std::size_t runs = 0;
  for (std::uint64_t attempt = 0; runs < 500 && attempt < 5000; ++attempt) {
    Rng rng(7000 + attempt);
    const NormTag space = NormTag::lp(ps[attempt % 3]);
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_int(0, 4));
    const Vec x_star = random_unit_dual(rng, n, space);
    Vec x0 = norming_vector(x_star, space);
    for (double& v : x0) v += 0.01 * rng.gaussian();
    const double x0n = vector_norm(x0, space);
    if (x0n > 1.0)
      for (double& v : x0) v /= x0n;
    const double eps = rng.uniform(0.05, 0.45);
    double paired = 0.0;
    for (std::size_t i = 0; i < n; ++i) paired += x_star[i] * x0[i];
    if (!(std::fabs(1.0 - paired) < 0.45 * eps * eps / 2.0)) continue;
    ++runs;

    const predual::ScalarBpbResult r =
        predual::scalar_bpb(x_star, x0, space, eps);
    Vec dp(n), df(n);
    for (std::size_t i = 0; i < n; ++i) {
      dp[i] = r.y[i] - x0[i];
      df[i] = r.y_star[i] - x_star[i];
    }
    c.expect(vector_norm(dp, space) < eps + eps * eps,
             "point moved beyond eps + eps^2");
    c.expect(dual_norm(df, space) < eps, "functional moved beyond eps");
    double at = 0.0;
    for (std::size_t i = 0; i < n; ++i) at += r.y_star[i] * r.y[i];
    c.expect(std::fabs(at - 1.0) <= 1e-9, "pairing off 1");
    c.expect(std::fabs(vector_norm(r.y, space) - 1.0) <= 1e-9,
             "point not unit");
    c.expect(std::fabs(dual_norm(r.y_star, space) - 1.0) <= 1e-9,
             "functional not unit");
  }
  c.expect(runs == 500, "fewer than 500 scalar corrections exercised");
}

void criterion_oracle_equivalence(Check& c) {
  for (int run = 0; run < 500; ++run) {
    Rng rng(8000 + run);
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_int(0, 8));
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform_int(0, 4));
    const Kernel k = random_kernel(rng, m, n, false);

    double best = 0.0;
    for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t)
          s += k.rows[i].masses[t] * ((bits >> t) & 1 ? 1.0 : -1.0);
        best = std::max(best, std::fabs(s));
      }
    }
    c.expect(best == kernel_norm(k),
             "kernel norm disagrees with sign enumeration");
  }
}

void criterion_dimension_sweep(Check& c) {
  int idx = 0;
  for (double eps : {0.25, 0.5, 1.0}) {
    harness::SweepOptions opts;
    opts.pipeline = "ck-cs";
    opts.epsilons = {eps};
    opts.slacks = {0.9 * ckcs::eta(eps)};
    opts.dims = {2, 4, 8, 12};
    opts.trials = 5;
    opts.seed0 = 9000 + 100 * idx++;
    std::istringstream in(harness::sweep_eta(opts));
    std::string line;
    std::getline(in, line);  // header
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      std::vector<std::string> cells;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      c.expect(cells[6] == "verified" && cells[7] == "1",
               "sweep cell not successful: " + line);
    }
    c.expect(rows == 20, "sweep row count off");
  }
}

void criterion_fault_injection(Check& c) {
  const std::vector<std::string> pipelines = {"ck-cs", "ucx", "predual"};
  std::vector<double> thresholds = {ckcs::eta(0.5), ucx::eta(0.5),
                                    predual::eta(0.5)};
  for (int i = 0; i < 50; ++i) {
    harness::InstanceSpec spec;
    spec.pipeline = pipelines[i % 3];
    spec.slack = 0.5 * thresholds[i % 3];
    spec.seed = 100 + i;
    if (spec.pipeline == "predual") spec.m = 8;
    const harness::Instance inst = harness::gen_instance(spec);
    const harness::RunReport rep = harness::run_and_verify(inst, 0.5);
    c.expect(rep.exit_code == harness::kExitVerified,
             "baseline run not verified: " + rep.error);
    if (rep.exit_code != harness::kExitVerified) continue;
    const harness::RunReport bad =
        i % 2 ? harness::corrupt_operator(rep, i % 4 ? 1.05 : 0.97)
              : harness::corrupt_witness(rep);
    c.expect(!harness::verify_report(bad).empty(),
             "corrupted certificate accepted");
  }
}

struct Criterion {
  int id;
  const char* label;
  std::function<void(Check&)> run;
  double budget_s;  // 0 = no explicit runtime bound
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "kernel corrections verify across the epsilon grid",
       criterion_eta_grid, 60.0},
      {2, "peak flattening satisfies its five output conditions",
       criterion_flatten, 30.0},
      {3, "contraction steps decay the attainment defect geometrically",
       criterion_contraction, 0.0},
      {4, "averaging projections approximate the operator",
       criterion_partition, 60.0},
      {5, "uniformly convex pipeline meets its distance chain budget",
       criterion_ucx_chain, 0.0},
      {6, "predual pipeline truncates to finite rank and verifies",
       criterion_predual_rank, 0.0},
      {7, "scalar corrections respect the p-norm distance bounds",
       criterion_scalar_pnorm, 0.0},
      {8, "kernel norm matches exhaustive sign enumeration",
       criterion_oracle_equivalence, 0.0},
      {9, "success rate is dimension independent",
       criterion_dimension_sweep, 0.0},
      {10, "corrupted certificates are rejected",
       criterion_fault_injection, 0.0},
  };

  int failed_criteria = 0;
  for (const Criterion& cr : criteria) {
    Check c;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("unexpected exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    if (cr.budget_s > 0.0)
      c.expect(secs < cr.budget_s, "runtime budget exceeded");

    const bool pass = c.failed == 0;
    if (!pass) ++failed_criteria;
    std::printf("criterion %2d: %s  %s  (%zu checks, %.2f s)\n", cr.id,
                pass ? "PASS" : "FAIL", cr.label, c.total, secs);
    for (const std::string& note : c.notes)
      std::printf("              - %s\n", note.c_str());
  }
  std::printf("acceptance: %d/10 criteria passed\n",
              10 - failed_criteria);
  return failed_criteria;
}
