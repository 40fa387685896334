#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "bpb/ck_cs.hpp"
#include "bpb/core.hpp"
#include "bpb/harness.hpp"

using namespace bpb;
using namespace bpb::ckcs;

namespace {

Kernel make_kernel(std::vector<Vec> rows) {
  Kernel k;
  for (Vec& r : rows) k.rows.push_back(Meas{std::move(r)});
  k.source_dim = k.rows.empty() ? 0 : k.rows[0].dim();
  return k;
}

harness::Instance ck_instance(std::size_t n, std::size_t m, double slack,
                              std::uint64_t seed) {
  harness::InstanceSpec spec;
  spec.pipeline = "ck-cs";
  spec.n = n;
  spec.m = m;
  spec.slack = slack;
  spec.seed = seed;
  return harness::gen_instance(spec);
}

// Re-evaluates the five flattening guarantees from the output alone.
void check_flatten_conditions(const Kernel& mu, const Fn& f0,
                              const FlattenOutput& out, double delta) {
  const double norm_prime = kernel_norm(out.mu_prime);
  for (std::size_t s : out.U) {
    for (std::size_t t : out.V) CHECK(out.mu_prime.rows[s].masses[t] == 0.0);
    CHECK(pair(out.h0, out.mu_prime.rows[s]) >= norm_prime - delta - 1e-12);
  }
  double move = 0.0;
  for (std::size_t t = 0; t < f0.dim(); ++t)
    move = std::max(move, std::fabs(out.h0.values[t] - f0.values[t]));
  CHECK(move < delta);
  CHECK(sup_norm(out.h0) == 1.0);
  std::vector<bool> in_v(f0.dim(), false);
  for (std::size_t t : out.V) in_v[t] = true;
  for (std::size_t t = 0; t < f0.dim(); ++t)
    if (!in_v[t]) CHECK(std::fabs(out.h0.values[t]) == 1.0);
  CHECK(kernel_norm(kernel_sub(out.mu_prime, mu)) < delta);
}

}  // namespace

TEST_CASE("admissible slack is epsilon squared over 432") {
  CHECK(eta(0.5) == 0.0005787037037037037);
  CHECK(eta(0.25) == 0.00014467592592592592);
  CHECK(eta(1.0) == 0.0023148148148148147);
  CHECK_THROWS_AS(eta(0.0), PreconditionError);
  CHECK_THROWS_AS(eta(2.0), PreconditionError);
}

TEST_CASE("cutoff thresholds are ordered between 1 - delta and 1") {
  for (double delta : {0.01, 0.3, 0.9}) {
    const CutoffParams p = CutoffParams::from_delta(delta);
    CHECK(p.alpha == delta * delta / 12.0);
    CHECK(1.0 - delta < p.a);
    CHECK(p.a < p.b);
    CHECK(p.b < p.c);
    CHECK(p.c < 1.0);
    CHECK(p.c == 1.0 - 0.25 * delta);
  }
  CHECK_THROWS_AS(CutoffParams::from_delta(0.0), PreconditionError);
  CHECK_THROWS_AS(CutoffParams::from_delta(1.0), PreconditionError);
}

TEST_CASE("flattening a function that is already a sign pattern is a no-op") {
  const Kernel mu = make_kernel({{1.0, 0.0}});
  const Fn f0{{1.0, 1.0}};
  const FlattenOutput out = flatten_peak(mu, 0, f0, 0.5);
  CHECK(out.h0.values == f0.values);
  CHECK(out.V.empty());
  CHECK(out.U == std::vector<std::size_t>{0});
  CHECK(out.mu_prime.rows[0].masses == mu.rows[0].masses);
}

TEST_CASE("flattening rejects pairings at or below the slack threshold") {
  const Kernel mu = make_kernel({{1.0, 0.0}});
  // threshold at delta = 0.5 is 1 - 0.25/12 = 0.97916...
  CHECK_THROWS_AS(flatten_peak(mu, 0, Fn{{0.97, 1.0}}, 0.5),
                  PreconditionError);
  CHECK_NOTHROW(flatten_peak(mu, 0, Fn{{0.99, 1.0}}, 0.5));
}

TEST_CASE("flattening moves mass off the flat zone and keeps every bound") {
  // Dyadic masses make the row variation exactly 1.  At delta = 0.6 the
  // peak cutoff is 0.7, so point 2 (value 0.5) forms the flat zone V and
  // the qualifying row must shed its 0.03125 of mass there.
  const Kernel mu = make_kernel(
      {{0.75, -0.21875, 0.03125}, {0.2, 0.3, -0.4}});
  const Fn f0{{1.0, -0.99, 0.5}};
  const double delta = 0.6;
  CHECK(kernel_norm(mu) == 1.0);

  const FlattenOutput out = flatten_peak(mu, 0, f0, delta);
  CHECK(out.V == std::vector<std::size_t>{2});
  CHECK(out.U == std::vector<std::size_t>{0});
  CHECK(out.h0.values == Vec{1.0, -1.0, 0.5});
  CHECK(out.mu_prime.rows[0].masses == Vec{0.75, -0.21875, 0.0});
  CHECK(out.mu_prime.rows[1].masses == mu.rows[1].masses);
  CHECK(kernel_norm(kernel_sub(out.mu_prime, mu)) == 0.03125);
  check_flatten_conditions(mu, f0, out, delta);

  // Trace bookkeeping for the same instance.
  CHECK(out.trace.peak_pos == std::vector<std::size_t>{0});
  CHECK(out.trace.peak_neg == std::vector<std::size_t>{1});
  CHECK(out.trace.above_c == std::vector<std::size_t>{0, 1});
  CHECK(out.trace.cutoffs.b == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("flattening bounds hold on random near-attaining instances") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(500 + trial);
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 8));
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const harness::Instance inst =
        ck_instance(n, m, 1e-4, 9000 + static_cast<std::uint64_t>(trial));

    // Locate the attaining row and orient f0 the way the driver would.
    const Fn f0{inst.point};
    const Fn tf = kernel_apply(inst.kernel, f0);
    std::size_t s0 = 0;
    for (std::size_t s = 1; s < tf.dim(); ++s)
      if (std::fabs(tf.values[s]) > std::fabs(tf.values[s0])) s0 = s;
    Fn fwork = f0;
    if (tf.values[s0] < 0.0)
      for (double& v : fwork.values) v = -v;

    const double delta = 0.1;  // alpha = 8.3e-4 comfortably above the slack
    const FlattenOutput out = flatten_peak(inst.kernel, s0, fwork, delta);
    check_flatten_conditions(inst.kernel, fwork, out, delta);
  }
}

TEST_CASE("an aligned row passes through the contraction step unchanged") {
  const Kernel mu = make_kernel({{0.7, 0.3}});
  const Fn h0{{1.0, 1.0}};
  const JwStepResult res = jw_step(mu, {0}, {}, h0, 0.1, 0.75);
  CHECK(res.s1 == 0);
  CHECK(res.mu_prime.rows[0].masses == mu.rows[0].masses);
  CHECK(res.movement == 0.0);
  CHECK(res.attained == 1.0);
}

TEST_CASE("the contraction step blends, caps, and meets its three bounds") {
  // Row 0 is misaligned by 0.2 of variation at coordinate 2; with
  // delta = 0.25 and r = 0.75 the budget 0.1875 forces a partial blend.
  const Kernel mu = make_kernel({{0.5, -0.3, -0.1, 0.0},
                                 {0.2, 0.2, 0.2, 0.0},
                                 {-0.6, 0.3, 0.0, 0.0}});
  const Fn h0{{1.0, -1.0, 1.0, 0.3}};
  const std::vector<std::size_t> U = {0, 1, 2};
  const std::vector<std::size_t> V = {3};
  const double delta = 0.25, r = 0.75;

  const JwStepResult res = jw_step(mu, U, V, h0, delta, r);
  CHECK(res.s1 == 0);

  // Conclusion i: rows of U still vanish on V.
  for (std::size_t s : U) CHECK(res.mu_prime.rows[s].masses[3] == 0.0);
  // Conclusion ii: the blended row nearly attains the new norm.
  const double attained = pair(h0, res.mu_prime.rows[0]);
  CHECK(attained == res.attained);
  CHECK(attained >= kernel_norm(res.mu_prime) - r * delta);
  CHECK(res.attained == doctest::Approx(0.8875).epsilon(1e-6));
  // Conclusion iii: movement within the budget, measured independently.
  const double moved = kernel_norm(kernel_sub(res.mu_prime, mu));
  CHECK(moved == res.movement);
  CHECK(moved <= r * delta);
  CHECK(moved > 0.18);
  // Rows below the cap stay bitwise.
  CHECK(res.mu_prime.rows[1].masses == mu.rows[1].masses);
  CHECK(res.mu_prime.rows[2].masses == mu.rows[2].masses);
}

TEST_CASE("iterating the step contracts the defect geometrically") {
  const harness::Instance inst = ck_instance(6, 4, 2e-4, 4242);
  const Fn f0{inst.point};
  const Fn tf = kernel_apply(inst.kernel, f0);
  std::size_t s0 = 0;
  for (std::size_t s = 1; s < tf.dim(); ++s)
    if (std::fabs(tf.values[s]) > std::fabs(tf.values[s0])) s0 = s;
  Fn fwork = f0;
  if (tf.values[s0] < 0.0)
    for (double& v : fwork.values) v = -v;

  const double delta0 = 0.12, r = 0.8;
  const FlattenOutput flat = flatten_peak(inst.kernel, s0, fwork, delta0);

  Kernel mu = flat.mu_prime;
  double delta = delta0;
  for (int n = 0; n < 6; ++n) {
    const JwStepResult step = jw_step(mu, flat.U, flat.V, flat.h0, delta, r);
    // Movement and the post-step defect both sit under r^(n+1) * delta0.
    CHECK(step.movement <= r * delta * (1.0 + 1e-12));
    CHECK(kernel_norm(step.mu_prime) - step.attained <=
          r * delta * (1.0 + 1e-9) + 1e-12);
    mu = step.mu_prime;
    delta *= r;
  }
}

TEST_CASE("schedule tail fits under the finishing tolerance") {
  const IterationSchedule s = IterationSchedule::plan(0.1, 0.8, 1e-9);
  REQUIRE(s.step_deltas.size() == s.max_steps + 1);
  CHECK(s.step_deltas.front() == 0.1);
  for (std::size_t n = 1; n < s.step_deltas.size(); ++n)
    CHECK(s.step_deltas[n] == doctest::Approx(0.1 * std::pow(0.8, n)));
  CHECK(s.step_deltas.back() / (1.0 - 0.8) <= 1e-9 * (1.0 + 1e-9));
  CHECK_THROWS_AS(IterationSchedule::plan(0.1, 0.5, 1e-9), PreconditionError);
}

TEST_CASE("a kernel attaining at a sign pattern is returned unchanged") {
  const Kernel T = make_kernel({{0.6, 0.4}, {0.3, 0.5}});
  const Fn f0{{1.0, 1.0}};
  const CkCsResult res = correct_ck_cs(T, f0, 0.5);
  CHECK(res.slack == 0.0);
  CHECK(res.h0.values == f0.values);
  for (std::size_t s = 0; s < T.target_dim(); ++s)
    CHECK(res.S.rows[s].masses == T.rows[s].masses);
  CHECK(res.certificate.dist_point == 0.0);
  CHECK(res.certificate.dist_operator == 0.0);
  CHECK(res.certificate.attained_norm == 1.0);
  CHECK(res.defect == 0.0);
}

TEST_CASE("correcting a nearly attaining pair leaves this kernel in place") {
  const Kernel T = make_kernel({{0.6, 0.4}, {0.3, 0.5}});
  const Fn f0{{1.0, 0.999}};
  const double epsilon = 0.5;
  const CkCsResult res = correct_ck_cs(T, f0, epsilon);

  CHECK(res.slack == 0.00039999999999995595);
  CHECK(res.delta == 0.5 * (std::sqrt(12.0 * res.slack) + epsilon / 6.0));
  CHECK(res.r == 5.0 / 6.0 - res.delta / epsilon);

  // f0 exceeds the peak cutoff everywhere, so the witness is the full sign
  // pattern and the kernel needs no movement at all.
  CHECK(res.h0.values == Vec{1.0, 1.0});
  CHECK(res.certificate.dist_point == 0.0010000000000000009);
  CHECK(res.certificate.dist_operator == 0.0);
  for (std::size_t s = 0; s < T.target_dim(); ++s)
    CHECK(res.S.rows[s].masses == T.rows[s].masses);
  CHECK(res.defect == 0.0);
  CHECK(res.attain_row == 0);
  CHECK(res.certificate.attained_norm == 1.0);

  // Independent oracle confirmation of attainment.
  CHECK(oracle_norm(kernel_as_operator(res.S)).value == 1.0);
  CHECK(sup_norm(kernel_apply(res.S, res.h0)) == 1.0);
}

TEST_CASE("slack boundary separates acceptance from rejection") {
  const Kernel T = make_kernel({{1.0, 0.0}});
  // sup(T f0) = f0(0), so the slack is exactly 1 - f0(0).
  const Fn accept{{1.0 - 0.0005, 1.0}};
  const Fn reject{{1.0 - 0.0006, 1.0}};
  CHECK(0.0005 < eta(0.5));
  CHECK(0.0006 > eta(0.5));
  const CkCsResult res = correct_ck_cs(T, accept, 0.5);
  CHECK(res.certificate.dist_point < 0.5);
  CHECK(res.certificate.dist_operator < 0.5);
  CHECK_THROWS_AS(correct_ck_cs(T, reject, 0.5), PreconditionError);
}

TEST_CASE("driver bounds and bookkeeping on random instances") {
  for (int trial = 0; trial < 60; ++trial) {
    const double epsilon = trial % 2 == 0 ? 0.5 : 1.0;
    Rng rng(77 + trial);
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 8));
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const harness::Instance inst = ck_instance(
        n, m, 0.9 * eta(epsilon), 100 + static_cast<std::uint64_t>(trial));
    const CkCsResult res = correct_ck_cs(inst.kernel, Fn{inst.point}, epsilon);

    CHECK(std::fabs(kernel_norm(res.S) - 1.0) <= kDefaultTol);
    CHECK(res.certificate.dist_point < epsilon);
    CHECK(res.certificate.dist_operator < epsilon);
    CHECK(res.defect <= 1e-12);
    CHECK(res.log.size() == res.steps_used);

    // Defect decays geometrically along the log.
    for (std::size_t k = 0; k < res.log.size(); ++k) {
      CHECK(res.log[k].defect_before <=
            res.delta * std::pow(res.r, static_cast<double>(k)) *
                    (1.0 + 1e-9) +
                1e-12);
    }
    // Total movement telescopes under delta * r / (1 - r) plus the
    // finishing step's 2 * delta_last.
    double total = 0.0;
    for (const StepLog& l : res.log) total += l.movement;
    CHECK(total <= res.delta * res.r / (1.0 - res.r) +
                       2.0 * res.log.back().delta_n + 1e-12);

    // Certificate distances match direct recomputation.
    double dp = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      dp = std::max(dp, std::fabs(res.h0.values[t] - inst.point[t]));
    CHECK(dp == res.certificate.dist_point);
    CHECK(kernel_norm(kernel_sub(res.S, inst.kernel)) ==
          res.certificate.dist_operator);
  }
}
