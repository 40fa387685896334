// Norm-attainment correction for kernel operators between discrete
// sup-norm spaces.
//
// Given a kernel T of norm one and a unit function f0 with
// sup|T f0| > 1 - eta(epsilon), the driver produces a unit-norm kernel S
// attaining its norm at a unit function h close to f0, with
// ||h - f0|| < epsilon and ||S - T|| < epsilon.  The construction has
// three stages:
//
//   1. flatten_peak: replace f0 by a function h0 that is exactly +-1 on
//      the peak set where |f0| is already close to 1, and zero out the
//      complementary masses of the rows that nearly attain, so that those
//      rows live entirely on the peak.
//   2. jw_step: one contraction step that aligns the best row with h0 and
//      caps the other rows, shrinking the attainment defect by a factor r
//      while moving the kernel by at most r * delta.
//   3. correct_ck_cs: the geometric driver; iterates jw_step with
//      delta_n = r^n * delta, finishes with an exact alignment step, and
//      normalizes.

#pragma once

#include <cstddef>
#include <vector>

#include "bpb/core.hpp"

namespace bpb::ckcs {

// Largest admissible attainment slack for a requested distance epsilon.
double eta(double epsilon);

// Threshold constants used by flatten_peak.  The cutoffs satisfy
// 1 - delta < a < b < c < 1 with c = 1 - delta/4 and a, b equispaced
// below it; alpha = delta^2/12 is the pairing slack the flattening
// tolerates.
struct CutoffParams {
  double delta = 0.0;
  double alpha = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  static CutoffParams from_delta(double delta);
};

// Intermediate sets and functions of the flattening construction, kept for
// inspection by tests and reports.  Sets are index lists into the source
// (points of K) except `u0_rows`, which indexes rows (points of S).
struct FlattenTrace {
  std::vector<std::size_t> peak_pos;    // { t : f0(t) > b }
  std::vector<std::size_t> peak_neg;    // { t : f0(t) < -b }
  std::vector<std::size_t> above_a;     // { t : |f0(t)| > a }
  std::vector<std::size_t> above_c;     // { t : |f0(t)| > c }
  std::vector<std::size_t> signed_match_c;  // above_c points whose f0 sign
                                            // matches the row-s0 mass sign
  std::vector<std::size_t> pos_set;     // Hahn split of row s0
  std::vector<std::size_t> neg_set;
  Fn u;                                 // indicator of the peak
  Fn f;                                 // indicator of V
  std::vector<double> g;                // indicator (over rows) of U
  CutoffParams cutoffs;
};

// Result of flatten_peak.  U lists the rows that vanish on V and pair with
// h0 above kernel_norm(mu_prime) - delta; V is the flat zone where
// |h0| < 1; h0 is exactly +-1 off V.
struct FlattenOutput {
  Kernel mu_prime;
  std::vector<std::size_t> U;
  std::vector<std::size_t> V;
  Fn h0;
  FlattenTrace trace;
};

// Flattens the peak of f0 and prunes the nearly attaining rows.
//
// pre: kernel_norm(mu) = 1 within tol, sup_norm(f0) = 1 within tol,
//      0 < delta < 1, and pair(f0, row_{s0}) > 1 - delta^2/12.
// post (each asserted before returning):
//   i)   every row in U carries zero mass on V, exactly;
//   ii)  pair(h0, row'_s) >= kernel_norm(mu_prime) - delta for s in U;
//   iii) sup_norm(h0 - f0) < delta;
//   iv)  sup_norm(h0) = 1 and |h0(t)| = 1 for t off V;
//   v)   kernel_norm(mu_prime - mu) < delta.
// Throws PreconditionError on bad input and ContractError if s0 fails to
// qualify for U (impossible when the precondition holds).
FlattenOutput flatten_peak(const Kernel& mu, std::size_t s0, const Fn& f0,
                           double delta, double tol = kDefaultTol);

// One align-and-cap contraction step.
struct JwStepResult {
  Kernel mu_prime;
  std::size_t s1 = 0;    // row realizing the new near-attainment
  double attained = 0.0; // pair(h0, row'_{s1})
  double movement = 0.0; // kernel_norm(mu_prime - mu)
};

// Contracts the attainment defect of `mu` by the factor r.
//
// pre: rows listed in U vanish on V exactly; max over U of pair(h0, row)
//      >= kernel_norm(mu) - delta; sup_norm(h0) = 1 with |h0| = 1 off V;
//      2/3 < r < 1; delta > 0.
// post (asserted): rows in U still vanish on V exactly;
//      pair(h0, row'_{s1}) >= kernel_norm(mu_prime) - r*delta;
//      kernel_norm(mu_prime - mu) <= r*delta.
// With finishing = true the step aligns fully and caps every other row at
// the attained value, so kernel_norm(mu_prime) equals the attained pairing
// exactly, at movement <= delta.
JwStepResult jw_step(const Kernel& mu, const std::vector<std::size_t>& U,
                     const std::vector<std::size_t>& V, const Fn& h0,
                     double delta, double r, bool finishing = false);

// Geometric iteration plan: deltas[n] = r^n * delta0 for n = 0..max_steps,
// sized so the tail r^max_steps * delta0 / (1 - r) is at most tol.
struct IterationSchedule {
  double r = 0.0;
  double delta0 = 0.0;
  std::size_t max_steps = 0;
  std::vector<double> step_deltas;

  static IterationSchedule plan(double delta0, double r, double tol);
};

// Per-iteration record of the driver.
struct StepLog {
  std::size_t step = 0;
  double delta_n = 0.0;
  double defect_before = 0.0;
  double movement = 0.0;
  double attained = 0.0;
  std::size_t s1 = 0;
};

struct CkCsResult {
  Kernel S;            // unit-norm corrected kernel
  Fn h0;               // unit witness, sup_norm(h0 - f0) < epsilon
  BpbCertificate certificate;
  std::size_t steps_used = 0;
  std::size_t attain_row = 0;  // row where |S h0| = 1
  double slack = 0.0;          // measured 1 - sup|T f0|
  double delta = 0.0;          // schedule parameter
  double r = 0.0;              // contraction ratio
  double defect = 0.0;         // final kernel_norm(S) - pair(h0, best row)
  std::vector<StepLog> log;
};

// Full correction driver.
//
// pre: kernel_norm(T) = 1 within tol, sup_norm(f0) = 1 within tol,
//      0 < epsilon < 2, and sup_norm(T f0) > 1 - epsilon^2/432.
// post: kernel_norm(S) = 1 and |(S h)(attain_row)| = 1 within tol for the
//      returned witness h, with sup_norm(h - f0) < epsilon and
//      kernel_norm(S - T) < epsilon.
CkCsResult correct_ck_cs(const Kernel& T, const Fn& f0, double epsilon,
                         double tol = kDefaultTol);

}  // namespace bpb::ckcs
