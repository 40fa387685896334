// Norm-attainment correction for operators from a discrete sup-norm space
// into a low-dimensional Euclidean space.
//
// The pipeline projects through a small-oscillation partition (see
// partition.hpp), identifies the block span with a coordinate sup-norm
// space via the isometry Phi(bump_j) = e_j, corrects the projected
// operator on that space (ucx_correct), and glues the corrected witness
// back together with f0 away from the blocks.

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "bpb/core.hpp"
#include "bpb/partition.hpp"

namespace bpb::ucx {

// Convexity modulus used by default: gamma(t) = t^2 / 16.  Any modulus
// with gamma(t) -> 0 as t -> 0+ may be substituted; every certificate is
// verified directly, so correctness never rests on the modulus choice.
double gamma_default(double t);

using GammaFn = std::function<double(double)>;

// Parameter schedule: delta = epsilon/8 halved until gamma(delta) <
// epsilon/4, then alpha = 0.9 * min(delta, gamma(delta)/2).  The slack
// admitted by correct_ucx is exactly alpha.
struct UcxParams {
  double epsilon = 0.0;
  double delta = 0.0;
  double alpha = 0.0;
  GammaFn gamma_fn;

  static UcxParams plan(double epsilon, GammaFn gamma = gamma_default);
};

// Admissible slack eta(epsilon) = alpha of the planned parameters.
double eta(double epsilon);

// Identifies span{bumps} with the coordinate sup-norm space of dimension
// bumps.size().  Bumps must be 0/1 indicators with pairwise disjoint
// supports; then sup_norm(sum c_j bump_j) = max |c_j| exactly.
struct BlockIsometry {
  std::vector<Fn> bumps;
  std::size_t dimension = 0;  // block count m
  std::size_t ambient = 0;    // underlying point count n

  static BlockIsometry from_bumps(const std::vector<Fn>& bumps);

  // Coefficient extraction; f must be constant on every bump support and
  // zero elsewhere (bitwise), else PreconditionError.
  Vec forward(const Fn& f) const;
  Fn inverse(const Vec& x) const;
  // The composite Phi o P as an m x n sup-to-sup operator (row j is the
  // averaging row of block j).
  GeneralOperator compose_after(const GeneralOperator& P) const;
};

struct UcxCorrection {
  GeneralOperator V;  // corrected operator, norm 1
  Vec x1;             // attainment witness, sup norm 1
  double dist_operator = 0.0;  // ||V - U||
  double dist_point = 0.0;     // sup_norm(x1 - x0)
  double attained = 0.0;       // ||V x1||
  int boost_tries = 0;         // 0 when a short-circuit fired
  double boost_c = 0.0;        // rank-one coefficient actually used
};

// Corrects U (sup-norm^m -> Euclidean^p, norm 1) near x0 (sup norm 1).
//
// pre: ||U x0|| > 1 - gamma(epsilon).
// post (asserted): ||V x1|| = ||V|| = 1 within tol and certified by
//      enumeration; ||V - U|| < epsilon; sup_norm(x1 - x0) < epsilon.
// Search: the vertex of the box {sup x <= 1, sup(x - x0) <= 0.999 epsilon}
// with some coordinate at +-1 maximizing ||U x||; if U already attains
// there (or at x0) the operator is returned unchanged; otherwise a
// rank-one boost c * (Ux1/||Ux1||) (x) (sign(x1_k) e_k) is added with c
// escalating geometrically up to epsilon/4, each candidate re-verified by
// enumeration.  Throws BudgetError with diagnostics if every candidate
// fails; never returns an unverified certificate.
UcxCorrection ucx_correct(const GeneralOperator& U, const Vec& x0,
                          double epsilon, const GammaFn& gamma = gamma_default,
                          double tol = kDefaultTol);

// Per-stage distances of the full pipeline, measured (not inferred).
struct UcxLedger {
  double norm_tpf0 = 0.0;    // ||T P f0||, must exceed 1 - 2 alpha
  double dist_v_u = 0.0;     // ||V - U||
  double dist_u_u1 = 0.0;    // ||U - U1|| = |1 - ||U1|||
  double dist_tp_t = 0.0;    // ||T - T P||
  double chain_total = 0.0;  // sum of the three distances
  double chain_budget = 0.0; // 2 delta + gamma(delta) + alpha
  double glue_radius = 0.0;  // 3 delta + gamma(delta)
};

struct UcxResult {
  GeneralOperator S;  // = V o Phi o P, unit norm
  Fn g0;              // unit witness, sup_norm(g0 - f0) < epsilon
  Fn f1;              // block part of the witness
  BpbCertificate certificate;
  UcxParams params;
  UcxLedger ledger;
  part::PartitionResult partition;
  BlockIsometry phi;
  Vec x0;             // Phi(P f0)
  Vec x1;             // corrected point in the block space
  GeneralOperator U1; // T o Phi^{-1}
  GeneralOperator U;  // U1 normalized
  GeneralOperator V;  // corrected block operator
  std::vector<std::size_t> O;  // gluing region
  Fn psi;             // indicator of O
};

// Full correction driver.
//
// pre: ||T|| = 1 within tol; sup_norm(f0) = 1 within tol;
//      ||T f0|| > 1 - alpha for the planned alpha.
// post: ||S g0|| = ||S|| = 1 within tol, ||S - T|| < epsilon,
//      sup_norm(g0 - f0) < epsilon, and P g0 = P f1 bitwise.
UcxResult correct_ucx(const GeneralOperator& T, const Fn& f0, double epsilon,
                      double tol = kDefaultTol,
                      const GammaFn& gamma = gamma_default);

}  // namespace bpb::ucx
