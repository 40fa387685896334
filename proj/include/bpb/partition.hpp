// Block partitions and norm-one averaging projections.
//
// Given an operator T from a discrete sup-norm space into a low-dimensional
// Euclidean space and a reference function f0, build_partition produces
// disjoint blocks K_j on which f0 oscillates by less than epsilon, together
// with the weighted averaging projection
//
//   (P f)(t) = (1/mu(K_j)) * sum_{t' in K_j} f(t') mu(t')   for t in K_j,
//
// where mu is the total-variation envelope of a finite net covering the
// adjoint image of the dual ball.  P is idempotent with operator norm one,
// and ||T - T P|| < epsilon, verified by enumeration.

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "bpb/core.hpp"

namespace bpb::part {

struct NetOptions {
  std::size_t max_points = 120000;  // lattice budget before coarsening
  std::size_t target_dim_cap = 4;   // largest admissible Euclidean dimension
  bool strict = false;              // throw BudgetError instead of coarsening
  std::size_t covering_checks = 64; // Monte-Carlo covering probe count
  std::uint64_t covering_seed = 12345;
};

struct NetResult {
  std::vector<Meas> measures;      // adjoint pushes of the grid, plus +-rows
  double pitch = 0.0;              // Euclidean grid pitch actually used
  double requested_radius = 0.0;
  double achieved_radius = 0.0;    // lipschitz * pitch * sqrt(p) / 2
  bool coarsened = false;          // budget forced achieved > requested
  double lipschitz = 0.0;          // sum of Euclidean column norms
};

// Covers the adjoint image T*(unit dual ball) by finitely many measures in
// total variation.  A cubic lattice of pitch `pitch` is pushed through the
// adjoint; every point of the ball rounds to a kept lattice point within
// pitch*sqrt(p)/2, so the image is covered within achieved_radius.  The
// adjoint pushes of +-(coordinate duals), i.e. the signed rows of T, are
// always included.  The covering claim is spot-checked on random unit dual
// vectors before returning.
//
// pre: T has sup-norm source and Euclidean target of dimension at most
//      opts.target_dim_cap.
// Throws BudgetError when opts.strict and the budget forces coarsening,
// and VerificationError if a covering probe fails.
NetResult dual_ball_net(const GeneralOperator& T, double radius,
                        const NetOptions& opts = {});

struct PartitionProjection {
  std::vector<std::vector<std::size_t>> blocks;  // disjoint, positive weight
  std::vector<Fn> bumps;     // indicator of each block
  Meas weight;               // mu; zero exactly on trimmed points
  GeneralOperator projector; // P as a sup-to-sup matrix
};

// Intermediate data of the construction, recorded for audit.  The two
// inner-regularization steps of the general theory lose zero mass in the
// discrete setting, so `carriers` and `refined` document the identity maps
// explicitly: carriers are the level sets minus mu-null points, refined the
// carriers after the oscillation cut.
struct PartitionTrace {
  std::vector<Meas> net;            // mu_i
  double net_pitch = 0.0;
  double net_radius_requested = 0.0;
  double net_radius_achieved = 0.0;
  bool net_coarsened = false;
  std::size_t net_size = 0;         // t

  std::vector<Vec> densities;       // g_i = d mu_i / d mu (0 where trimmed)
  std::vector<Vec> simple_approx;   // s_i: g_i quantized to pitch rho
  double quant_pitch = 0.0;         // rho
  double quant_error_max = 0.0;     // max_i ||g_i - s_i||_{L1(mu)} < eps/12

  std::vector<std::size_t> trimmed; // mu-null points
  std::vector<std::vector<std::size_t>> level_sets;  // A_j
  std::vector<std::vector<std::size_t>> carriers;    // C_j
  std::vector<std::vector<std::size_t>> refined;     // the final blocks
  std::size_t level_count = 0;      // m0
  std::vector<std::size_t> refine_counts;  // blocks produced per level set

  std::vector<Vec> alpha;           // alpha[j][i]: s_i value on level set j
  std::vector<Vec> beta;            // beta[j][i]: s_i value on final block j
  double coeff_bound = 0.0;         // M = max |alpha|
  double chain_bound_max = 0.0;     // max_i tv(mu_i - sum_j beta[j][i] mu|K_j)
};

struct PartitionResult {
  PartitionProjection projection;
  PartitionTrace trace;
};

// Builds the partition and projection for (T, f0, epsilon).
//
// pre: epsilon > 0; f0 matches the source of T; T as in dual_ball_net.
// post: osc(f0, K_j) < epsilon on every block; bumps are exact indicators
//       with pairwise disjoint supports; P is idempotent with operator
//       norm 1 (empty partition gives P = 0); operator norm of (T - TP)
//       is < epsilon, certified by enumeration.
// A zero operator yields the empty partition and P = 0.
PartitionResult build_partition(const GeneralOperator& T, const Fn& f0,
                                double epsilon, double tol = kDefaultTol,
                                const NetOptions& opts = {});

// Applies the projection to a function (P f; returns f-sized output).
Fn project(const PartitionProjection& p, const Fn& f);

}  // namespace bpb::part
