// Norm-attainment correction for operators from a p-norm space into a
// c0-style coordinate target (finitely many nonzero rows), via truncation
// to a finite sup-norm subspace and a single-row correction there.
//
// The scalar kernel corrects a (functional, point) pair; bpb_into_linf
// lifts it to operators into coordinate sup-norm spaces by rewriting the
// selected row only; correct_predual reduces the c0-style case to that one
// by truncating negligible tail rows.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bpb/core.hpp"

namespace bpb::predual {

// Admissible slack of the row-correction lemma.  Half of the scalar
// kernel's epsilon^2/2 budget is kept aside: the row correction calls the
// scalar kernel at epsilon/2, whose precondition needs slack below
// (epsilon/2)^2 / 2 = epsilon^2 / 8, and the row renormalization consumes
// one more eta_prime of operator distance, which still fits inside the
// (epsilon/2 + epsilon^2/8) < epsilon chain for every epsilon in (0, 1).
double eta_prime(double epsilon);

// Admissible slack of the full pipeline: min(epsilon/4, eta_prime(eps/2)).
double eta(double epsilon);

struct ScalarBpbResult {
  Vec y;                  // unit vector, ||y - x0|| < eps + eps^2
  Vec y_star;             // unit dual vector, ||y_star - x_star|| < eps
  double dist_point = 0.0;
  double dist_functional = 0.0;
  double attained = 0.0;  // y_star(y), 1 within float slack
  double lambda = 0.0;    // dual-perturbation weight (smooth path only)
  std::string path;       // "trivial" | "smooth" | "sup-face" | "l1-lift"
};

// Corrects (x_star, x0) to an exactly attaining pair (y_star, y) on a
// p-norm space.
//
// pre: 0 < epsilon < 1/2; ||x_star||* = 1 within tol; ||x0|| <= 1 + tol;
//      |1 - x_star(x0)| < epsilon^2 / 2.
// post (asserted): y_star(y) = 1 within float slack; ||y - x0|| <
//      epsilon + epsilon^2; ||y_star - x_star|| < epsilon.
// Paths: smooth norms (Euclidean, p in (1, inf)) perturb the dual vector
// toward the norming functional of x0 and sweep the weight geometrically;
// the sup norm trims x_star to the face where x0 is nearly extreme; the
// 1-norm lifts the mass of x0 sitting on nearly-norming coordinates.
// Throws BudgetError with diagnostics if the sweep fails; never returns an
// unverified pair.
ScalarBpbResult scalar_bpb(const Vec& x_star, const Vec& x0,
                           const NormTag& space, double epsilon,
                           double tol = kDefaultTol);

struct LinfCorrection {
  GeneralOperator V;   // norm 1, attains at z0
  Vec z0;              // unit vector, ||z0 - x0|| < epsilon
  std::size_t row = 0; // corrected row index
  double dist_point = 0.0;
  double dist_operator = 0.0;
  double attained = 0.0;
  ScalarBpbResult scalar;
};

// Corrects U (p-norm source -> coordinate sup-norm target, norm 1) near
// x0.  Selects the row with the largest |pairing| against x0 (smallest
// index on ties), corrects that row by scalar_bpb at epsilon/2, and keeps
// every other row bitwise.
//
// pre: ||U x0|| > 1 - eta_prime(epsilon); ||U|| = 1, ||x0|| = 1 within tol.
// post (asserted): ||V z0|| = ||V|| = 1 within tol; ||z0 - x0|| < epsilon;
//      ||V - U|| < epsilon; rows other than `row` unchanged bitwise.
LinfCorrection bpb_into_linf(const GeneralOperator& U, const Vec& x0,
                             double epsilon, double tol = kDefaultTol);

struct PredualParams {
  double epsilon = 0.0;
  double eta = 0.0;    // min(eps/4, eta_prime(eps/2))
  double delta = 0.0;  // half of (1/4) min(eps/4, ||T x0|| - 1 + eta_prime(eps/2))

  static PredualParams plan(double epsilon, double attained_at_x0);
};

struct PredualLedger {
  double tail_norm = 0.0;     // max dual norm of rows beyond m, <= delta
  double norm_pt = 0.0;       // ||PT||
  double dist_r_v = 0.0;      // ||V - R|| from the row correction
  double dist_operator = 0.0; // ||S - T||
  double dist_point = 0.0;    // ||z0 - x0||
};

struct PredualResult {
  GeneralOperator S;  // finite rank: rows beyond m are exactly zero
  Vec z0;
  BpbCertificate certificate;
  PredualParams params;
  PredualLedger ledger;
  std::vector<Vec> net;   // images of the source-ball net under T
  std::size_t m = 0;      // truncation dimension
  GeneralOperator R;      // renormalized truncation PT / ||PT||
  LinfCorrection inner;   // row correction inside the truncation
};

// Options for the source-ball net recorded in PredualResult::net.  The net
// always contains the image of x0 and of the norming vector of every
// nonzero row; those attainers make the truncation tail bound exact, so
// the grid part is informational and budget-capped.
struct SourceNetOptions {
  std::size_t max_points = 50000;
  std::size_t grid_dim_cap = 4;  // grid skipped above this source dimension
};

// Full correction driver.
//
// pre: 0 < epsilon < 1; ||T|| = 1 within tol;
//      ||T x0|| > 1 - eta(epsilon); x0 unit within tol.
// post: ||S z0|| = ||S|| = 1 within tol; ||z0 - x0|| < epsilon;
//      ||S - T|| < epsilon; rows of S beyond the truncation dimension are
//      exactly zero.
PredualResult correct_predual(const GeneralOperator& T, const Vec& x0,
                              double epsilon, double tol = kDefaultTol,
                              const SourceNetOptions& net_opts = {});

}  // namespace bpb::predual
