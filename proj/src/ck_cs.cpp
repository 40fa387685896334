#include "bpb/ck_cs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bpb::ckcs {

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw PreconditionError(std::string(what) + ": not finite");
  return v;
}

// Scales `row` so its total variation does not exceed `target`, verifying
// the bound on the rounded result and nudging down if a final rounding
// pushed it above.
void cap_row(Vec& row, double target) {
  double tv = 0.0;
  for (double v : row) tv += std::fabs(v);
  if (tv <= target) return;
  double factor = target / tv;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Vec scaled(row.size());
    double stv = 0.0;
    for (std::size_t t = 0; t < row.size(); ++t) {
      scaled[t] = row[t] * factor;
      stv += std::fabs(scaled[t]);
    }
    if (stv <= target) {
      row = std::move(scaled);
      return;
    }
    factor *= 1.0 - 5e-16;
  }
  throw ContractError("cap_row: scaling failed to land under the target");
}

}  // namespace

double eta(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 2.0))
    throw PreconditionError("eta: epsilon must lie in (0, 2)");
  return epsilon * epsilon / 432.0;
}

CutoffParams CutoffParams::from_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw PreconditionError("CutoffParams: delta must lie in (0, 1)");
  CutoffParams p;
  p.delta = delta;
  p.alpha = delta * delta / 12.0;
  p.a = 1.0 - 0.75 * delta;
  p.b = 1.0 - 0.5 * delta;
  p.c = 1.0 - 0.25 * delta;
  return p;
}

FlattenOutput flatten_peak(const Kernel& mu, std::size_t s0, const Fn& f0,
                           double delta, double tol) {
  mu.validate();
  if (s0 >= mu.target_dim())
    throw PreconditionError("flatten_peak: s0 out of range");
  if (f0.dim() != mu.source_dim)
    throw PreconditionError("flatten_peak: f0 dimension mismatch");
  const CutoffParams cut = CutoffParams::from_delta(checked(delta, "delta"));
  if (std::fabs(kernel_norm(mu) - 1.0) > tol)
    throw PreconditionError("flatten_peak: kernel norm must be 1");
  if (std::fabs(sup_norm(f0) - 1.0) > tol)
    throw PreconditionError("flatten_peak: f0 must have sup norm 1");
  const double pairing = pair(f0, mu.rows[s0]);
  if (!(pairing > 1.0 - cut.alpha))
    throw PreconditionError("flatten_peak: pairing slack exceeds delta^2/12");

  const std::size_t n = mu.source_dim;
  FlattenOutput out;
  FlattenTrace& tr = out.trace;
  tr.cutoffs = cut;

  const HahnSplit hahn = hahn_split(mu.rows[s0]);
  tr.pos_set = hahn.positive;
  tr.neg_set = hahn.negative;

  tr.u.values.assign(n, 0.0);
  tr.f.values.assign(n, 0.0);
  out.h0.values.assign(n, 0.0);
  std::vector<bool> on_peak(n, false);
  std::vector<bool> row0_nonneg(n, true);
  for (std::size_t t : hahn.negative) row0_nonneg[t] = false;
  for (std::size_t t = 0; t < n; ++t) {
    const double v = f0.values[t];
    if (v > cut.b) tr.peak_pos.push_back(t);
    if (v < -cut.b) tr.peak_neg.push_back(t);
    if (std::fabs(v) > cut.a) tr.above_a.push_back(t);
    if (std::fabs(v) > cut.c) {
      tr.above_c.push_back(t);
      if ((v > 0.0) == row0_nonneg[t]) tr.signed_match_c.push_back(t);
    }
    on_peak[t] = std::fabs(v) > cut.b;
    if (on_peak[t]) {
      tr.u.values[t] = 1.0;
      out.h0.values[t] = std::copysign(1.0, v);
    } else {
      tr.f.values[t] = 1.0;
      out.h0.values[t] = v;
      out.V.push_back(t);
    }
  }

  // Row s qualifies for U when its pairing against h0 restricted to the
  // peak exceeds 1 - delta and it concentrates above 1 - delta of its mass
  // where |f0| > c.
  tr.g.assign(mu.target_dim(), 0.0);
  for (std::size_t s = 0; s < mu.target_dim(); ++s) {
    double peak_pair = 0.0;
    double tight_mass = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (on_peak[t]) peak_pair += out.h0.values[t] * mu.rows[s].masses[t];
      if (std::fabs(f0.values[t]) > cut.c)
        tight_mass += std::fabs(mu.rows[s].masses[t]);
    }
    if (peak_pair > 1.0 - delta && tight_mass > 1.0 - delta) {
      out.U.push_back(s);
      tr.g[s] = 1.0;
    }
  }
  if (tr.g[s0] == 0.0)
    throw ContractError(
        "flatten_peak: s0 failed to qualify for U; the pairing estimates "
        "guarantee it under the stated precondition");

  out.mu_prime = mu;
  for (std::size_t s : out.U)
    for (std::size_t t : out.V) out.mu_prime.rows[s].masses[t] = 0.0;

  // Postconditions, evaluated exhaustively.
  const double norm_prime = kernel_norm(out.mu_prime);
  for (std::size_t s : out.U) {
    for (std::size_t t : out.V)
      if (out.mu_prime.rows[s].masses[t] != 0.0)
        throw ContractError("flatten_peak: condition i violated");
    if (!(pair(out.h0, out.mu_prime.rows[s]) >= norm_prime - delta - tol))
      throw ContractError("flatten_peak: condition ii violated");
  }
  double move = 0.0;
  for (std::size_t t = 0; t < n; ++t)
    move = std::max(move, std::fabs(out.h0.values[t] - f0.values[t]));
  if (!(move < delta)) throw ContractError("flatten_peak: condition iii violated");
  if (sup_norm(out.h0) != 1.0)
    throw ContractError("flatten_peak: condition iv violated (sup norm)");
  for (std::size_t t = 0; t < n; ++t)
    if (on_peak[t] && std::fabs(out.h0.values[t]) != 1.0)
      throw ContractError("flatten_peak: condition iv violated (off V)");
  if (!(kernel_norm(kernel_sub(out.mu_prime, mu)) < delta))
    throw ContractError("flatten_peak: condition v violated");
  return out;
}

// Align-and-cap step.  Write T1 = tv(row_{s1}), A = pair(h0, row_{s1}) for
// the best row s1, and d = T1 - A (twice the h0-misaligned mass, since
// |h0| = 1 wherever the row lives).  The fully aligned row nu(t) =
// h0(t) |row(t)| satisfies tv(nu) = T1 and pair(h0, nu) = T1, and
// tv(nu - row) = d.  Blending row' = row + theta (nu - row) with
// theta = min(1, r delta / d) gives
//   movement of s1:  theta d = min(d, r delta) <= r delta,
//   new pairing a' = A + theta d,
//   tv(row') = T1 - theta d          if theta = 1 (then tv = a'),
//            = T1 - r delta          if theta < 1.
// Every other row is capped at a' + r delta, moving it by at most
// ||mu|| - a' - r delta <= delta - r delta < r delta since r > 1/2.  The
// s1 row stays under the cap: for theta < 1 that reads
// T1 - r delta <= A + 2 r delta + (T1 - A - d)... i.e. d <= 3 r delta,
// true because d <= delta < 3 r delta when r > 1/3.  Hence all three
// conclusions hold for any r in (2/3, 1).
JwStepResult jw_step(const Kernel& mu, const std::vector<std::size_t>& U,
                     const std::vector<std::size_t>& V, const Fn& h0,
                     double delta, double r, bool finishing) {
  mu.validate();
  if (h0.dim() != mu.source_dim)
    throw PreconditionError("jw_step: h0 dimension mismatch");
  if (!(r > 2.0 / 3.0 && r < 1.0))
    throw PreconditionError("jw_step: r must lie in (2/3, 1)");
  if (!(checked(delta, "delta") > 0.0))
    throw PreconditionError("jw_step: delta must be positive");
  if (U.empty()) throw PreconditionError("jw_step: U must be non-empty");

  std::vector<bool> in_v(mu.source_dim, false);
  for (std::size_t t : V) {
    if (t >= mu.source_dim) throw PreconditionError("jw_step: V index range");
    in_v[t] = true;
  }
  if (sup_norm(h0) > 1.0 + kFloatSlack)
    throw PreconditionError("jw_step: h0 must lie in the unit ball");
  for (std::size_t t = 0; t < mu.source_dim; ++t)
    if (!in_v[t] && std::fabs(h0.values[t]) != 1.0)
      throw PreconditionError("jw_step: |h0| must equal 1 off V");

  const double norm_mu = kernel_norm(mu);
  double best = -2.0;
  std::size_t s1 = U.front();
  for (std::size_t s : U) {
    if (s >= mu.target_dim()) throw PreconditionError("jw_step: U index range");
    for (std::size_t t : V)
      if (mu.rows[s].masses[t] != 0.0)
        throw PreconditionError("jw_step: rows in U must vanish on V");
    const double p = pair(h0, mu.rows[s]);
    if (p > best) {
      best = p;
      s1 = s;
    }
  }
  if (!(best >= norm_mu - delta - kFloatSlack))
    throw PreconditionError("jw_step: no row in U nearly attains");

  JwStepResult res;
  res.mu_prime = mu;
  res.s1 = s1;

  const Vec& row = mu.rows[s1].masses;
  Vec aligned(row.size());
  for (std::size_t t = 0; t < row.size(); ++t)
    aligned[t] = h0.values[t] * std::fabs(row[t]);
  double d = 0.0;
  for (std::size_t t = 0; t < row.size(); ++t)
    d += std::fabs(aligned[t] - row[t]);

  const double budget = r * delta;
  if (finishing || d <= budget) {
    res.mu_prime.rows[s1].masses = aligned;
  } else {
    // Aim a hair under the budget so the movement re-derived from the
    // rounded row stays under r * delta as well.
    const double blend_goal = 0.999999 * budget;
    double theta = blend_goal / d;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vec cand(row.size());
      double mv = 0.0;
      for (std::size_t t = 0; t < row.size(); ++t) {
        const double diff = theta * (aligned[t] - row[t]);
        cand[t] = row[t] + diff;
        mv += std::fabs(diff);
      }
      if (mv <= blend_goal) {
        res.mu_prime.rows[s1].masses = std::move(cand);
        break;
      }
      theta *= 1.0 - 5e-16;
      if (attempt == 7)
        throw ContractError("jw_step: blend overshoot would not settle");
    }
  }

  res.attained = pair(h0, res.mu_prime.rows[s1]);
  // The contract admits any cap at or below attained + budget; staying a
  // hair below keeps conclusion ii strict under independent re-evaluation
  // while the cap movement bound (1 - 0.999999 r) delta < r delta still
  // holds for every r > 2/3.
  const double cap =
      finishing ? res.attained : res.attained + 0.999999 * budget;
  for (std::size_t s = 0; s < mu.target_dim(); ++s)
    if (s != s1) cap_row(res.mu_prime.rows[s].masses, cap);

  res.movement = kernel_norm(kernel_sub(res.mu_prime, mu));

  // Conclusions, asserted on every call.
  for (std::size_t s : U)
    for (std::size_t t : V)
      if (res.mu_prime.rows[s].masses[t] != 0.0)
        throw ContractError("jw_step: conclusion i violated");
  const double norm_prime = kernel_norm(res.mu_prime);
  if (!(res.attained >= norm_prime - budget))
    throw ContractError("jw_step: conclusion ii violated");
  if (!(res.movement <= (finishing ? 2.0 * delta : budget)))
    throw ContractError("jw_step: conclusion iii violated");
  return res;
}

IterationSchedule IterationSchedule::plan(double delta0, double r, double tol) {
  if (!(r > 2.0 / 3.0 && r < 1.0))
    throw PreconditionError("IterationSchedule: r must lie in (2/3, 1)");
  if (!(delta0 > 0.0) || !(tol > 0.0))
    throw PreconditionError("IterationSchedule: delta0 and tol must be positive");
  IterationSchedule s;
  s.r = r;
  s.delta0 = delta0;
  const double goal = tol * (1.0 - r);
  double steps = 0.0;
  if (delta0 > goal) steps = std::ceil(std::log(goal / delta0) / std::log(r));
  if (!(steps >= 0.0) || steps > 1e6)
    throw ContractError("IterationSchedule: implausible step count");
  s.max_steps = static_cast<std::size_t>(steps);
  s.step_deltas.reserve(s.max_steps + 1);
  double d = delta0;
  for (std::size_t n = 0; n <= s.max_steps; ++n) {
    s.step_deltas.push_back(d);
    d *= r;
  }
  if (!(s.step_deltas.back() / (1.0 - r) <= tol * (1.0 + 1e-9)))
    throw ContractError("IterationSchedule: tail exceeds the finishing budget");
  return s;
}

CkCsResult correct_ck_cs(const Kernel& T, const Fn& f0, double epsilon,
                         double tol) {
  T.validate();
  if (!(epsilon > 0.0 && epsilon < 2.0))
    throw PreconditionError("correct_ck_cs: epsilon must lie in (0, 2)");
  if (!(tol > 0.0)) throw PreconditionError("correct_ck_cs: tol must be positive");
  if (std::fabs(kernel_norm(T) - 1.0) > tol)
    throw PreconditionError("correct_ck_cs: kernel norm must be 1");
  if (std::fabs(sup_norm(f0) - 1.0) > tol)
    throw PreconditionError("correct_ck_cs: f0 must have sup norm 1");

  const Fn Tf0 = kernel_apply(T, f0);
  std::size_t s_star = 0;
  for (std::size_t s = 1; s < Tf0.dim(); ++s)
    if (std::fabs(Tf0.values[s]) > std::fabs(Tf0.values[s_star])) s_star = s;
  const double attained0 = std::fabs(Tf0.values[s_star]);
  if (!(attained0 > 1.0 - eta(epsilon)))
    throw PreconditionError(
        "correct_ck_cs: attainment slack exceeds epsilon^2/432");

  const bool flip = Tf0.values[s_star] < 0.0;
  Fn fwork = f0;
  if (flip)
    for (double& v : fwork.values) v = -v;

  CkCsResult res;
  res.slack = 1.0 - attained0;
  // delta sits strictly between sqrt(12 sigma) (forced by the flattening
  // precondition) and epsilon/6; r is the midpoint of the admissible
  // interval (2/3, 1 - 2 delta/epsilon), so 2 delta / (1 - r) < epsilon
  // with margin.
  res.delta =
      0.5 * (std::sqrt(12.0 * std::max(res.slack, 0.0)) + epsilon / 6.0);
  res.r = 5.0 / 6.0 - res.delta / epsilon;

  const IterationSchedule sched = IterationSchedule::plan(res.delta, res.r, tol);
  FlattenOutput flat = flatten_peak(T, s_star, fwork, res.delta, tol);

  Kernel mu = flat.mu_prime;
  JwStepResult step;
  for (std::size_t n = 0; n <= sched.max_steps; ++n) {
    const bool finishing = n == sched.max_steps;
    double defect_before = kernel_norm(mu);
    {
      double b = -2.0;
      for (std::size_t s : flat.U) b = std::max(b, pair(flat.h0, mu.rows[s]));
      defect_before -= b;
    }
    step = jw_step(mu, flat.U, flat.V, flat.h0, sched.step_deltas[n], res.r,
                   finishing);
    res.log.push_back({n, sched.step_deltas[n], defect_before, step.movement,
                       step.attained, step.s1});
    mu = step.mu_prime;
  }
  res.steps_used = sched.max_steps + 1;
  res.attain_row = step.s1;

  const double norm_fin = kernel_norm(mu);
  if (!(norm_fin > 0.0))
    throw ContractError("correct_ck_cs: final kernel collapsed to zero");
  // Inputs that already attain must come back bit-identical, so skip the
  // rescale when the norm sits within kFloatSlack of 1.
  res.S = std::fabs(norm_fin - 1.0) <= kFloatSlack
              ? mu
              : kernel_scale(mu, 1.0 / norm_fin);

  res.h0 = flat.h0;
  if (flip)
    for (double& v : res.h0.values) v = -v;

  const Fn Sw = kernel_apply(res.S, res.h0);
  const double attained = std::fabs(Sw.values[res.attain_row]);
  const double norm_S = kernel_norm(res.S);
  res.defect = norm_S - attained;

  double dist_point = 0.0;
  for (std::size_t t = 0; t < f0.dim(); ++t)
    dist_point =
        std::max(dist_point, std::fabs(res.h0.values[t] - f0.values[t]));
  const double dist_op = kernel_norm(kernel_sub(res.S, T));

  if (std::fabs(norm_S - 1.0) > tol || std::fabs(attained - 1.0) > tol)
    throw VerificationError("correct_ck_cs: attainment check failed");
  if (!(dist_point < epsilon))
    throw VerificationError("correct_ck_cs: witness distance check failed");
  if (!(dist_op < epsilon))
    throw VerificationError("correct_ck_cs: operator distance check failed");

  res.certificate.witness = res.h0.values;
  res.certificate.attained_norm = attained;
  res.certificate.dist_point = dist_point;
  res.certificate.dist_operator = dist_op;
  res.certificate.epsilon = epsilon;
  res.certificate.tol = tol;
  return res;
}

}  // namespace bpb::ckcs
