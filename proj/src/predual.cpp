#include "bpb/predual.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpb::predual {

namespace {

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec sub(const Vec& a, const Vec& b) {
  Vec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

// Measures a candidate pair against every scalar_bpb postcondition.  The
// bounds are strict; callers on closed-form paths treat a failure as an
// internal defect, the sweep just moves to the next weight.
struct CandidateCheck {
  bool ok = false;
  ScalarBpbResult result;
};

CandidateCheck check_candidate(Vec y, Vec y_star, const Vec& x_star,
                               const Vec& x0, const NormTag& space,
                               double epsilon, double tol,
                               const std::string& path, double lambda) {
  CandidateCheck c;
  c.result.y = std::move(y);
  c.result.y_star = std::move(y_star);
  c.result.attained = dot(c.result.y_star, c.result.y);
  c.result.dist_point = vector_norm(sub(c.result.y, x0), space);
  c.result.dist_functional =
      dual_norm(sub(c.result.y_star, x_star), space);
  c.result.lambda = lambda;
  c.result.path = path;
  c.ok = std::abs(c.result.attained - 1.0) <= tol &&
         std::abs(vector_norm(c.result.y, space) - 1.0) <= tol &&
         std::abs(dual_norm(c.result.y_star, space) - 1.0) <= tol &&
         c.result.dist_point < epsilon + epsilon * epsilon &&
         c.result.dist_functional < epsilon;
  return c;
}

ScalarBpbResult scalar_smooth(const Vec& x_star, const Vec& x0,
                              const NormTag& space, double epsilon,
                              double tol) {
  // Perturb the functional toward the norming functional of x0 and
  // renormalize.  The attainer of the perturbed functional is closed form,
  // so attainment is exact; the right perturbation weight depends on the
  // local geometry, so it is swept geometrically around epsilon/4 and each
  // candidate is verified before acceptance.
  const Vec j = norming_vector(x0, space.dual());
  const double lam0 = epsilon / 4.0;

  std::vector<double> weights;
  double up = lam0;
  for (int k = 0; k <= 40; ++k, up *= 1.5) weights.push_back(up);
  double down = lam0;
  for (int k = 1; k <= 40; ++k) {
    down *= 0.67;
    weights.push_back(down);
  }

  double best_score = std::numeric_limits<double>::infinity();
  std::string best_note = "no finite candidate";
  for (double lam : weights) {
    Vec w(x_star.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = x_star[i] + lam * j[i];
    const double wn = dual_norm(w, space);
    if (!(wn > 0.0)) continue;
    for (double& wi : w) wi /= wn;
    Vec attainer = norming_vector(w, space);
    CandidateCheck c =
        check_candidate(std::move(attainer), std::move(w), x_star, x0, space,
                        epsilon, tol, "smooth", lam);
    if (c.ok) return c.result;
    const double score =
        std::max(c.result.dist_point - (epsilon + epsilon * epsilon),
                 c.result.dist_functional - epsilon);
    if (score < best_score) {
      std::ostringstream os;
      os << "lambda=" << fmt17(lam) << " dist_point="
         << fmt17(c.result.dist_point) << " dist_functional="
         << fmt17(c.result.dist_functional);
      best_score = score;
      best_note = os.str();
    }
  }
  throw BudgetError("scalar_bpb: perturbation sweep exhausted (best " +
                    best_note + ")");
}

ScalarBpbResult scalar_sup_face(const Vec& x_star, const Vec& x0,
                                double epsilon, double tol) {
  // Restrict the functional to the coordinates where x0 is within epsilon
  // of extreme and renormalize; push x0 to the matching sign pattern
  // there.  The functional mass elsewhere is below epsilon/2 (each
  // discarded coordinate contributes more than epsilon of the pairing
  // slack), which gives the epsilon bound on the functional move.
  const std::size_t n = x_star.size();
  std::vector<char> in_face(n, 0);
  double face_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (x_star[i] == 0.0) continue;
    const double s = std::copysign(1.0, x_star[i]);
    if (s * x0[i] >= 1.0 - epsilon) {
      in_face[i] = 1;
      face_mass += std::abs(x_star[i]);
    }
  }
  if (face_mass <= 0.0) {
    throw ContractError("scalar_bpb: sup-norm face is empty despite the "
                        "pairing precondition");
  }
  Vec y = x0;
  Vec y_star(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_face[i]) continue;
    y[i] = std::copysign(1.0, x_star[i]);
    y_star[i] = x_star[i] / face_mass;
  }
  CandidateCheck c = check_candidate(std::move(y), std::move(y_star), x_star,
                                     x0, NormTag::sup(), epsilon, tol,
                                     "sup-face", 0.0);
  if (!c.ok) {
    throw ContractError("scalar_bpb: sup-norm face construction missed its "
                        "guaranteed bounds");
  }
  return c.result;
}

ScalarBpbResult scalar_l1_lift(const Vec& x_star, const Vec& x0,
                               double epsilon, double tol) {
  // Keep the mass of x0 sitting on coordinates where the functional is
  // within epsilon of norming, renormalize it to a unit vector, and snap
  // the functional to the exact signs there.  The discarded mass is below
  // epsilon/2 by the same slack accounting as the sup-norm face.
  const std::size_t n = x0.size();
  std::vector<char> lifted(n, 0);
  double kept_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (x0[i] == 0.0) continue;
    const double s = std::copysign(1.0, x0[i]);
    if (s * x_star[i] > 1.0 - epsilon) {
      lifted[i] = 1;
      kept_mass += std::abs(x0[i]);
    }
  }
  if (kept_mass <= 0.0) {
    throw ContractError("scalar_bpb: 1-norm lift kept no mass despite the "
                        "pairing precondition");
  }
  Vec y(n, 0.0);
  Vec y_star = x_star;
  for (std::size_t i = 0; i < n; ++i) {
    if (!lifted[i]) continue;
    y[i] = x0[i] / kept_mass;
    y_star[i] = std::copysign(1.0, x0[i]);
  }
  CandidateCheck c = check_candidate(std::move(y), std::move(y_star), x_star,
                                     x0, NormTag::lp(1.0), epsilon, tol,
                                     "l1-lift", 0.0);
  if (!c.ok) {
    throw ContractError("scalar_bpb: 1-norm lift construction missed its "
                        "guaranteed bounds");
  }
  return c.result;
}

}  // namespace

double eta_prime(double epsilon) { return epsilon * epsilon / 8.0; }

double eta(double epsilon) {
  return std::min(epsilon / 4.0, eta_prime(epsilon / 2.0));
}

ScalarBpbResult scalar_bpb(const Vec& x_star, const Vec& x0,
                           const NormTag& space, double epsilon, double tol) {
  if (!(epsilon > 0.0) || !(epsilon < 0.5)) {
    throw PreconditionError("scalar_bpb: epsilon must lie in (0, 1/2)");
  }
  if (x_star.size() != x0.size() || x_star.empty()) {
    throw std::invalid_argument("scalar_bpb: dimension mismatch");
  }
  const double fn_norm = dual_norm(x_star, space);
  if (std::abs(fn_norm - 1.0) > tol) {
    throw PreconditionError("scalar_bpb: functional norm " + fmt17(fn_norm) +
                            " is not 1 within tol");
  }
  const double x0_norm = vector_norm(x0, space);
  if (x0_norm > 1.0 + tol) {
    throw PreconditionError("scalar_bpb: point norm " + fmt17(x0_norm) +
                            " exceeds 1");
  }
  const double paired = dot(x_star, x0);
  const double budget = epsilon * epsilon / 2.0;
  if (!(std::abs(1.0 - paired) < budget)) {
    throw PreconditionError("scalar_bpb: pairing slack " +
                            fmt17(1.0 - paired) + " is not below " +
                            fmt17(budget));
  }

  if (paired >= 1.0 - kFloatSlack && std::abs(x0_norm - 1.0) <= kFloatSlack) {
    ScalarBpbResult r;
    r.y = x0;
    r.y_star = x_star;
    r.attained = paired;
    r.path = "trivial";
    return r;
  }

  switch (space.kind) {
    case NormTag::Kind::Sup:
      return scalar_sup_face(x_star, x0, epsilon, tol);
    case NormTag::Kind::Euclid:
      return scalar_smooth(x_star, x0, space, epsilon, tol);
    case NormTag::Kind::P:
      if (space.p == 1.0) return scalar_l1_lift(x_star, x0, epsilon, tol);
      return scalar_smooth(x_star, x0, space, epsilon, tol);
  }
  throw std::invalid_argument("scalar_bpb: unknown norm tag");
}

LinfCorrection bpb_into_linf(const GeneralOperator& U, const Vec& x0,
                             double epsilon, double tol) {
  U.validate();
  if (!(U.target_norm == NormTag::sup())) {
    throw std::invalid_argument("bpb_into_linf: target norm must be sup");
  }
  if (x0.size() != U.source_dim()) {
    throw std::invalid_argument("bpb_into_linf: point dimension mismatch");
  }
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw PreconditionError("bpb_into_linf: epsilon must lie in (0, 1)");
  }
  const double norm_u = operator_norm(U);
  if (std::abs(norm_u - 1.0) > tol) {
    throw PreconditionError("bpb_into_linf: operator norm " + fmt17(norm_u) +
                            " is not 1 within tol");
  }
  const double x0_norm = vector_norm(x0, U.source_norm);
  if (std::abs(x0_norm - 1.0) > tol) {
    throw PreconditionError("bpb_into_linf: point norm " + fmt17(x0_norm) +
                            " is not 1 within tol");
  }

  const Vec ux0 = op_apply(U, x0);
  std::size_t row = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < ux0.size(); ++i) {
    if (std::abs(ux0[i]) > best) {
      best = std::abs(ux0[i]);
      row = i;
    }
  }
  if (!(best > 1.0 - eta_prime(epsilon))) {
    throw PreconditionError("bpb_into_linf: attained value " + fmt17(best) +
                            " is not above 1 - eta_prime = " +
                            fmt17(1.0 - eta_prime(epsilon)));
  }

  const double sign = std::copysign(1.0, ux0[row]);
  const double rho = dual_norm(U.matrix[row], U.source_norm);
  // Inputs that already attain must come back bit-identical, so skip the
  // rescale when the row norm sits within kFloatSlack of 1.
  const double scale = std::fabs(rho - 1.0) <= kFloatSlack ? 1.0 : 1.0 / rho;
  Vec x_star(U.source_dim());
  for (std::size_t i = 0; i < x_star.size(); ++i) {
    x_star[i] = sign * U.matrix[row][i] * scale;
  }

  LinfCorrection out;
  out.scalar = scalar_bpb(x_star, x0, U.source_norm, epsilon / 2.0, tol);
  out.row = row;
  out.V = U;
  for (std::size_t i = 0; i < x_star.size(); ++i) {
    out.V.matrix[row][i] = sign * out.scalar.y_star[i];
  }
  out.z0 = out.scalar.y;
  out.attained = std::abs(dot(out.V.matrix[row], out.z0));
  out.dist_point = out.scalar.dist_point;
  out.dist_operator = operator_norm(op_sub(out.V, U));

  const double norm_v = operator_norm(out.V);
  const double value = vector_norm(op_apply(out.V, out.z0), NormTag::sup());
  if (std::abs(norm_v - 1.0) > tol || std::abs(value - 1.0) > tol ||
      std::abs(out.attained - 1.0) > tol) {
    throw ContractError("bpb_into_linf: corrected operator does not attain "
                        "norm 1 within tol");
  }
  if (!(out.dist_point < epsilon) || !(out.dist_operator < epsilon)) {
    throw ContractError("bpb_into_linf: correction moved farther than "
                        "epsilon");
  }
  for (std::size_t i = 0; i < U.target_dim(); ++i) {
    if (i != row && out.V.matrix[i] != U.matrix[i]) {
      throw ContractError("bpb_into_linf: an untouched row changed");
    }
  }
  return out;
}

PredualParams PredualParams::plan(double epsilon, double attained_at_x0) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw PreconditionError("correct_predual: epsilon must lie in (0, 1)");
  }
  PredualParams p;
  p.epsilon = epsilon;
  p.eta = bpb::predual::eta(epsilon);
  if (!(attained_at_x0 > 1.0 - p.eta)) {
    throw PreconditionError("correct_predual: attained value " +
                            fmt17(attained_at_x0) + " is not above 1 - eta = " +
                            fmt17(1.0 - p.eta));
  }
  const double head = std::min(
      epsilon / 4.0, attained_at_x0 - 1.0 + eta_prime(epsilon / 2.0));
  p.delta = 0.5 * 0.25 * head;
  return p;
}

namespace {

// Grid points of the unit ball of `space`, coarsened to fit the budget.
// The pitch starts at the value whose rounding error under the operator is
// below delta and grows until the axis count fits; enumeration also aborts
// early at the cap, which is harmless because the net is informational
// (the attainer points added by the caller carry the truncation bound).
std::vector<Vec> ball_grid(std::size_t n, const NormTag& space, double delta,
                           std::size_t max_points) {
  double dim_factor = 1.0;
  switch (space.kind) {
    case NormTag::Kind::Sup:
      dim_factor = 1.0;
      break;
    case NormTag::Kind::Euclid:
      dim_factor = std::sqrt(static_cast<double>(n));
      break;
    case NormTag::Kind::P:
      dim_factor = std::pow(static_cast<double>(n), 1.0 / space.p);
      break;
  }
  double h = std::max(2.0 * delta / dim_factor, 1e-6);
  const double per_axis_cap =
      std::pow(static_cast<double>(max_points), 1.0 / static_cast<double>(n));
  while (2.0 / h + 1.0 > per_axis_cap) h *= 1.5;

  const auto steps = static_cast<std::int64_t>(std::floor(1.0 / h));
  std::vector<Vec> pts;
  std::vector<std::int64_t> idx(n, -steps);
  while (true) {
    Vec z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = static_cast<double>(idx[i]) * h;
    if (vector_norm(z, space) <= 1.0) pts.push_back(std::move(z));
    if (pts.size() >= max_points) break;
    std::size_t axis = 0;
    while (axis < n && idx[axis] == steps) {
      idx[axis] = -steps;
      ++axis;
    }
    if (axis == n) break;
    ++idx[axis];
  }
  return pts;
}

}  // namespace

PredualResult correct_predual(const GeneralOperator& T, const Vec& x0,
                              double epsilon, double tol,
                              const SourceNetOptions& net_opts) {
  T.validate();
  if (!(T.target_norm == NormTag::sup())) {
    throw std::invalid_argument("correct_predual: target norm must be sup");
  }
  if (x0.size() != T.source_dim()) {
    throw std::invalid_argument("correct_predual: point dimension mismatch");
  }
  const double norm_t = operator_norm(T);
  if (std::abs(norm_t - 1.0) > tol) {
    throw PreconditionError("correct_predual: operator norm " +
                            fmt17(norm_t) + " is not 1 within tol");
  }
  const double x0_norm = vector_norm(x0, T.source_norm);
  if (std::abs(x0_norm - 1.0) > tol) {
    throw PreconditionError("correct_predual: point norm " + fmt17(x0_norm) +
                            " is not 1 within tol");
  }
  const Vec tx0 = op_apply(T, x0);
  const double attained0 = vector_norm(tx0, NormTag::sup());

  PredualResult out;
  out.params = PredualParams::plan(epsilon, attained0);
  const double delta = out.params.delta;
  const std::size_t n = T.source_dim();
  const std::size_t target = T.target_dim();

  // Source-ball net: x0, the norming vector of every nonzero row, and a
  // budget-capped grid.  The attainers make the tail bound exact: a row
  // with dual norm above delta puts a coordinate above delta into its own
  // image, so that coordinate survives the truncation below.
  std::vector<Vec> sources;
  sources.push_back(x0);
  for (const Vec& r : T.matrix) {
    if (dual_norm(r, T.source_norm) > 0.0) {
      sources.push_back(norming_vector(r, T.source_norm));
    }
  }
  if (n <= net_opts.grid_dim_cap) {
    std::vector<Vec> grid =
        ball_grid(n, T.source_norm, delta, net_opts.max_points);
    sources.insert(sources.end(), std::make_move_iterator(grid.begin()),
                   std::make_move_iterator(grid.end()));
  }
  out.net.reserve(sources.size());
  for (const Vec& z : sources) out.net.push_back(op_apply(T, z));

  std::size_t m = 0;
  for (const Vec& y : out.net) {
    for (std::size_t j = 0; j < target; ++j) {
      if (std::abs(y[j]) > delta && j + 1 > m) m = j + 1;
    }
  }
  if (m == 0) {
    throw ContractError("correct_predual: truncation kept no coordinates "
                        "for a norm-one operator");
  }
  out.m = m;

  double tail = 0.0;
  for (std::size_t j = m; j < target; ++j) {
    tail = std::max(tail, dual_norm(T.matrix[j], T.source_norm));
  }
  if (!(tail <= delta)) {
    throw ContractError("correct_predual: a discarded row has dual norm " +
                        fmt17(tail) + " above delta = " + fmt17(delta));
  }
  out.ledger.tail_norm = tail;

  GeneralOperator pt = T;
  for (std::size_t j = m; j < target; ++j) {
    pt.matrix[j].assign(n, 0.0);
  }
  const double norm_pt = operator_norm(pt);
  out.ledger.norm_pt = norm_pt;
  if (std::abs(norm_pt - 1.0) > tol) {
    throw ContractError("correct_predual: truncated operator norm " +
                        fmt17(norm_pt) + " drifted from 1");
  }

  out.R.source_norm = T.source_norm;
  out.R.target_norm = NormTag::sup();
  out.R.matrix.assign(pt.matrix.begin(), pt.matrix.begin() +
                                             static_cast<std::ptrdiff_t>(m));
  // Inputs that already attain must come back bit-identical, so skip the
  // rescale when the truncated norm sits within kFloatSlack of 1.
  if (std::fabs(norm_pt - 1.0) > kFloatSlack) {
    for (Vec& r : out.R.matrix) {
      for (double& v : r) v /= norm_pt;
    }
  }

  out.inner = bpb_into_linf(out.R, x0, epsilon / 2.0, tol);
  out.ledger.dist_r_v = out.inner.dist_operator;
  out.z0 = out.inner.z0;

  out.S.source_norm = T.source_norm;
  out.S.target_norm = T.target_norm;
  out.S.matrix.assign(target, Vec(n, 0.0));
  for (std::size_t j = 0; j < m; ++j) out.S.matrix[j] = out.inner.V.matrix[j];

  const double norm_s = operator_norm(out.S);
  const double value = vector_norm(op_apply(out.S, out.z0), NormTag::sup());
  out.ledger.dist_operator = operator_norm(op_sub(out.S, T));
  out.ledger.dist_point = vector_norm(sub(out.z0, x0), T.source_norm);
  if (std::abs(norm_s - 1.0) > tol || std::abs(value - 1.0) > tol) {
    throw VerificationError("correct_predual: corrected operator does not "
                            "attain norm 1 within tol");
  }
  if (!(out.ledger.dist_point < epsilon) ||
      !(out.ledger.dist_operator < epsilon)) {
    throw VerificationError("correct_predual: correction moved farther than "
                            "epsilon");
  }
  for (std::size_t j = m; j < target; ++j) {
    for (double v : out.S.matrix[j]) {
      if (v != 0.0) {
        throw ContractError("correct_predual: a truncated row of the "
                            "corrected operator is nonzero");
      }
    }
  }

  out.certificate.witness = out.z0;
  out.certificate.attained_norm = value;
  out.certificate.dist_point = out.ledger.dist_point;
  out.certificate.dist_operator = out.ledger.dist_operator;
  out.certificate.epsilon = epsilon;
  out.certificate.tol = tol;
  return out;
}

}  // namespace bpb::predual
