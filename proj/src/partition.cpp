#include "bpb/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace bpb::part {

namespace {

// Euclidean ball volume coefficients for dimensions 1..4.
double ball_volume(std::size_t p, double radius) {
  static const double coef[5] = {1.0, 2.0, 3.14159265358979323846,
                                 4.18879020478639098462,
                                 4.93480220054467930942};
  return coef[p] * std::pow(radius, static_cast<double>(p));
}

void check_net_operator(const GeneralOperator& T, const NetOptions& opts) {
  T.validate();
  if (!(T.source_norm == NormTag::sup()))
    throw PreconditionError("dual_ball_net: sup-norm source required");
  if (!(T.target_norm == NormTag::euclid()))
    throw PreconditionError("dual_ball_net: Euclidean target required");
  if (T.target_dim() > opts.target_dim_cap)
    throw PreconditionError("dual_ball_net: target dimension exceeds cap");
}

// Pushes the dual vector z through the adjoint: (T* z)(t) = sum_i z_i T[i][t].
Meas adjoint_push(const GeneralOperator& T, const Vec& z) {
  Meas m;
  m.masses.assign(T.source_dim(), 0.0);
  for (std::size_t i = 0; i < T.target_dim(); ++i) {
    if (z[i] == 0.0) continue;
    for (std::size_t t = 0; t < T.source_dim(); ++t)
      m.masses[t] += z[i] * T.matrix[i][t];
  }
  return m;
}

// Enumerates lattice points h*k with Euclidean norm at most bound.  Returns
// false (leaving `out` partial) once more than max_points are found.
bool enumerate_lattice(double h, double bound, std::size_t dim,
                       std::size_t max_points, std::vector<Vec>& out) {
  out.clear();
  Vec z(dim, 0.0);
  const double bound2 = bound * bound * (1.0 + 1e-12);
  const long kmax = static_cast<long>(std::floor(bound / h)) + 1;

  std::vector<long> k(dim, -kmax - 1);
  std::size_t level = 0;
  std::vector<double> partial(dim + 1, 0.0);
  k[0] = -kmax - 1;
  while (true) {
    if (k[level] > kmax) {
      if (level == 0) return true;
      --level;
      continue;
    }
    ++k[level];
    if (k[level] > kmax) continue;
    z[level] = h * static_cast<double>(k[level]);
    const double acc = partial[level] + z[level] * z[level];
    if (acc > bound2) continue;
    if (level + 1 == dim) {
      out.push_back(z);
      if (out.size() > max_points) return false;
    } else {
      partial[level + 1] = acc;
      ++level;
      k[level] = -kmax - 1;
    }
  }
}

}  // namespace

NetResult dual_ball_net(const GeneralOperator& T, double radius,
                        const NetOptions& opts) {
  check_net_operator(T, opts);
  if (!(radius > 0.0))
    throw PreconditionError("dual_ball_net: radius must be positive");

  const std::size_t p = T.target_dim();
  const std::size_t n = T.source_dim();
  const double sqp = std::sqrt(static_cast<double>(p));

  NetResult res;
  res.requested_radius = radius;
  double lip = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double col2 = 0.0;
    for (std::size_t i = 0; i < p; ++i) col2 += T.matrix[i][t] * T.matrix[i][t];
    lip += std::sqrt(col2);
  }
  res.lipschitz = lip;

  if (lip == 0.0) {
    // Zero operator: the adjoint image is {0}.
    Meas zero;
    zero.masses.assign(n, 0.0);
    res.measures.push_back(std::move(zero));
    return res;
  }

  // Rounding to a pitch-h lattice moves a dual vector by at most
  // h*sqrt(p)/2 in Euclidean norm, hence its adjoint push by at most
  // lip * h * sqrt(p) / 2 in total variation.
  double h = 1.999 * radius / (lip * sqp);
  std::vector<Vec> grid;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 200)
      throw ContractError("dual_ball_net: coarsening failed to converge");
    const double keep_bound = 1.0 + h * sqp / 2.0;
    const double estimate =
        ball_volume(p, keep_bound) / std::pow(h, static_cast<double>(p));
    if (estimate > 1.2 * static_cast<double>(opts.max_points)) {
      if (opts.strict)
        throw BudgetError("dual_ball_net: grid would exceed the point budget");
      h *= 1.3;
      continue;
    }
    if (enumerate_lattice(h, keep_bound, p, opts.max_points, grid)) break;
    if (opts.strict)
      throw BudgetError("dual_ball_net: grid would exceed the point budget");
    h *= 1.3;
  }
  res.pitch = h;
  res.achieved_radius = lip * h * sqp / 2.0;
  res.coarsened = res.achieved_radius > radius;
  if (res.coarsened && opts.strict)
    throw BudgetError("dual_ball_net: budget forced a coarser net");

  res.measures.reserve(grid.size() + 2 * p);
  for (const Vec& z : grid) res.measures.push_back(adjoint_push(T, z));
  // The signed coordinate duals push to the signed rows; keeping them makes
  // downstream density arguments exact regardless of the grid pitch.
  for (std::size_t i = 0; i < p; ++i) {
    Vec e(p, 0.0);
    e[i] = 1.0;
    res.measures.push_back(adjoint_push(T, e));
    e[i] = -1.0;
    res.measures.push_back(adjoint_push(T, e));
  }

  // Monte-Carlo covering probe: a random unit dual vector must land within
  // achieved_radius of the push of its rounded lattice neighbor.
  Rng rng(opts.covering_seed);
  const double allowance = res.achieved_radius * (1.0 + 1e-9) + 1e-15;
  for (std::size_t probe = 0; probe < opts.covering_checks; ++probe) {
    Vec y(p, 0.0);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      y[i] = rng.gaussian();
      norm2 += y[i] * y[i];
    }
    if (norm2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    Vec rounded(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
      y[i] *= inv;
      rounded[i] = h * static_cast<double>(std::llround(y[i] / h));
    }
    const Meas push_y = adjoint_push(T, y);
    const Meas push_r = adjoint_push(T, rounded);
    double dist = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      dist += std::fabs(push_y.masses[t] - push_r.masses[t]);
    if (!(dist <= allowance))
      throw VerificationError("dual_ball_net: covering probe failed");
  }
  return res;
}

Fn project(const PartitionProjection& p, const Fn& f) {
  Fn out;
  out.values = op_apply(p.projector, f.values);
  return out;
}

PartitionResult build_partition(const GeneralOperator& T, const Fn& f0,
                                double epsilon, double tol,
                                const NetOptions& opts) {
  check_net_operator(T, opts);
  if (!(epsilon > 0.0))
    throw PreconditionError("build_partition: epsilon must be positive");
  if (f0.dim() != T.source_dim())
    throw PreconditionError("build_partition: f0 dimension mismatch");

  const std::size_t n = T.source_dim();
  PartitionResult out;
  PartitionTrace& tr = out.trace;

  NetResult net = dual_ball_net(T, epsilon / 4.0, opts);
  tr.net_pitch = net.pitch;
  tr.net_radius_requested = net.requested_radius;
  tr.net_radius_achieved = net.achieved_radius;
  tr.net_coarsened = net.coarsened;
  tr.net = std::move(net.measures);
  const std::size_t t_count = tr.net.size();
  tr.net_size = t_count;

  // Envelope weight mu = sum |mu_i| and the trimmed (mu-null) points.
  Meas mu;
  mu.masses.assign(n, 0.0);
  for (const Meas& m : tr.net)
    for (std::size_t t = 0; t < n; ++t) mu.masses[t] += std::fabs(m.masses[t]);
  double mu_total = 0.0;
  for (double v : mu.masses) mu_total += v;
  out.projection.weight = mu;

  std::vector<std::size_t> kept;
  for (std::size_t t = 0; t < n; ++t) {
    if (mu.masses[t] > 0.0)
      kept.push_back(t);
    else
      tr.trimmed.push_back(t);
  }

  GeneralOperator& P = out.projection.projector;
  P.source_norm = NormTag::sup();
  P.target_norm = NormTag::sup();
  P.matrix.assign(n, Vec(n, 0.0));

  if (!kept.empty()) {
    // Densities against mu, quantized to pitch rho; the floor keeps the
    // scaled values safely inside llround range.
    const double rho = std::max(
        (epsilon / 12.0) / (static_cast<double>(t_count) * mu_total), 1e-13);
    tr.quant_pitch = rho;
    tr.densities.assign(t_count, Vec(n, 0.0));
    tr.simple_approx.assign(t_count, Vec(n, 0.0));
    std::vector<std::vector<long long>> signature(n);
    for (std::size_t t : kept) signature[t].assign(t_count, 0);
    for (std::size_t i = 0; i < t_count; ++i) {
      for (std::size_t t : kept) {
        const double g = tr.net[i].masses[t] / mu.masses[t];
        const long long q = std::llround(g / rho);
        tr.densities[i][t] = g;
        tr.simple_approx[i][t] = rho * static_cast<double>(q);
        signature[t][i] = q;
      }
    }
    for (std::size_t i = 0; i < t_count; ++i) {
      double err = 0.0;
      for (std::size_t t : kept)
        err += std::fabs(tr.densities[i][t] - tr.simple_approx[i][t]) *
               mu.masses[t];
      tr.quant_error_max = std::max(tr.quant_error_max, err);
    }
    if (!(tr.quant_error_max < epsilon / 12.0))
      throw VerificationError("build_partition: quantization error too large");

    // Level sets: points sharing the full quantized density signature.
    std::map<std::vector<long long>, std::vector<std::size_t>> levels;
    for (std::size_t t : kept) levels[signature[t]].push_back(t);
    for (auto& [sig, pts] : levels) {
      tr.level_sets.push_back(pts);
      Vec a(t_count, 0.0);
      for (std::size_t i = 0; i < t_count; ++i)
        a[i] = rho * static_cast<double>(sig[i]);
      tr.alpha.push_back(std::move(a));
    }
    // Deterministic order: by smallest member point.
    std::vector<std::size_t> order(tr.level_sets.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return tr.level_sets[x].front() < tr.level_sets[y].front();
    });
    {
      std::vector<std::vector<std::size_t>> ls;
      std::vector<Vec> al;
      for (std::size_t j : order) {
        ls.push_back(std::move(tr.level_sets[j]));
        al.push_back(std::move(tr.alpha[j]));
      }
      tr.level_sets = std::move(ls);
      tr.alpha = std::move(al);
    }
    tr.level_count = tr.level_sets.size();
    tr.carriers = tr.level_sets;  // mu-null points were already removed
    for (const Vec& a : tr.alpha)
      for (double v : a) tr.coeff_bound = std::max(tr.coeff_bound, std::fabs(v));

    // Oscillation refinement: sort by f0 and cut into chunks of width
    // strictly below epsilon, left-closed.
    for (std::size_t j = 0; j < tr.carriers.size(); ++j) {
      std::vector<std::size_t> pts = tr.carriers[j];
      std::sort(pts.begin(), pts.end(), [&](std::size_t x, std::size_t y) {
        if (f0.values[x] != f0.values[y]) return f0.values[x] < f0.values[y];
        return x < y;
      });
      std::size_t chunks = 0;
      std::size_t begin = 0;
      for (std::size_t k = 1; k <= pts.size(); ++k) {
        if (k == pts.size() ||
            f0.values[pts[k]] - f0.values[pts[begin]] >= epsilon) {
          tr.refined.emplace_back(pts.begin() + begin, pts.begin() + k);
          tr.beta.push_back(tr.alpha[j]);
          ++chunks;
          begin = k;
        }
      }
      tr.refine_counts.push_back(chunks);
    }

    out.projection.blocks = tr.refined;
    for (const auto& block : out.projection.blocks) {
      Fn bump;
      bump.values.assign(n, 0.0);
      for (std::size_t t : block) bump.values[t] = 1.0;
      out.projection.bumps.push_back(std::move(bump));

      double block_mass = 0.0;
      for (std::size_t t : block) block_mass += mu.masses[t];
      Vec w(block.size(), 0.0);
      for (std::size_t k = 0; k < block.size(); ++k)
        w[k] = mu.masses[block[k]] / block_mass;
      // Nudge the last weight until the row sums to 1.0 exactly, so the
      // projection has operator norm exactly one.
      for (int pass = 0; pass < 8; ++pass) {
        double s = 0.0;
        for (double v : w) s += v;
        if (s == 1.0) break;
        w.back() += 1.0 - s;
      }
      for (std::size_t t : block)
        for (std::size_t k = 0; k < block.size(); ++k)
          P.matrix[t][block[k]] = w[k];
    }

    // Net-to-projection chain: each net measure is within eps/4 in total
    // variation of its block-constant surrogate nu_i.
    for (std::size_t i = 0; i < t_count; ++i) {
      Vec nu(n, 0.0);
      for (std::size_t j = 0; j < out.projection.blocks.size(); ++j)
        for (std::size_t t : out.projection.blocks[j])
          nu[t] = tr.beta[j][i] * mu.masses[t];
      double dist = 0.0;
      for (std::size_t t = 0; t < n; ++t)
        dist += std::fabs(tr.net[i].masses[t] - nu[t]);
      tr.chain_bound_max = std::max(tr.chain_bound_max, dist);
    }
    if (!(tr.chain_bound_max < epsilon / 4.0))
      throw VerificationError("build_partition: net approximation chain broke");
  }

  // Conclusions, asserted before returning.
  for (const auto& block : out.projection.blocks)
    if (!(oscillation(f0, block) < epsilon))
      throw VerificationError("build_partition: block oscillation too large");
  for (std::size_t t = 0; t < n; ++t) {
    double row_sum = 0.0;
    for (double v : P.matrix[t]) row_sum += std::fabs(v);
    if (!out.projection.blocks.empty() && row_sum != 0.0 && row_sum != 1.0 &&
        std::fabs(row_sum - 1.0) > kFloatSlack)
      throw VerificationError("build_partition: projection row sum off one");
  }
  {
    const GeneralOperator PP = op_compose(P, P);
    double dev = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        dev = std::max(dev, std::fabs(PP.matrix[a][b] - P.matrix[a][b]));
    if (dev > kFloatSlack)
      throw VerificationError("build_partition: projection not idempotent");
  }
  {
    const GeneralOperator TP = op_compose(T, P);
    const GeneralOperator D = op_sub(T, TP);
    double bound;
    if (n <= kOracleDimCap) {
      bound = oracle_norm(D).value;
    } else {
      double acc = 0.0;
      for (const Vec& row : D.matrix) {
        double tv = 0.0;
        for (double v : row) tv += std::fabs(v);
        acc += tv * tv;
      }
      bound = std::sqrt(acc);
    }
    if (!(bound < epsilon))
      throw VerificationError("build_partition: ||T - TP|| bound failed");
  }
  (void)tol;
  return out;
}

}  // namespace bpb::part
