#include "bpb/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace bpb {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void PointSet::validate() const {
  require(size >= 1, "PointSet: size must be >= 1");
  require(labels.empty() || labels.size() == size,
          "PointSet: labels must be empty or one per point");
}

void Kernel::validate() const {
  require(source_dim >= 1, "Kernel: source_dim must be >= 1");
  require(!rows.empty(), "Kernel: at least one row required");
  for (const Meas& r : rows)
    require(r.dim() == source_dim, "Kernel: row dimension mismatch");
}

NormTag NormTag::lp(double p) {
  require(std::isfinite(p) && p >= 1.0, "NormTag: p must be finite and >= 1");
  return {Kind::P, p};
}

NormTag NormTag::dual() const {
  switch (kind) {
    case Kind::Sup:
      return lp(1.0);
    case Kind::Euclid:
      return euclid();
    case Kind::P:
      if (p == 1.0) return sup();
      return lp(p / (p - 1.0));
  }
  throw std::logic_error("NormTag: bad kind");
}

std::string NormTag::str() const {
  switch (kind) {
    case Kind::Sup:
      return "sup";
    case Kind::Euclid:
      return "euclid";
    case Kind::P:
      return "p:" + fmt17(p);
  }
  throw std::logic_error("NormTag: bad kind");
}

NormTag NormTag::parse(const std::string& text) {
  if (text == "sup") return sup();
  if (text == "euclid") return euclid();
  if (text.rfind("p:", 0) == 0) {
    std::size_t used = 0;
    const double p = std::stod(text.substr(2), &used);
    require(used == text.size() - 2, "NormTag: trailing characters in p tag");
    return lp(p);
  }
  throw std::invalid_argument("NormTag: unknown tag '" + text + "'");
}

bool NormTag::operator==(const NormTag& o) const {
  if (kind != o.kind) return false;
  return kind != Kind::P || p == o.p;
}

void GeneralOperator::validate() const {
  require(!matrix.empty(), "GeneralOperator: empty matrix");
  const std::size_t n = matrix[0].size();
  require(n >= 1, "GeneralOperator: empty rows");
  for (const Vec& row : matrix)
    require(row.size() == n, "GeneralOperator: ragged matrix");
}

double sup_norm(const Fn& f) {
  require(!f.values.empty(), "sup_norm: empty function");
  double best = 0.0;
  for (double v : f.values) best = std::max(best, std::fabs(v));
  return best;
}

double tv_norm(const Meas& m) {
  require(!m.masses.empty(), "tv_norm: empty measure");
  double total = 0.0;
  for (double v : m.masses) total += std::fabs(v);
  return total;
}

double pair(const Fn& f, const Meas& m) {
  require(f.dim() == m.dim() && f.dim() > 0, "pair: domain mismatch");
  double acc = 0.0;
  for (std::size_t t = 0; t < f.dim(); ++t) acc += f.values[t] * m.masses[t];
  return acc;
}

double kernel_norm(const Kernel& k) {
  k.validate();
  double best = 0.0;
  for (const Meas& r : k.rows) best = std::max(best, tv_norm(r));
  return best;
}

Fn kernel_apply(const Kernel& k, const Fn& f) {
  k.validate();
  require(f.dim() == k.source_dim, "kernel_apply: domain mismatch");
  Fn out;
  out.values.reserve(k.target_dim());
  for (const Meas& r : k.rows) out.values.push_back(pair(f, r));
  return out;
}

Kernel kernel_sub(const Kernel& a, const Kernel& b) {
  require(a.source_dim == b.source_dim && a.target_dim() == b.target_dim(),
          "kernel_sub: shape mismatch");
  Kernel out = a;
  for (std::size_t s = 0; s < out.rows.size(); ++s)
    for (std::size_t t = 0; t < out.source_dim; ++t)
      out.rows[s].masses[t] -= b.rows[s].masses[t];
  return out;
}

Kernel kernel_scale(const Kernel& k, double c) {
  Kernel out = k;
  for (Meas& r : out.rows)
    for (double& v : r.masses) v *= c;
  return out;
}

GeneralOperator kernel_as_operator(const Kernel& k) {
  k.validate();
  GeneralOperator op;
  op.source_norm = NormTag::sup();
  op.target_norm = NormTag::sup();
  op.matrix.reserve(k.target_dim());
  for (const Meas& r : k.rows) op.matrix.push_back(r.masses);
  return op;
}

double vector_norm(const Vec& v, const NormTag& tag) {
  require(!v.empty(), "vector_norm: empty vector");
  switch (tag.kind) {
    case NormTag::Kind::Sup: {
      double best = 0.0;
      for (double x : v) best = std::max(best, std::fabs(x));
      return best;
    }
    case NormTag::Kind::Euclid: {
      double acc = 0.0;
      for (double x : v) acc += x * x;
      return std::sqrt(acc);
    }
    case NormTag::Kind::P: {
      if (tag.p == 1.0) {
        double acc = 0.0;
        for (double x : v) acc += std::fabs(x);
        return acc;
      }
      if (tag.p == 2.0) return vector_norm(v, NormTag::euclid());
      // Scale out the largest entry to keep pow() well conditioned.
      double scale = 0.0;
      for (double x : v) scale = std::max(scale, std::fabs(x));
      if (scale == 0.0) return 0.0;
      double acc = 0.0;
      for (double x : v) acc += std::pow(std::fabs(x) / scale, tag.p);
      return scale * std::pow(acc, 1.0 / tag.p);
    }
  }
  throw std::logic_error("vector_norm: bad tag");
}

double dual_norm(const Vec& functional, const NormTag& space) {
  return vector_norm(functional, space.dual());
}

Vec norming_vector(const Vec& w, const NormTag& space) {
  require(!w.empty(), "norming_vector: empty functional");
  const double wn = dual_norm(w, space);
  require(wn > 0.0, "norming_vector: zero functional");
  Vec y(w.size(), 0.0);
  switch (space.kind) {
    case NormTag::Kind::Sup:
      // Extreme sign vector; zero coordinates default to +1.
      for (std::size_t i = 0; i < w.size(); ++i) y[i] = std::copysign(1.0, w[i]);
      return y;
    case NormTag::Kind::Euclid:
      for (std::size_t i = 0; i < w.size(); ++i) y[i] = w[i] / wn;
      return y;
    case NormTag::Kind::P: {
      if (space.p == 1.0) {
        // Point mass on a largest functional coordinate (smallest index tie).
        std::size_t k = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
          if (std::fabs(w[i]) > std::fabs(w[k])) k = i;
        y[k] = std::copysign(1.0, w[k]);
        return y;
      }
      // Hoelder equality case: |y_i| proportional to |w_i|^(q-1), q conjugate.
      const double q = space.dual().kind == NormTag::Kind::Sup ? 0.0 : space.dual().p;
      require(q > 1.0, "norming_vector: unexpected conjugate exponent");
      for (std::size_t i = 0; i < w.size(); ++i)
        y[i] = std::copysign(std::pow(std::fabs(w[i]) / wn, q - 1.0), w[i]);
      // Normalize residual floating error away.
      const double yn = vector_norm(y, space);
      for (double& v : y) v /= yn;
      return y;
    }
  }
  throw std::logic_error("norming_vector: bad tag");
}

Vec op_apply(const GeneralOperator& a, const Vec& x) {
  a.validate();
  require(x.size() == a.source_dim(), "op_apply: domain mismatch");
  Vec out(a.target_dim(), 0.0);
  for (std::size_t i = 0; i < a.target_dim(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += a.matrix[i][j] * x[j];
    out[i] = acc;
  }
  return out;
}

GeneralOperator op_sub(const GeneralOperator& a, const GeneralOperator& b) {
  require(a.source_dim() == b.source_dim() && a.target_dim() == b.target_dim(),
          "op_sub: shape mismatch");
  GeneralOperator out = a;
  for (std::size_t i = 0; i < out.target_dim(); ++i)
    for (std::size_t j = 0; j < out.source_dim(); ++j)
      out.matrix[i][j] -= b.matrix[i][j];
  return out;
}

GeneralOperator op_scale(const GeneralOperator& a, double c) {
  GeneralOperator out = a;
  for (Vec& row : out.matrix)
    for (double& v : row) v *= c;
  return out;
}

GeneralOperator op_compose(const GeneralOperator& a, const GeneralOperator& b) {
  a.validate();
  b.validate();
  require(a.source_dim() == b.target_dim(), "op_compose: shape mismatch");
  GeneralOperator out;
  out.source_norm = b.source_norm;
  out.target_norm = a.target_norm;
  out.matrix.assign(a.target_dim(), Vec(b.source_dim(), 0.0));
  for (std::size_t i = 0; i < a.target_dim(); ++i)
    for (std::size_t k = 0; k < a.source_dim(); ++k) {
      const double aik = a.matrix[i][k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.source_dim(); ++j)
        out.matrix[i][j] += aik * b.matrix[k][j];
    }
  return out;
}

SignSearch oracle_norm(const GeneralOperator& a, std::size_t dim_cap) {
  a.validate();
  require(a.source_norm == NormTag::sup(), "oracle_norm: sup-norm source required");
  const std::size_t n = a.source_dim();
  if (n > dim_cap)
    throw BudgetError("oracle_norm: source dimension " + std::to_string(n) +
                      " exceeds enumeration cap " + std::to_string(dim_cap));

  SignSearch best;
  best.value = -1.0;
  std::vector<int> signs(n, 1);
  Vec x(n, 1.0);
  // sigma and -sigma give the same norm, so the first coordinate stays +1.
  const std::uint64_t classes = n == 1 ? 1 : (std::uint64_t{1} << (n - 1));
  for (std::uint64_t mask = 0; mask < classes; ++mask) {
    for (std::size_t i = 1; i < n; ++i) {
      signs[i] = (mask >> (i - 1)) & 1 ? -1 : 1;
      x[i] = static_cast<double>(signs[i]);
    }
    const double val = vector_norm(op_apply(a, x), a.target_norm);
    if (val > best.value) {
      best.value = val;
      best.signs = signs;
    }
  }
  return best;
}

double operator_norm(const GeneralOperator& a, std::size_t dim_cap) {
  a.validate();
  if (a.source_norm == NormTag::sup()) return oracle_norm(a, dim_cap).value;
  if (a.target_norm == NormTag::sup()) {
    // Sup target: the norm is the largest row functional norm.
    double best = 0.0;
    for (const Vec& row : a.matrix)
      best = std::max(best, dual_norm(row, a.source_norm));
    return best;
  }
  throw std::invalid_argument("operator_norm: unsupported norm tag pair");
}

double oscillation(const Fn& f, const std::vector<std::size_t>& block) {
  require(!block.empty(), "oscillation: empty block");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t t : block) {
    require(t < f.dim(), "oscillation: index out of range");
    lo = std::min(lo, f.values[t]);
    hi = std::max(hi, f.values[t]);
  }
  return hi - lo;
}

HahnSplit hahn_split(const Meas& m) {
  require(!m.masses.empty(), "hahn_split: empty measure");
  HahnSplit out;
  for (std::size_t t = 0; t < m.dim(); ++t) {
    if (m.masses[t] >= 0.0)
      out.positive.push_back(t);
    else
      out.negative.push_back(t);
  }
  return out;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Rejection sampling keeps the distribution exact and deterministic.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return lo + static_cast<std::int64_t>(r % span);
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace bpb
