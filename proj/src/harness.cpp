#include "bpb/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bpb/ck_cs.hpp"
#include "bpb/predual.hpp"
#include "bpb/ucx.hpp"

namespace bpb::harness {

namespace {

Vec uniform_vec(Rng& rng, std::size_t n) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void check_spec(const InstanceSpec& spec) {
  if (spec.pipeline != "ck-cs" && spec.pipeline != "ucx" &&
      spec.pipeline != "predual") {
    throw std::invalid_argument("gen_instance: unknown pipeline '" +
                                spec.pipeline + "'");
  }
  if (spec.n == 0 || spec.m == 0) {
    throw PreconditionError("gen_instance: dimensions must be positive");
  }
  if (!(spec.slack >= 0.0) || !(spec.slack < 1.0)) {
    throw PreconditionError("gen_instance: slack must lie in [0, 1)");
  }
  if (spec.pipeline == "ucx" && spec.n > kOracleDimCap) {
    throw PreconditionError("gen_instance: ucx source dimension exceeds the "
                            "enumeration cap");
  }
}

// Kernel with a dominant first row of total variation about 1; every other
// row is scaled strictly below 1 - slack so the first row stays the unique
// near-attaining one.  f0 starts as the sign pattern of row 0 and absorbs
// the requested pairing slack greedily on the heaviest coordinates, always
// leaving the lightest coordinate at +-1 so the sup norm stays exactly 1.
Instance gen_ck_cs(const InstanceSpec& spec) {
  Rng rng(spec.seed);
  Instance inst;
  inst.pipeline = spec.pipeline;
  inst.seed = spec.seed;

  Kernel T;
  T.source_dim = spec.n;
  T.rows.resize(spec.m);
  T.rows[0].masses = uniform_vec(rng, spec.n);
  const double tv0 = tv_norm(T.rows[0]);
  if (!(tv0 > 0.0)) {
    throw PreconditionError("gen_instance: degenerate draw (zero row)");
  }
  for (double& x : T.rows[0].masses) x /= tv0;

  const double cap = std::max(0.05, 0.98 - 1.1 * spec.slack);
  for (std::size_t j = 1; j < spec.m; ++j) {
    T.rows[j].masses = uniform_vec(rng, spec.n);
    const double tv = tv_norm(T.rows[j]);
    const double want = cap * rng.uniform(0.3, 1.0);
    if (tv > 0.0) {
      for (double& x : T.rows[j].masses) x = x / tv * want;
    }
  }

  Vec f0(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    f0[i] = std::copysign(1.0, T.rows[0].masses[i]);
  }
  if (spec.slack > 0.0) {
    if (spec.n < 2) {
      throw PreconditionError("gen_instance: positive slack needs source "
                              "dimension at least 2");
    }
    std::vector<std::size_t> order(spec.n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double ma = std::abs(T.rows[0].masses[a]);
      const double mb = std::abs(T.rows[0].masses[b]);
      return ma != mb ? ma > mb : a < b;
    });
    double remaining = spec.slack;
    for (std::size_t pos = 0; pos + 1 < spec.n && remaining > 0.0; ++pos) {
      const std::size_t i = order[pos];
      const double w = std::abs(T.rows[0].masses[i]);
      if (w == 0.0) continue;
      const double d = std::min(remaining, 2.0 * w);
      f0[i] = std::copysign(1.0 - d / w, T.rows[0].masses[i]);
      remaining -= d;
    }
    if (remaining > 1e-12) {
      throw PreconditionError("gen_instance: slack not absorbable by this "
                              "draw");
    }
  }

  inst.kernel = std::move(T);
  inst.point = std::move(f0);
  inst.slack =
      1.0 - sup_norm(kernel_apply(inst.kernel, Fn{inst.point}));
  return inst;
}

// Operator normalized by sign enumeration; f0 is the attaining sign vector
// of the normalized matrix, then one coordinate with positive descent rate
// is pulled toward zero and bisected until the attained value is exactly
// 1 - slack (up to the bisection resolution).
Instance gen_ucx(const InstanceSpec& spec) {
  Rng rng(spec.seed);
  Instance inst;
  inst.pipeline = spec.pipeline;
  inst.seed = spec.seed;

  GeneralOperator T;
  T.source_norm = NormTag::sup();
  T.target_norm = spec.target_norm;
  T.matrix.resize(spec.m);
  for (Vec& row : T.matrix) row = uniform_vec(rng, spec.n);
  const double raw = oracle_norm(T).value;
  if (!(raw > 0.0)) {
    throw PreconditionError("gen_instance: degenerate draw (zero operator)");
  }
  for (Vec& row : T.matrix) {
    for (double& x : row) x /= raw;
  }

  const SignSearch attain = oracle_norm(T);
  Vec f0(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    f0[i] = static_cast<double>(attain.signs[i]);
  }

  const double goal = 1.0 - spec.slack;
  auto value_at = [&](std::size_t k, double t) {
    Vec f = f0;
    f[k] = f0[k] * (1.0 - t);
    return vector_norm(op_apply(T, f), T.target_norm);
  };
  if (spec.slack > 1e-12 && value_at(0, 0.0) > goal) {
    const Vec y = op_apply(T, f0);
    std::vector<std::size_t> order(spec.n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> rate(spec.n);
    for (std::size_t k = 0; k < spec.n; ++k) {
      double g = 0.0;
      for (std::size_t i = 0; i < spec.m; ++i) g += y[i] * T.matrix[i][k];
      rate[k] = f0[k] * g;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return rate[a] != rate[b] ? rate[a] > rate[b] : a < b;
    });
    bool placed = false;
    for (std::size_t k : order) {
      if (!(rate[k] > 0.0)) break;
      double hi = std::min(spec.slack, 1.0);
      int grow = 0;
      while (value_at(k, hi) > goal && hi < 1.999 && grow < 60) {
        hi = std::min(hi * 2.0, 1.999);
        ++grow;
      }
      if (value_at(k, hi) > goal) continue;
      double lo = 0.0;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (value_at(k, mid) > goal ? lo : hi) = mid;
      }
      f0[k] = f0[k] * (1.0 - hi);
      placed = true;
      break;
    }
    if (!placed) {
      throw PreconditionError("gen_instance: slack not reachable along any "
                              "coordinate for this draw");
    }
  }

  inst.op = std::move(T);
  inst.point = std::move(f0);
  inst.slack =
      1.0 - vector_norm(op_apply(inst.op, inst.point), inst.op.target_norm);
  return inst;
}

// Rows with geometrically decaying dual norms (so truncation is genuinely
// active); x0 starts at the exact norming vector of the dominant row and
// is blended with a random direction, bisecting the blend weight until the
// attained value is 1 - slack.
Instance gen_predual(const InstanceSpec& spec) {
  Rng rng(spec.seed);
  Instance inst;
  inst.pipeline = spec.pipeline;
  inst.seed = spec.seed;

  GeneralOperator T;
  T.source_norm = spec.source_norm;
  T.target_norm = NormTag::sup();
  T.matrix.resize(spec.m);
  // Exactly attaining instances get an exactly finite-rank tail; otherwise
  // the rows decay geometrically but never vanish, so truncation is live.
  const std::size_t live_rows =
      spec.slack > 1e-12 ? spec.m : std::min<std::size_t>(spec.m, 4);
  double decay = 1.0;
  for (std::size_t j = 0; j < spec.m; ++j) {
    if (j >= live_rows) {
      T.matrix[j].assign(spec.n, 0.0);
      continue;
    }
    T.matrix[j] = uniform_vec(rng, spec.n);
    const double d = dual_norm(T.matrix[j], T.source_norm);
    if (!(d > 0.0)) {
      throw PreconditionError("gen_instance: degenerate draw (zero row)");
    }
    const double want = j == 0 ? 1.0 : decay * rng.uniform(0.6, 1.0);
    for (double& x : T.matrix[j]) x = x / d * want;
    decay *= 0.35;
  }

  const Vec v = norming_vector(T.matrix[0], T.source_norm);
  Vec x0 = v;
  if (spec.slack > 1e-12) {
    const double goal = 1.0 - spec.slack;
    bool placed = false;
    for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
      const Vec w = uniform_vec(rng, spec.n);
      auto value_at = [&](double h) {
        Vec z(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i) z[i] = v[i] + h * w[i];
        const double nz = vector_norm(z, T.source_norm);
        if (!(nz > 0.0)) return std::make_pair(0.0, Vec{});
        for (double& zi : z) zi /= nz;
        return std::make_pair(vector_norm(op_apply(T, z), NormTag::sup()),
                              std::move(z));
      };
      if (value_at(0.0).first <= goal) continue;
      double hi = 1.0;
      int grow = 0;
      while (value_at(hi).first > goal && grow < 40) {
        hi *= 2.0;
        ++grow;
      }
      if (value_at(hi).first > goal) continue;
      double lo = 0.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (value_at(mid).first > goal ? lo : hi) = mid;
      }
      Vec z = value_at(hi).second;
      if (z.empty()) continue;
      x0 = std::move(z);
      placed = true;
    }
    if (!placed) {
      throw PreconditionError("gen_instance: slack not reachable from the "
                              "norming point for this draw");
    }
  }

  inst.op = std::move(T);
  inst.point = std::move(x0);
  inst.slack =
      1.0 - vector_norm(op_apply(inst.op, inst.point), NormTag::sup());
  return inst;
}

}  // namespace

Instance gen_instance(const InstanceSpec& spec) {
  check_spec(spec);
  if (spec.pipeline == "ck-cs") return gen_ck_cs(spec);
  if (spec.pipeline == "ucx") return gen_ucx(spec);
  return gen_predual(spec);
}

void to_json(nlohmann::json& j, const Instance& inst) {
  j = nlohmann::json{{"pipeline", inst.pipeline},
                     {"seed", inst.seed},
                     {"slack", inst.slack}};
  if (inst.pipeline == "ck-cs") {
    j["kernel"] = inst.kernel;
    j["f0"] = Fn{inst.point};
  } else if (inst.pipeline == "ucx") {
    j["operator"] = inst.op;
    j["f0"] = Fn{inst.point};
  } else if (inst.pipeline == "predual") {
    j["operator"] = inst.op;
    j["x0"] = inst.point;
  } else {
    throw std::invalid_argument("instance JSON: unknown pipeline '" +
                                inst.pipeline + "'");
  }
}

void from_json(const nlohmann::json& j, Instance& inst) {
  inst = Instance{};
  inst.pipeline = j.at("pipeline").get<std::string>();
  inst.seed = j.at("seed").get<std::uint64_t>();
  inst.slack = j.at("slack").get<double>();
  if (inst.pipeline == "ck-cs") {
    inst.kernel = j.at("kernel").get<Kernel>();
    inst.point = j.at("f0").get<Fn>().values;
  } else if (inst.pipeline == "ucx") {
    inst.op = j.at("operator").get<GeneralOperator>();
    inst.point = j.at("f0").get<Fn>().values;
  } else if (inst.pipeline == "predual") {
    inst.op = j.at("operator").get<GeneralOperator>();
    inst.point = j.at("x0").get<Vec>();
  } else {
    throw std::invalid_argument("instance JSON: unknown pipeline '" +
                                inst.pipeline + "'");
  }
}

namespace {

std::string claim_mismatch(const std::string& what, double got,
                           double claimed) {
  return "certificate claim mismatch: " + what + " recomputed " + fmt17(got) +
         " vs claimed " + fmt17(claimed);
}

// The checks below recompute every claim from (instance, corrected
// operator, witness) using the core norms and compare against both the
// required bound and the stored value.
std::string check_common(double norm_s, double value, double witness_norm,
                         double dp, double dop, const BpbCertificate& c) {
  if (std::abs(norm_s - 1.0) > c.tol) {
    return "corrected operator norm " + fmt17(norm_s) + " is not 1 within tol";
  }
  if (std::abs(witness_norm - 1.0) > c.tol) {
    return "witness norm " + fmt17(witness_norm) + " is not 1 within tol";
  }
  if (std::abs(value - norm_s) > c.tol) {
    return "witness attains " + fmt17(value) + ", not the operator norm " +
           fmt17(norm_s);
  }
  if (std::abs(value - c.attained_norm) > c.tol) {
    return claim_mismatch("attained_norm", value, c.attained_norm);
  }
  if (!(dp < c.epsilon)) {
    return "witness distance " + fmt17(dp) + " is not below epsilon";
  }
  if (std::abs(dp - c.dist_point) > c.tol) {
    return claim_mismatch("dist_point", dp, c.dist_point);
  }
  if (!(dop < c.epsilon)) {
    return "operator distance " + fmt17(dop) + " is not below epsilon";
  }
  if (std::abs(dop - c.dist_operator) > c.tol) {
    return claim_mismatch("dist_operator", dop, c.dist_operator);
  }
  return "";
}

Vec vec_sub(const Vec& a, const Vec& b) {
  Vec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

}  // namespace

std::string verify_report(const RunReport& rep) {
  const BpbCertificate& c = rep.certificate;
  const Instance& inst = rep.instance;
  if (c.witness.empty()) return "certificate has no witness";
  if (rep.pipeline == "ck-cs") {
    const Kernel& S = rep.s_kernel;
    if (S.source_dim != inst.kernel.source_dim ||
        S.target_dim() != inst.kernel.target_dim() ||
        c.witness.size() != S.source_dim) {
      return "corrected kernel shape does not match the instance";
    }
    const Fn w{c.witness};
    return check_common(kernel_norm(S), sup_norm(kernel_apply(S, w)),
                        sup_norm(w), sup_norm(Fn{vec_sub(w.values, inst.point)}),
                        kernel_norm(kernel_sub(S, inst.kernel)), c);
  }
  if (rep.pipeline == "ucx" || rep.pipeline == "predual") {
    const GeneralOperator& S = rep.s_op;
    if (S.source_dim() != inst.op.source_dim() ||
        S.target_dim() != inst.op.target_dim() ||
        c.witness.size() != S.source_dim()) {
      return "corrected operator shape does not match the instance";
    }
    if (!(S.source_norm == inst.op.source_norm) ||
        !(S.target_norm == inst.op.target_norm)) {
      return "corrected operator norm tags do not match the instance";
    }
    return check_common(
        operator_norm(S),
        vector_norm(op_apply(S, c.witness), S.target_norm),
        vector_norm(c.witness, S.source_norm),
        vector_norm(vec_sub(c.witness, inst.point), S.source_norm),
        operator_norm(op_sub(S, inst.op)), c);
  }
  return "unknown pipeline '" + rep.pipeline + "'";
}

RunReport run_and_verify(const Instance& inst, double epsilon, double tol) {
  RunReport rep;
  rep.pipeline = inst.pipeline;
  rep.epsilon = epsilon;
  rep.tol = tol;
  rep.instance = inst;
  const auto start = std::chrono::steady_clock::now();
  try {
    if (inst.pipeline == "ck-cs") {
      auto res = ckcs::correct_ck_cs(inst.kernel, Fn{inst.point}, epsilon, tol);
      rep.s_kernel = std::move(res.S);
      rep.certificate = res.certificate;
      rep.steps = res.steps_used;
      rep.ledger = {{"slack", res.slack},   {"delta", res.delta},
                    {"r", res.r},           {"defect", res.defect},
                    {"dist_point", res.certificate.dist_point},
                    {"dist_operator", res.certificate.dist_operator}};
    } else if (inst.pipeline == "ucx") {
      auto res = ucx::correct_ucx(inst.op, Fn{inst.point}, epsilon, tol);
      rep.s_op = std::move(res.S);
      rep.certificate = res.certificate;
      rep.ledger = {{"norm_tpf0", res.ledger.norm_tpf0},
                    {"dist_v_u", res.ledger.dist_v_u},
                    {"dist_u_u1", res.ledger.dist_u_u1},
                    {"dist_tp_t", res.ledger.dist_tp_t},
                    {"chain_total", res.ledger.chain_total},
                    {"chain_budget", res.ledger.chain_budget},
                    {"dist_point", res.certificate.dist_point},
                    {"dist_operator", res.certificate.dist_operator}};
    } else if (inst.pipeline == "predual") {
      auto res = predual::correct_predual(inst.op, inst.point, epsilon, tol);
      rep.s_op = std::move(res.S);
      rep.certificate = res.certificate;
      rep.steps = res.m;
      rep.ledger = {{"eta", res.params.eta},
                    {"eta_prime", predual::eta_prime(epsilon / 2.0)},
                    {"delta", res.params.delta},
                    {"tail_norm", res.ledger.tail_norm},
                    {"norm_pt", res.ledger.norm_pt},
                    {"dist_r_v", res.ledger.dist_r_v},
                    {"truncation_m", static_cast<double>(res.m)},
                    {"dist_point", res.certificate.dist_point},
                    {"dist_operator", res.certificate.dist_operator}};
    } else {
      throw std::invalid_argument("run_and_verify: unknown pipeline '" +
                                  inst.pipeline + "'");
    }
    const std::string diag = verify_report(rep);
    if (!diag.empty()) {
      throw VerificationError(diag);
    }
    rep.exit_code = kExitVerified;
    rep.status = "verified";
  } catch (const PreconditionError& e) {
    rep.exit_code = kExitPrecondition;
    rep.status = "precondition-rejected";
    rep.error = e.what();
  } catch (const VerificationError& e) {
    rep.exit_code = kExitVerification;
    rep.status = "verification-failed";
    rep.error = e.what();
  } catch (const BudgetError& e) {
    rep.exit_code = kExitBudget;
    rep.status = "budget-exhausted";
    rep.error = e.what();
  }
  rep.runtime_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return rep;
}

RunReport corrupt_witness(RunReport rep, double bump) {
  Vec& w = rep.certificate.witness;
  if (w.empty()) throw std::invalid_argument("corrupt_witness: no witness");
  std::size_t k = 0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (std::abs(w[i]) > std::abs(w[k])) k = i;
  }
  w[k] += std::copysign(bump, w[k]);
  return rep;
}

RunReport corrupt_operator(RunReport rep, double factor) {
  if (rep.pipeline == "ck-cs") {
    rep.s_kernel = kernel_scale(rep.s_kernel, factor);
  } else {
    rep.s_op = op_scale(rep.s_op, factor);
  }
  return rep;
}

nlohmann::json report_to_json(const RunReport& rep) {
  nlohmann::json j{{"pipeline", rep.pipeline}, {"epsilon", rep.epsilon},
                   {"tol", rep.tol},           {"exit_code", rep.exit_code},
                   {"status", rep.status},     {"steps", rep.steps}};
  j["instance"] = rep.instance;
  if (!rep.error.empty()) j["error"] = rep.error;
  if (rep.exit_code == kExitVerified) {
    if (rep.pipeline == "ck-cs") {
      j["corrected"] = rep.s_kernel;
    } else {
      j["corrected"] = rep.s_op;
    }
    j["certificate"] = rep.certificate;
    nlohmann::json led = nlohmann::json::object();
    for (const auto& [name, value] : rep.ledger) led[name] = value;
    j["ledger"] = led;
  }
  return j;
}

RunReport report_from_json(const nlohmann::json& j) {
  RunReport rep;
  rep.pipeline = j.at("pipeline").get<std::string>();
  rep.epsilon = j.at("epsilon").get<double>();
  rep.tol = j.at("tol").get<double>();
  rep.exit_code = j.at("exit_code").get<int>();
  rep.status = j.at("status").get<std::string>();
  rep.steps = j.at("steps").get<std::size_t>();
  rep.instance = j.at("instance").get<Instance>();
  if (j.contains("error")) rep.error = j.at("error").get<std::string>();
  if (rep.exit_code == kExitVerified) {
    if (rep.pipeline == "ck-cs") {
      rep.s_kernel = j.at("corrected").get<Kernel>();
    } else {
      rep.s_op = j.at("corrected").get<GeneralOperator>();
    }
    rep.certificate = j.at("certificate").get<BpbCertificate>();
    for (const auto& [name, value] : j.at("ledger").items()) {
      rep.ledger.emplace_back(name, value.get<double>());
    }
  }
  return rep;
}

std::string sweep_eta(const SweepOptions& opts) {
  if (opts.epsilons.empty() || opts.slacks.empty() || opts.dims.empty() ||
      opts.trials == 0) {
    throw std::invalid_argument("sweep_eta: grids must be non-empty");
  }
  std::ostringstream csv;
  csv << "pipeline,epsilon,slack,n,m,seed,status,success,dist_point,"
         "dist_operator,steps,runtime_ms\n";
  std::uint64_t seed = opts.seed0;
  for (double eps : opts.epsilons) {
    for (double slack : opts.slacks) {
      for (std::size_t d : opts.dims) {
        InstanceSpec spec;
        spec.pipeline = opts.pipeline;
        spec.slack = slack;
        if (opts.pipeline == "ck-cs") {
          spec.n = d;
          spec.m = d;
        } else if (opts.pipeline == "ucx") {
          spec.n = d;
          spec.m = std::min<std::size_t>(d, 3);
        } else {
          spec.n = d;
          spec.m = d + 4;
        }
        for (std::size_t t = 0; t < opts.trials; ++t) {
          spec.seed = seed++;
          const Instance inst = gen_instance(spec);
          const RunReport rep = run_and_verify(inst, eps, opts.tol);
          const bool success = rep.exit_code == kExitVerified &&
                               rep.certificate.dist_point < eps &&
                               rep.certificate.dist_operator < eps;
          csv << opts.pipeline << ',' << fmt17(eps) << ',' << fmt17(slack)
              << ',' << spec.n << ',' << spec.m << ',' << spec.seed << ','
              << rep.status << ',' << (success ? 1 : 0) << ','
              << fmt17(rep.certificate.dist_point) << ','
              << fmt17(rep.certificate.dist_operator) << ',' << rep.steps
              << ',' << fmt17(rep.runtime_ms) << '\n';
        }
      }
    }
  }
  return csv.str();
}

}  // namespace bpb::harness
