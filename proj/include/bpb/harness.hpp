// Experiment harness: random instances with prescribed attainment slack,
// end-to-end pipeline runs with certificate re-verification against the
// core oracles, fault injection, and slack-threshold sweeps.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bpb/core.hpp"
#include "bpb/json_io.hpp"

namespace bpb::harness {

// Exit semantics shared by the library entry points and the CLI.
inline constexpr int kExitVerified = 0;
inline constexpr int kExitBudget = 1;
inline constexpr int kExitPrecondition = 2;
inline constexpr int kExitVerification = 3;

struct InstanceSpec {
  std::string pipeline;  // "ck-cs" | "ucx" | "predual"
  std::size_t n = 4;     // source dimension
  std::size_t m = 3;     // target dimension
  double slack = 0.0;    // requested 1 - ||T x0||
  std::uint64_t seed = 1;
  NormTag source_norm = NormTag::lp(2.0);   // predual source space
  NormTag target_norm = NormTag::euclid();  // ucx target space
};

// A generated problem instance.  Exactly one of kernel/op is populated,
// according to the pipeline tag; `point` holds f0 (ck-cs, ucx) or x0
// (predual).  `slack` is re-measured after construction and embedded, so
// consumers never trust the requested value.
struct Instance {
  std::string pipeline;
  std::uint64_t seed = 0;
  double slack = 0.0;
  Kernel kernel;
  GeneralOperator op;
  Vec point;
};

// Deterministic generator: identical specs produce byte-identical JSON.
// Entries are i.i.d. uniform on [-1, 1] and then normalized; the point is
// the exact attainer of the dominant row/sign pattern, perturbed along a
// steepest coordinate (or bisected along a random direction) until the
// measured slack matches the request to about 1e-12.
// Throws PreconditionError for infeasible specs (slack not achievable).
Instance gen_instance(const InstanceSpec& spec);

void to_json(nlohmann::json& j, const Instance& inst);
void from_json(const nlohmann::json& j, Instance& inst);

// Outcome of one pipeline run plus independent verification.  When
// exit_code is 0 the certificate was re-checked from the instance and the
// corrected operator using core norms only (kernel_norm, oracle-backed
// operator_norm, vector norms); pipeline-internal values are never reused.
struct RunReport {
  std::string pipeline;
  double epsilon = 0.0;
  double tol = kDefaultTol;
  int exit_code = kExitVerified;
  std::string status;  // "verified" | "precondition-rejected" |
                       // "verification-failed" | "budget-exhausted"
  std::string error;   // diagnosis when exit_code != 0
  Instance instance;
  Kernel s_kernel;         // corrected kernel (ck-cs)
  GeneralOperator s_op;    // corrected operator (ucx, predual)
  BpbCertificate certificate;
  std::vector<std::pair<std::string, double>> ledger;  // per-stage values
  std::size_t steps = 0;
  double runtime_ms = 0.0;  // informational; excluded from report JSON
};

RunReport run_and_verify(const Instance& inst, double epsilon,
                         double tol = kDefaultTol);

// Re-checks every claim of a stored report against the core oracles:
// operator norm 1, unit witness, attainment, distance bounds below
// epsilon, and agreement of each claimed value with its recomputation.
// Returns an empty string on success, else a one-line diagnosis.
std::string verify_report(const RunReport& rep);

// Fault injection for the no-false-positives property.  Claims are left
// stale on purpose; verify_report must reject the result.
RunReport corrupt_witness(RunReport rep, double bump = 0.05);
RunReport corrupt_operator(RunReport rep, double factor = 1.05);

// Report JSON holds everything verify_report needs: the instance, the
// corrected operator, the certificate, and the ledger.  runtime_ms is
// omitted so identical (spec, seed, epsilon) give byte-identical output.
nlohmann::json report_to_json(const RunReport& rep);
RunReport report_from_json(const nlohmann::json& j);

struct SweepOptions {
  std::string pipeline = "ck-cs";
  std::vector<double> epsilons;
  std::vector<double> slacks;       // absolute slack values
  std::vector<std::size_t> dims;    // per-pipeline dimension parameter
  std::size_t trials = 5;
  std::uint64_t seed0 = 1;
  double tol = kDefaultTol;
};

// Runs trials per (epsilon, slack, dim) cell and returns CSV with header
//   pipeline,epsilon,slack,n,m,seed,status,success,dist_point,
//   dist_operator,steps,runtime_ms
// in deterministic cell-major order (epsilon, slack, dim, trial), doubles
// formatted with 17 significant digits.  A success row always has both
// distances below its epsilon; cells with slack above the pipeline
// threshold show up as precondition rejections, not failures.
std::string sweep_eta(const SweepOptions& opts);

}  // namespace bpb::harness
