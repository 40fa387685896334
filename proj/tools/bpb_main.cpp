// Command-line front end.
//
// Subcommands:
//   gen        generate a random instance with prescribed attainment slack
//   ck-cs      kernel-operator correction (sup-norm source and target)
//   ucx        correction into a uniformly convex coordinate space
//   predual    correction into a c0-style coordinate space
//   partition  small-oscillation partition and averaging projection only
//   sweep      slack-threshold sweep over (epsilon, slack, dimension) cells
//   verify     re-check a stored run report against the core norms
//
// Exit codes: 0 all certificates verified, 2 precondition rejection,
// 3 verification failure, 1 any other error (budget exhaustion, bad I/O).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bpb/core.hpp"
#include "bpb/harness.hpp"
#include "bpb/json_io.hpp"
#include "bpb/partition.hpp"

namespace {

using bpb::Fn;
using bpb::GeneralOperator;
using bpb::NormTag;
using bpb::Vec;

void emit(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    bpb::save_json_file(out_path, j);
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << text) || !os.flush()) {
    throw std::runtime_error("cannot write " + path);
  }
}

// Optional pre-normalization for hand-written instances.  Generated
// instances are already unit-normalized; by default non-unit inputs are
// rejected by the pipeline preconditions.  With --normalize the operator
// and point are scaled to unit norm and the scales are recorded in the
// report so the original data stays recoverable.
struct InputScales {
  bool applied = false;
  double op_scale = 1.0;
  double point_scale = 1.0;
};

InputScales normalize_instance(bpb::harness::Instance& inst) {
  InputScales s;
  s.applied = true;
  double norm_op = 0.0;
  if (inst.pipeline == "ck-cs") {
    norm_op = bpb::kernel_norm(inst.kernel);
    if (!(norm_op > 0.0)) throw bpb::PreconditionError("zero operator");
    inst.kernel = bpb::kernel_scale(inst.kernel, 1.0 / norm_op);
  } else {
    norm_op = bpb::operator_norm(inst.op);
    if (!(norm_op > 0.0)) throw bpb::PreconditionError("zero operator");
    inst.op = bpb::op_scale(inst.op, 1.0 / norm_op);
  }
  s.op_scale = norm_op;
  const NormTag src =
      inst.pipeline == "ck-cs" ? NormTag::sup() : inst.op.source_norm;
  const double norm_pt = bpb::vector_norm(inst.point, src);
  if (!(norm_pt > 0.0)) throw bpb::PreconditionError("zero point");
  for (double& x : inst.point) x /= norm_pt;
  s.point_scale = norm_pt;
  inst.slack = inst.pipeline == "ck-cs"
                   ? 1.0 - bpb::sup_norm(bpb::kernel_apply(inst.kernel,
                                                           Fn{inst.point}))
                   : 1.0 - bpb::vector_norm(bpb::op_apply(inst.op, inst.point),
                                            inst.op.target_norm);
  return s;
}

double ledger_value(const bpb::harness::RunReport& rep,
                    const std::string& name) {
  for (const auto& [key, value] : rep.ledger) {
    if (key == name) return value;
  }
  return 0.0;
}

int run_pipeline(const std::string& pipeline, const std::string& instance_path,
                 double epsilon, double tol, bool normalize,
                 const std::string& out_path, const std::string& report_path) {
  bpb::harness::Instance inst =
      bpb::load_json_file(instance_path).get<bpb::harness::Instance>();
  if (inst.pipeline != pipeline) {
    throw bpb::PreconditionError("instance is for pipeline '" + inst.pipeline +
                                 "', not '" + pipeline + "'");
  }
  InputScales scales;
  if (normalize) scales = normalize_instance(inst);

  const bpb::harness::RunReport rep =
      bpb::harness::run_and_verify(inst, epsilon, tol);
  nlohmann::json j = bpb::harness::report_to_json(rep);
  if (scales.applied) {
    j["input_scale_operator"] = scales.op_scale;
    j["input_scale_point"] = scales.point_scale;
  }
  emit(j, out_path);
  if (!rep.error.empty()) std::cerr << rep.status << ": " << rep.error << "\n";

  if (!report_path.empty() && rep.exit_code == bpb::harness::kExitVerified &&
      pipeline == "ck-cs") {
    std::string csv =
        "epsilon,slack,delta,r,steps,dist_point,dist_operator,defect\n";
    csv += bpb::fmt17(epsilon) + ',' + bpb::fmt17(ledger_value(rep, "slack")) +
           ',' + bpb::fmt17(ledger_value(rep, "delta")) + ',' +
           bpb::fmt17(ledger_value(rep, "r")) + ',' +
           std::to_string(rep.steps) + ',' +
           bpb::fmt17(rep.certificate.dist_point) + ',' +
           bpb::fmt17(rep.certificate.dist_operator) + ',' +
           bpb::fmt17(ledger_value(rep, "defect")) + '\n';
    write_text(report_path, csv);
  }
  return rep.exit_code;
}

int run_partition(const std::string& instance_path, double epsilon, double tol,
                  const std::string& out_path) {
  const nlohmann::json j = bpb::load_json_file(instance_path);
  if (j.contains("pipeline") &&
      j.at("pipeline").get<std::string>() != "ucx") {
    throw bpb::PreconditionError(
        "partition expects a ucx-shaped instance (operator + f0)");
  }
  const auto T = j.at("operator").get<GeneralOperator>();
  const auto f0 = j.at("f0").get<Fn>();

  const bpb::part::PartitionResult res =
      bpb::part::build_partition(T, f0, epsilon, tol);

  double osc_max = 0.0;
  for (const auto& block : res.projection.blocks) {
    osc_max = std::max(osc_max, bpb::oscillation(f0, block));
  }
  const GeneralOperator tp = bpb::op_compose(T, res.projection.projector);
  const GeneralOperator diff = bpb::op_sub(T, tp);
  nlohmann::json out{{"epsilon", epsilon},
                     {"blocks", res.projection.blocks},
                     {"weight", res.projection.weight},
                     {"projector", res.projection.projector},
                     {"osc_max", osc_max},
                     {"projector_norm",
                      bpb::operator_norm(res.projection.projector)}};
  if (T.source_dim() <= bpb::kOracleDimCap) {
    out["dist_t_tp"] = bpb::operator_norm(diff);
    out["dist_t_tp_exact"] = true;
  } else {
    // Row-wise bound: |(Ax)_i| <= l1(row_i) on the sup ball.
    Vec row_l1(diff.target_dim(), 0.0);
    for (std::size_t i = 0; i < diff.target_dim(); ++i) {
      for (double v : diff.matrix[i]) row_l1[i] += std::abs(v);
    }
    out["dist_t_tp"] = bpb::vector_norm(row_l1, diff.target_norm);
    out["dist_t_tp_exact"] = false;
  }
  const double bound = out.at("dist_t_tp").get<double>();
  emit(out, out_path);
  if (!(bound < epsilon)) {
    std::cerr << "verification-failed: operator-projection distance " +
                     bpb::fmt17(bound) + " is not below epsilon\n";
    return bpb::harness::kExitVerification;
  }
  return bpb::harness::kExitVerified;
}

int run_verify(const std::string& instance_path) {
  const bpb::harness::RunReport rep =
      bpb::harness::report_from_json(bpb::load_json_file(instance_path));
  if (rep.exit_code != bpb::harness::kExitVerified) {
    std::cerr << "report contains no verified certificate (status '" +
                     rep.status + "')\n";
    return bpb::harness::kExitPrecondition;
  }
  const std::string diag = bpb::harness::verify_report(rep);
  if (!diag.empty()) {
    std::cerr << "verification-failed: " << diag << "\n";
    return bpb::harness::kExitVerification;
  }
  std::cout << "verified\n";
  return bpb::harness::kExitVerified;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constructive norm-attainment corrections with "
               "machine-checkable certificates"};
  app.require_subcommand(1);

  std::string instance_path;
  std::string out_path;
  std::string report_path;
  double epsilon = 0.5;
  double tol = bpb::kDefaultTol;
  bool normalize = false;

  bpb::harness::InstanceSpec spec;
  std::string source_norm = "p:2";
  std::string target_norm = "euclid";

  bpb::harness::SweepOptions sweep;
  sweep.dims = {2, 4, 8};

  CLI::App* gen = app.add_subcommand(
      "gen", "Generate a random instance with prescribed slack");
  gen->add_option("--pipeline", spec.pipeline, "ck-cs | ucx | predual")
      ->required();
  gen->add_option("--n", spec.n, "source dimension");
  gen->add_option("--m", spec.m, "target dimension");
  gen->add_option("--slack", spec.slack, "requested 1 - |T x0|");
  gen->add_option("--seed", spec.seed, "generator seed");
  gen->add_option("--source-norm", source_norm, "predual source norm tag");
  gen->add_option("--target-norm", target_norm, "ucx target norm tag");
  gen->add_option("--out", out_path, "output path (default stdout)");

  const auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--instance", instance_path, "instance JSON")->required();
    cmd->add_option("--epsilon", epsilon, "requested distance bound")
        ->required();
    cmd->add_option("--tol", tol, "certificate tolerance");
    cmd->add_option("--out", out_path, "report path (default stdout)");
    cmd->add_flag("--normalize", normalize,
                  "scale non-unit inputs to unit norm (recorded in report)");
  };
  CLI::App* ckcs = app.add_subcommand("ck-cs", "Kernel-operator correction");
  add_run_flags(ckcs);
  ckcs->add_option("--report", report_path, "one-line CSV summary path");
  CLI::App* ucx =
      app.add_subcommand("ucx", "Correction into a uniformly convex space");
  add_run_flags(ucx);
  CLI::App* predual =
      app.add_subcommand("predual", "Correction into a c0-style space");
  add_run_flags(predual);

  CLI::App* partition = app.add_subcommand(
      "partition", "Small-oscillation partition and projection");
  partition->add_option("--instance", instance_path, "instance JSON")
      ->required();
  partition->add_option("--epsilon", epsilon, "oscillation bound")->required();
  partition->add_option("--tol", tol, "verification tolerance");
  partition->add_option("--out", out_path, "output path (default stdout)");

  CLI::App* sw = app.add_subcommand("sweep", "Slack-threshold sweep (CSV)");
  sw->add_option("--pipeline", sweep.pipeline, "ck-cs | ucx | predual");
  sw->add_option("--epsilon", sweep.epsilons, "epsilon grid")->required();
  sw->add_option("--slack", sweep.slacks, "slack grid")->required();
  sw->add_option("--dim", sweep.dims, "dimension grid");
  sw->add_option("--trials", sweep.trials, "instances per cell");
  sw->add_option("--seed", sweep.seed0, "first seed");
  sw->add_option("--tol", sweep.tol, "certificate tolerance");
  sw->add_option("--out", out_path, "CSV path (default stdout)");

  CLI::App* verify =
      app.add_subcommand("verify", "Re-check a stored run report");
  verify->add_option("--instance", instance_path, "report JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      spec.source_norm = NormTag::parse(source_norm);
      spec.target_norm = NormTag::parse(target_norm);
      const bpb::harness::Instance inst = bpb::harness::gen_instance(spec);
      emit(inst, out_path);
      return 0;
    }
    if (ckcs->parsed()) {
      return run_pipeline("ck-cs", instance_path, epsilon, tol, normalize,
                          out_path, report_path);
    }
    if (ucx->parsed()) {
      return run_pipeline("ucx", instance_path, epsilon, tol, normalize,
                          out_path, "");
    }
    if (predual->parsed()) {
      return run_pipeline("predual", instance_path, epsilon, tol, normalize,
                          out_path, "");
    }
    if (partition->parsed()) {
      return run_partition(instance_path, epsilon, tol, out_path);
    }
    if (sw->parsed()) {
      const std::string csv = bpb::harness::sweep_eta(sweep);
      if (out_path.empty()) {
        std::cout << csv;
      } else {
        write_text(out_path, csv);
      }
      return 0;
    }
    if (verify->parsed()) {
      return run_verify(instance_path);
    }
  } catch (const bpb::PreconditionError& e) {
    std::cerr << "precondition-rejected: " << e.what() << "\n";
    return bpb::harness::kExitPrecondition;
  } catch (const bpb::VerificationError& e) {
    std::cerr << "verification-failed: " << e.what() << "\n";
    return bpb::harness::kExitVerification;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
