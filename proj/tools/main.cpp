// flowlab: run the scenario catalog, or drive single simulations, optimizer
// runs, and stability diagnoses directly.
//
// Exit codes: 0 success, 1 validation problem (bad flags, unknown ids),
// 2 numerical obstruction (singular coefficient, defective matrix, divergence).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "common.hpp"
#include "flowlab/errors.hpp"
#include "flowlab/format.hpp"
#include "flowlab/rng.hpp"
#include "scenarios.hpp"

namespace flowlab::tool {
namespace {

FlowSpec make_flow(const std::string& name, double h, int order, double momentum) {
  if (name == "ngf") return FlowSpec::ngf(h);
  if (name == "igr") return FlowSpec::igr(h);
  if (name == "third_order") return FlowSpec::third_order(h);
  if (name == "truncated") return FlowSpec::truncated(h, order);
  if (name == "pf") return FlowSpec::pf(h);
  if (name == "pf_nonprincipal") return FlowSpec::pf_nonprincipal(h);
  if (name == "positive_gradient") return FlowSpec::positive_gradient(h);
  if (name == "flipped_top") return FlowSpec::flipped_top(h);
  if (name == "momentum") return FlowSpec::momentum_flow(h, momentum);
  throw ValidationError("unknown flow '" + name +
                        "' (expected ngf, igr, third_order, truncated, pf, "
                        "pf_nonprincipal, positive_gradient, flipped_top, or momentum)");
}

struct CommonFlags {
  std::string out;
  std::uint64_t seed = 0;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonFlags& flags, const std::string& default_out) {
  cmd->add_option("--out", flags.out, "output directory")->default_val(default_out);
  cmd->add_option("--seed", flags.seed, "seed for seeded models and samplers")
      ->default_val("0");
  cmd->add_option("--format", flags.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->default_val("csv");
}

RunContext make_context(const CommonFlags& flags, std::vector<std::string> overrides = {}) {
  RunContext ctx;
  ctx.out = flags.out;
  ctx.seed = flags.seed;
  ctx.format = flags.format;
  ctx.overrides = Overrides(overrides);
  std::filesystem::create_directories(ctx.out);
  return ctx;
}

int cmd_list() {
  std::cout << catalog_listing();
  return 0;
}

int cmd_run(const std::string& name, const CommonFlags& flags,
            const std::vector<std::string>& overrides) {
  const Scenario* scenario = find_scenario(name);
  if (scenario == nullptr) {
    std::cerr << "unknown scenario '" << name << "'\n\n" << catalog_listing();
    return 1;
  }
  RunContext ctx = make_context(flags, overrides);
  scenario->run(ctx);
  std::cout << "wrote " << ctx.out.string() << "\n";
  return 0;
}

struct SimulateFlags {
  CommonFlags common;
  std::string model = "quad2d";
  std::string flow = "ngf";
  double h = 0.0;
  int order = 2;
  double momentum = 0.0;
  double center = 0.0;
  std::string theta0;
  int gd_steps = 10;
  double step = 5e-5;
  bool record_spectrum = false;
};

int cmd_simulate(const SimulateFlags& flags) {
  RunContext ctx = make_context(flags.common);
  const SelectedModel selected = select_model(flags.model, flags.common.seed, flags.center);
  const Vec theta0 =
      flags.theta0.empty() ? selected.default_theta0 : parse_theta(flags.theta0);
  const FlowSpec spec = validate(make_flow(flags.flow, flags.h, flags.order, flags.momentum));

  SimOptions options;
  options.step = flags.step;
  options.record_spectrum = flags.record_spectrum;

  Json settings;
  settings["model"] = flags.model;
  settings["flow"] = flags.flow;
  settings["h"] = flags.h;
  if (flags.flow == "truncated") settings["order"] = flags.order;
  if (flags.flow == "momentum") settings["momentum"] = flags.momentum;
  settings["gd_steps"] = flags.gd_steps;
  settings["step"] = flags.step;
  settings["record_spectrum"] = flags.record_spectrum;
  echo_config(ctx, "simulate", settings);

  Trajectory traj = euler_simulate(spec, *selected.model, ParameterState::real(theta0),
                                   flags.gd_steps * flags.h, options);
  traj.seed = flags.common.seed;
  emit_trajectory(ctx, "trajectory", traj);
  std::cout << "wrote " << ctx.out.string() << " (" << traj.records.size() << " records"
            << (traj.diverged ? ", diverged" : "") << ")\n";
  return 0;
}

struct OptimizeFlags {
  CommonFlags common;
  std::string model = "quad2d";
  std::string method = "gd";
  double h = 0.0;
  double p = 1.0;
  double cap = 5.0;
  double momentum = 0.9;
  double center = 0.0;
  std::string theta0;
  int steps = 30;
  bool measure_drift = false;
  bool record_spectrum = false;
  bool fd_curvature = false;
};

int cmd_optimize(const OptimizeFlags& flags) {
  const bool fixed_rate = flags.method == "gd" || flags.method == "momentum";
  if (fixed_rate && flags.h <= 0)
    throw ValidationError("method '" + flags.method + "' requires --h > 0");
  if (!fixed_rate && flags.h != 0)
    throw ValidationError("method '" + flags.method + "' sets its own rate; drop --h");

  RunContext ctx = make_context(flags.common);
  const SelectedModel selected = select_model(flags.model, flags.common.seed, flags.center);
  const LossModel& model = *selected.model;
  const Vec start =
      flags.theta0.empty() ? selected.default_theta0 : parse_theta(flags.theta0);

  Json settings;
  settings["model"] = flags.model;
  settings["method"] = flags.method;
  settings["steps"] = flags.steps;
  if (fixed_rate) settings["h"] = flags.h;
  if (flags.method == "momentum" || flags.method == "dal_momentum")
    settings["momentum"] = flags.momentum;
  if (flags.method.rfind("dal", 0) == 0) {
    settings["p"] = flags.p;
    settings["cap"] = flags.cap;
    settings["curvature_estimator"] = flags.fd_curvature ? "fd" : "exact";
  }
  echo_config(ctx, "optimize", settings);

  OptRunLog log;
  log.model_name = model.name();
  log.seed = flags.common.seed;

  DalConfig dal_cfg;
  dal_cfg.p = flags.p;
  dal_cfg.lr_cap = flags.cap;
  dal_cfg.estimator =
      flags.fd_curvature ? CurvatureEstimator::FdApprox : CurvatureEstimator::ExactHvp;
  if (flags.method.rfind("dal", 0) == 0) dal_cfg = validate(dal_cfg);

  if (flags.method == "gd") {
    log.method = "gd";
    GdOptions opt;
    opt.record_spectrum = flags.record_spectrum;
    opt.measure_drift = flags.measure_drift;
    opt.lanczos_seed = derive_seed(flags.common.seed, 101);
    const GdRun run =
        gd_run(model, ParameterState::real(start), {{flags.h, flags.steps}}, opt);
    log = run.log;
    log.seed = flags.common.seed;
    if (run.diverged) std::cout << "note: iterates crossed the divergence guard\n";
  } else if (flags.method == "momentum" || flags.method == "dal_momentum" ||
             flags.method == "dal") {
    log.method = flags.method;
    OptimizerState state = make_optimizer_state(ParameterState::real(start));
    for (int k = 0; k < flags.steps; ++k) {
      OptRecord rec;
      rec.base.t = k;
      rec.base.theta = state.theta.values();
      rec.base.loss = model.eval(state.theta);
      rec.base.grad_norm = model.grad(state.theta).norm();
      try {
        if (flags.method == "momentum") {
          state = momentum_step(model, state, flags.h, flags.momentum);
        } else if (flags.method == "dal_momentum") {
          state = dal_momentum_step(model, state, flags.momentum, dal_cfg);
        } else {
          const DalStep step = dal_step(model, state.theta, dal_cfg);
          state.theta = step.theta;
          state.last_lr = step.lr;
        }
      } catch (const ZeroGradient&) {
        log.records.push_back(std::move(rec));
        break;
      }
      rec.lr = flags.method == "momentum" ? flags.h : state.last_lr;
      rec.drift_estimated =
          flags.method == "momentum"
              ? momentum_drift_estimate(model, ParameterState{rec.base.theta},
                                        state.velocity, flags.h, flags.momentum)
                    .norm()
              : drift_estimate(model, ParameterState{rec.base.theta}, rec.lr);
      log.records.push_back(std::move(rec));
      if (!state.theta.values().allFinite() || state.theta.norm() > 1e12) {
        std::cout << "note: iterates crossed the divergence guard\n";
        break;
      }
    }
  } else if (flags.method == "dal_per_param") {
    log.method = "dal_per_param";
    ParameterState theta = ParameterState::real(start);
    for (int k = 0; k < flags.steps; ++k) {
      OptRecord rec;
      rec.base.t = k;
      rec.base.theta = theta.values();
      rec.base.loss = model.eval(theta);
      rec.base.grad_norm = model.grad(theta).norm();
      try {
        const PerParamDalStep step = per_param_dal_step(model, theta, flags.p, flags.cap);
        theta = step.theta;
        rec.lr = step.lr.mean();  // scalar column: mean of the elementwise rates
      } catch (const ZeroGradient&) {
        log.records.push_back(std::move(rec));
        break;
      }
      log.records.push_back(std::move(rec));
      if (!theta.values().allFinite() || theta.norm() > 1e12) {
        std::cout << "note: iterates crossed the divergence guard\n";
        break;
      }
    }
  } else {
    throw ValidationError("unknown method '" + flags.method +
                          "' (expected gd, momentum, dal, dal_momentum, or dal_per_param)");
  }

  emit_runlog(ctx, "runlog", log);
  std::cout << "wrote " << ctx.out.string() << " (" << log.records.size() << " records, "
            << "final loss " << format_double(log.records.back().base.loss.real()) << ")\n";
  return 0;
}

struct DiagnoseFlags {
  CommonFlags common;
  std::string model = "mlp";
  double h = 0.0;
  double center = 0.0;
  std::string theta0;
  int top = 5;
};

int cmd_diagnose(const DiagnoseFlags& flags) {
  RunContext ctx = make_context(flags.common);
  const SelectedModel selected = select_model(flags.model, flags.common.seed, flags.center);
  const Vec theta0 =
      flags.theta0.empty() ? selected.default_theta0 : parse_theta(flags.theta0);

  Json settings;
  settings["model"] = flags.model;
  settings["h"] = flags.h;
  settings["top"] = flags.top;
  echo_config(ctx, "diagnose", settings);

  const StabilityReport report =
      stability_report(*selected.model, ParameterState::real(theta0), flags.h);

  Json doc;
  doc["model"] = flags.model;
  doc["h"] = report.h;
  doc["threshold"] = report.threshold;
  doc["lambda0"] = report.lambda0;
  doc["complete"] = report.complete;
  doc["near_defective"] = report.near_defective;
  doc["edge_state"] = regime_name(edge_state(report.lambda0, report.h));
  Json dirs = Json::array();
  const int shown = std::min<int>(flags.top, static_cast<int>(report.directions.size()));
  for (int i = 0; i < shown; ++i) {
    const DirectionReport& d = report.directions[i];
    Json entry;
    entry["index"] = d.index;
    entry["lambda_re"] = d.lambda.real();
    entry["lambda_im"] = d.lambda.imag();
    entry["regime"] = regime_name(d.regime);
    entry["singular"] = d.singular;
    entry["g_dot_u_re"] = d.g_dot_u.real();
    entry["g_dot_u_im"] = d.g_dot_u.imag();
    if (!d.singular) {
      entry["alpha_pf_re"] = d.alpha_pf.real();
      entry["alpha_pf_im"] = d.alpha_pf.imag();
      entry["contribution_re"] = d.contribution.real();
      entry["contribution_im"] = d.contribution.imag();
    }
    dirs.push_back(std::move(entry));
  }
  doc["directions"] = std::move(dirs);
  emit_json(ctx, "diagnosis", doc);

  std::printf("lambda0 = %s, threshold 2/h = %s, state: %s\n",
              format_double(report.lambda0).c_str(), format_double(report.threshold).c_str(),
              regime_name(edge_state(report.lambda0, report.h)).c_str());
  for (int i = 0; i < shown; ++i) {
    const DirectionReport& d = report.directions[i];
    std::printf("  dir %d: lambda = %s, regime = %s%s\n", d.index,
                format_double(d.lambda.real()).c_str(), regime_name(d.regime).c_str(),
                d.singular ? " (singular coefficient)" : "");
  }
  std::printf("wrote %s\n", ctx.out.string().c_str());
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"numerical laboratory for backward-error flows of gradient descent"};
  app.require_subcommand(1);
  // --h is a real flag here, so help must not claim the single-dash -h name.
  app.set_help_flag("--help", "print help and exit");
  const auto add_sub = [&app](const char* name, const char* desc) {
    auto* sub = app.add_subcommand(name, desc);
    sub->set_help_flag("--help", "print help and exit");
    return sub;
  };

  // run
  auto* run = add_sub("run", "run a scenario from the catalog");
  std::string scenario_name;
  CommonFlags run_flags;
  std::vector<std::string> overrides;
  run->add_option("scenario", scenario_name, "scenario id (see: flowlab list)")->required();
  add_common(run, run_flags, "out/run");
  run->add_option("--set", overrides, "override a scenario setting, key=value (repeatable)");

  // list
  auto* list = add_sub("list", "list the scenario catalog");

  // simulate
  auto* simulate = add_sub("simulate", "Euler-integrate one flow on one model");
  SimulateFlags sim;
  add_common(simulate, sim.common, "out/simulate");
  simulate->add_option("--model", sim.model, "quad2d, scalar, rosenbrock, cos_branch, mlp");
  simulate->add_option("--flow", sim.flow, "flow kind")->required();
  simulate->add_option("--h", sim.h, "modeled GD step size")->required();
  simulate->add_option("--order", sim.order, "series order (truncated flow)");
  simulate->add_option("--momentum", sim.momentum, "momentum coefficient (momentum flow)");
  simulate->add_option("--center", sim.center, "minimum location (scalar model)");
  simulate->add_option("--theta0", sim.theta0, "comma-separated start point");
  simulate->add_option("--gd-steps", sim.gd_steps, "modeled GD steps to integrate over");
  simulate->add_option("--step", sim.step, "Euler substep");
  simulate->add_flag("--record-spectrum", sim.record_spectrum,
                     "log lambda0 and the top-direction contribution per record");

  // optimize
  auto* optimize = add_sub("optimize", "run an optimizer and log the iterates");
  OptimizeFlags opt;
  add_common(optimize, opt.common, "out/optimize");
  optimize->add_option("--model", opt.model, "quad2d, scalar, rosenbrock, cos_branch, mlp");
  optimize->add_option("--method", opt.method,
                       "gd, momentum, dal, dal_momentum, dal_per_param");
  optimize->add_option("--h", opt.h, "step size (gd and momentum)");
  optimize->add_option("--p", opt.p, "drift-adjusted exponent");
  optimize->add_option("--cap", opt.cap, "learning-rate cap");
  optimize->add_option("--momentum", opt.momentum, "momentum coefficient");
  optimize->add_option("--center", opt.center, "minimum location (scalar model)");
  optimize->add_option("--theta0", opt.theta0, "comma-separated start point");
  optimize->add_option("--steps", opt.steps, "iterations");
  optimize->add_flag("--measure-drift", opt.measure_drift,
                     "integrate the gradient flow per record to measure drift (gd)");
  optimize->add_flag("--record-spectrum", opt.record_spectrum,
                     "log lambda0 and the top-direction contribution per record (gd)");
  optimize->add_flag("--fd-curvature", opt.fd_curvature,
                     "estimate curvature by finite differences instead of exact products");

  // diagnose
  auto* diagnose = add_sub("diagnose", "stability report at a parameter point");
  DiagnoseFlags diag;
  add_common(diagnose, diag.common, "out/diagnose");
  diagnose->add_option("--model", diag.model, "quad2d, scalar, rosenbrock, cos_branch, mlp");
  diagnose->add_option("--h", diag.h, "step size the report is taken against")->required();
  diagnose->add_option("--center", diag.center, "minimum location (scalar model)");
  diagnose->add_option("--theta0", diag.theta0, "comma-separated parameter point");
  diagnose->add_option("--top", diag.top, "directions to include");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (list->parsed()) return cmd_list();
  if (run->parsed()) return cmd_run(scenario_name, run_flags, overrides);
  if (simulate->parsed()) return cmd_simulate(sim);
  if (optimize->parsed()) return cmd_optimize(opt);
  if (diagnose->parsed()) return cmd_diagnose(diag);
  return 1;
}

}  // namespace
}  // namespace flowlab::tool

int main(int argc, char** argv) {
  try {
    return flowlab::tool::dispatch(argc, argv);
  } catch (const flowlab::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const flowlab::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
