#include "scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "flowlab/errors.hpp"
#include "flowlab/format.hpp"
#include "flowlab/integrate.hpp"
#include "flowlab/rng.hpp"

namespace flowlab::tool {

namespace {

// ------------------------------------------------------------ small helpers

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

RealSymMatrix diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m.diagonal() << a, b;
  return RealSymMatrix(m);
}

std::string tag(double h) { return format_double(h); }

// Numeric table with optional cells, emitted as CSV or as an array of
// column->value objects depending on the run format.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;

  void row(std::vector<std::optional<double>> cells) { rows.push_back(std::move(cells)); }

  std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out += ',';
      out += columns[i];
    }
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out += ',';
        if (i < r.size() && r[i]) out += format_double(*r[i]);
      }
      out += '\n';
    }
    return out;
  }

  Json json() const {
    Json arr = Json::array();
    for (const auto& r : rows) {
      Json obj = Json::object();
      for (std::size_t i = 0; i < columns.size() && i < r.size(); ++i)
        if (r[i]) obj[columns[i]] = *r[i];
      arr.push_back(std::move(obj));
    }
    return arr;
  }
};

void emit_table(const RunContext& ctx, const std::string& stem, const Table& table) {
  if (ctx.format == "json") {
    emit_json(ctx, stem, table.json());
  } else {
    emit_text(ctx, stem + ".csv", table.csv());
  }
}

// Closed-form principal-flow trajectory on a quadratic, sampled per_step
// times per modeled GD step.
Trajectory closed_form_quad(const RealSymMatrix& M, const Vec& b, const ParameterState& theta0,
                            double h, int steps, int per_step) {
  const auto model = make_quadratic(M, b, 0.0);
  Trajectory traj;
  traj.spec = FlowSpec::pf(h);
  traj.model_name = model->name();
  traj.step = 0.0;  // closed form, no integrator substep
  traj.sample_every = per_step;
  for (int k = 0; k <= steps * per_step; ++k) {
    const double t = k * h / per_step;
    const ParameterState state = quadratic_pf_exact(M, b, theta0, h, t);
    TrajectoryRecord rec;
    rec.t = t;
    rec.theta = state.values();
    rec.loss = model->eval(state);
    rec.grad_norm = model->grad(state).norm();
    traj.records.push_back(std::move(rec));
  }
  return traj;
}

// Closed-form principal flow for the (possibly shifted) scalar square.
Trajectory closed_form_scalar(double h, Cx z0, double center, int steps, int per_step) {
  const auto model = make_scalar_square(center);
  Trajectory traj;
  traj.spec = FlowSpec::pf(h);
  traj.model_name = model->name();
  traj.step = 0.0;
  traj.sample_every = per_step;
  for (int k = 0; k <= steps * per_step; ++k) {
    const double t = k * h / per_step;
    const Cx z = center + scalar_pf_exact(h, z0 - center, t);
    CVec theta(1);
    theta << z;
    const ParameterState state{theta};
    TrajectoryRecord rec;
    rec.t = t;
    rec.theta = theta;
    rec.loss = model->eval(state);
    rec.grad_norm = model->grad(state).norm();
    traj.records.push_back(std::move(rec));
  }
  return traj;
}

double max_gd_vs_quad_exact(const OptRunLog& gd, const RealSymMatrix& M, const Vec& b,
                            const ParameterState& theta0, double h) {
  double worst = 0.0;
  for (const OptRecord& rec : gd.records) {
    const ParameterState exact = quadratic_pf_exact(M, b, theta0, h, rec.base.t);
    worst = std::max(worst, (rec.base.theta - exact.values()).norm());
  }
  return worst;
}

// Gradient-descent edge-of-stability series on the five-example network:
// per-iterate sharpness, top-direction contribution, and optional flow
// probes launched from each iterate.
struct EosRow {
  int step = 0;
  double t = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double lambda0 = 0.0;
  std::optional<Cx> sc0;
  std::optional<double> de_ngf, de_positive;
  Vec theta;
  CVec top_dir;
};

struct EosSeries {
  double h = 0.0;
  double threshold = 0.0;
  std::vector<EosRow> rows;
};

EosSeries run_eos_series(std::uint64_t seed, int iters, double h_override, bool with_probes) {
  MLPSpec spec;
  spec.seed = seed;
  const auto model = make_mlp(spec);
  const std::uint64_t lanczos_seed = derive_seed(seed, 101);

  Vec theta = mlp_initial_parameters(spec);
  EosSeries series;
  {
    const Spectrum s0 =
        hessian_spectrum_topk(*model, ParameterState::real(theta), 1, lanczos_seed);
    series.h = h_override > 0 ? h_override : 1.75 / s0.eigenvalues[0].real();
  }
  series.threshold = 2.0 / series.h;

  SimOptions probe;
  probe.step = series.h / 100.0;
  probe.sample_every = 100;

  for (int k = 0; k < iters; ++k) {
    const ParameterState p = ParameterState::real(theta);
    const Spectrum s = hessian_spectrum_topk(*model, p, 1, lanczos_seed);
    const CVec g = model->grad(p);

    EosRow row;
    row.step = k;
    row.t = k * series.h;
    row.loss = model->eval(p).real();
    row.grad_norm = g.norm();
    row.lambda0 = s.eigenvalues[0].real();
    row.theta = theta;
    row.top_dir = s.eigenvectors.col(0);
    try {
      row.sc0 = alpha(AlphaKind::PF, series.h * row.lambda0) *
                transposed_dot(g, s.eigenvectors.col(0));
    } catch (const Singular&) {
      // collapse direction, contribution undefined
    }
    if (with_probes) {
      const Trajectory ngf = euler_simulate(FlowSpec::ngf(series.h), *model, p, series.h, probe);
      const Trajectory pos =
          euler_simulate(FlowSpec::positive_gradient(series.h), *model, p, series.h, probe);
      row.de_ngf = ngf.records.back().loss.real() - row.loss;
      row.de_positive = pos.records.back().loss.real() - row.loss;
    }
    series.rows.push_back(std::move(row));
    theta = gd_step(*model, p, series.h).real_part();
  }
  return series;
}

int first_edge_step(const EosSeries& series) {
  for (const EosRow& row : series.rows)
    if (row.lambda0 >= series.threshold) return row.step;
  return -1;
}

// ---------------------------------------------------------------- scenarios

void scenario_quad2d(RunContext& ctx) {
  const std::vector<double> hs = ctx.overrides.numbers("h", {0.5, 0.9, 1.05});
  const int steps = ctx.overrides.integer("steps", 20);
  ctx.overrides.finish("quad2d");
  echo_config(ctx, "run quad2d", ctx.overrides.resolved());

  const RealSymMatrix M = diag2(2.0, 0.02);
  const auto quad = make_quadratic(M, Vec::Zero(2), 0.0);
  const ParameterState start = ParameterState::real(vec2(1, 1));

  std::vector<Json> pieces(hs.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    jobs.push_back([&, i, h = hs[i]] {
      GdOptions gd_opt;
      gd_opt.record_spectrum = true;
      gd_opt.measure_drift = true;
      const GdRun gd = gd_run(*quad, start, {{h, steps}}, gd_opt);
      emit_runlog(ctx, "gd_h" + tag(h), gd.log);

      emit_trajectory(ctx, "pf_exact_h" + tag(h), closed_form_quad(M, Vec::Zero(2), start, h, steps, 1));

      Json piece;
      piece["h"] = h;
      piece["max_gd_vs_closed_form"] = max_gd_vs_quad_exact(gd.log, M, Vec::Zero(2), start, h);
      try {
        Trajectory euler = euler_simulate(FlowSpec::pf(h), *quad, start, steps * h);
        euler.seed = ctx.seed;
        emit_trajectory(ctx, "pf_euler_h" + tag(h), euler);
        double worst = 0.0;
        for (const TrajectoryRecord& rec : euler.records) {
          const ParameterState exact = quadratic_pf_exact(M, Vec::Zero(2), start, h, rec.t);
          worst = std::max(worst, (rec.theta - exact.values()).norm());
        }
        piece["max_euler_vs_closed_form"] = worst;
      } catch (const Singular& e) {
        piece["euler"] = std::string("refused: ") + e.what();
      }
      pieces[i] = std::move(piece);
    });
  }
  run_parallel(std::move(jobs));

  Json summary = Json::array();
  for (Json& piece : pieces) summary.push_back(std::move(piece));
  emit_json(ctx, "summary", summary);
}

void scenario_scalar1d(RunContext& ctx) {
  const double h = ctx.overrides.number("h", 1.2);
  const double center = ctx.overrides.number("center", 0.6);
  const double theta0 = ctx.overrides.number("theta0", 0.0);
  const int steps = ctx.overrides.integer("steps", 20);
  ctx.overrides.finish("scalar1d");
  echo_config(ctx, "run scalar1d", ctx.overrides.resolved());

  const auto model = make_scalar_square(center);
  GdOptions gd_opt;
  gd_opt.record_spectrum = true;
  gd_opt.measure_drift = true;
  const GdRun gd = gd_run(*model, ParameterState::real(vec1(theta0)), {{h, steps}}, gd_opt);
  emit_runlog(ctx, "gd", gd.log);
  emit_trajectory(ctx, "pf_exact", closed_form_scalar(h, Cx(theta0, 0), center, steps, 4));

  double worst = 0.0;
  int sign_flips = 0;
  Json summary;
  double prev = gd.log.records.front().base.theta[0].real() - center;
  for (const OptRecord& rec : gd.log.records) {
    const Cx exact = center + scalar_pf_exact(h, Cx(theta0 - center, 0), rec.base.t);
    worst = std::max(worst, std::abs(rec.base.theta[0] - exact));
    const double offset = rec.base.theta[0].real() - center;
    if (offset * prev < 0) ++sign_flips;
    prev = offset;
  }
  summary["h"] = h;
  summary["max_gd_vs_closed_form"] = worst;
  summary["sign_flips_about_center"] = sign_flips;
  emit_json(ctx, "summary", summary);
}

void scenario_zsquare(RunContext& ctx) {
  const std::vector<double> hs = ctx.overrides.numbers("h", {0.8, 1.5, 2.1});
  const int steps = ctx.overrides.integer("steps", 20);
  const Cx z0(ctx.overrides.number("z0_re", 1.0), ctx.overrides.number("z0_im", 0.0));
  ctx.overrides.finish("zsquare");
  echo_config(ctx, "run zsquare", ctx.overrides.resolved());

  const auto model = make_scalar_square(0.0);
  std::vector<Json> pieces(hs.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    jobs.push_back([&, i, h = hs[i]] {
      OptRunLog gd;
      gd.method = "gd";
      gd.model_name = model->name();
      gd.seed = ctx.seed;
      Cx z = z0;
      bool alternates = true, increasing = true, decreasing = true;
      for (int k = 0; k <= steps; ++k) {
        CVec theta(1);
        theta << z;
        const ParameterState p{theta};
        OptRecord rec;
        rec.base.t = k * h;
        rec.base.theta = theta;
        rec.base.loss = model->eval(p);
        rec.base.grad_norm = model->grad(p).norm();
        rec.lr = h;
        gd.records.push_back(std::move(rec));
        const Cx next = z - h * model->grad(p)[0];
        if (k < steps) {
          if (std::abs(next) >= std::abs(z)) decreasing = false;
          if (std::abs(next) <= std::abs(z)) increasing = false;
          if (next.real() * z.real() > 0) alternates = false;
          z = next;
        }
      }
      emit_runlog(ctx, "gd_h" + tag(h), gd);
      emit_trajectory(ctx, "pf_exact_h" + tag(h), closed_form_scalar(h, z0, 0.0, steps, 4));

      double worst = 0.0;
      for (const OptRecord& rec : gd.records)
        worst = std::max(worst, std::abs(rec.base.theta[0] - scalar_pf_exact(h, z0, rec.base.t)));
      Json piece;
      piece["h"] = h;
      piece["max_gd_vs_closed_form"] = worst;
      piece["abs_strictly_increasing"] = increasing;
      piece["abs_strictly_decreasing"] = decreasing;
      piece["signs_alternate"] = alternates;
      pieces[i] = std::move(piece);
    });
  }
  run_parallel(std::move(jobs));

  Json summary = Json::array();
  for (Json& piece : pieces) summary.push_back(std::move(piece));
  emit_json(ctx, "summary", summary);
}

void scenario_banana(RunContext& ctx) {
  const std::vector<double> hs = ctx.overrides.numbers("h", {0.0006, 0.0017, 0.005});
  const int steps = ctx.overrides.integer("steps", 60);
  const Vec theta0 = vec2(ctx.overrides.number("x0", -1.0), ctx.overrides.number("y0", 1.0));
  ctx.overrides.finish("banana");
  echo_config(ctx, "run banana", ctx.overrides.resolved());

  const auto model = make_rosenbrock();
  const std::vector<std::pair<std::string, FlowKind>> flows = {
      {"ngf", FlowKind::NGF},
      {"igr", FlowKind::IGR},
      {"third_order", FlowKind::ThirdOrder},
      {"pf", FlowKind::PF},
      {"pf_nonprincipal", FlowKind::PFPlusNonPrincipal},
  };

  std::vector<Json> pieces(hs.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    jobs.push_back([&, i, h = hs[i]] {
      Table table;
      table.columns = {"step"};
      std::vector<std::vector<double>> errors;
      Json piece;
      piece["h"] = h;
      for (const auto& [name, kind] : flows) {
        table.columns.push_back(name);
        FlowSpec spec;
        spec.kind = kind;
        spec.h = h;
        try {
          errors.push_back(flow_vs_gd_error(spec, *model, ParameterState::real(theta0), h,
                                            steps, h / 50.0));
          piece[name] = {{"steps_tracked", errors.back().size()},
                        {"final_error", errors.back().empty() ? 0.0 : errors.back().back()}};
        } catch (const NumericalError& e) {
          errors.emplace_back();
          piece[name] = {{"refused", e.what()}};
        }
      }
      for (int k = 0; k < steps; ++k) {
        std::vector<std::optional<double>> row{static_cast<double>(k + 1)};
        for (const auto& err : errors)
          row.push_back(k < static_cast<int>(err.size()) ? std::optional<double>(err[k])
                                                         : std::nullopt);
        table.row(std::move(row));
      }
      emit_table(ctx, "errors_h" + tag(h), table);
      pieces[i] = std::move(piece);
    });
  }
  run_parallel(std::move(jobs));

  Json summary = Json::array();
  for (Json& piece : pieces) summary.push_back(std::move(piece));
  emit_json(ctx, "summary", summary);
}

void scenario_cosbranch(RunContext& ctx) {
  const std::vector<double> hs = ctx.overrides.numbers("h", {0.5, 0.85});
  const int steps = ctx.overrides.integer("steps", 40);
  const double theta0 = ctx.overrides.number("theta0", 1.0);
  const double step = ctx.overrides.number("step", 1e-4);
  ctx.overrides.finish("cosbranch");
  echo_config(ctx, "run cosbranch", ctx.overrides.resolved());

  const auto model = make_cos_branch();
  std::vector<Json> pieces(hs.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    jobs.push_back([&, i, h = hs[i]] {
      Json piece;
      piece["h"] = h;
      GdOptions gd_opt;
      gd_opt.record_spectrum = true;
      const GdRun gd =
          gd_run(*model, ParameterState::real(vec1(theta0)), {{h, steps}}, gd_opt);
      emit_runlog(ctx, "gd_h" + tag(h), gd.log);
      piece["gd_final_loss"] = gd.log.records.back().base.loss.real();

      int seam_crossings = 0;
      for (std::size_t k = 1; k < gd.log.records.size(); ++k) {
        if (gd.log.records[k].base.theta[0].real() *
                gd.log.records[k - 1].base.theta[0].real() <
            0)
          ++seam_crossings;
      }
      piece["gd_seam_crossings"] = seam_crossings;

      SimOptions opt;
      opt.step = step;
      for (const auto& [name, spec] : {std::pair{"ngf", FlowSpec::ngf(h)},
                                       std::pair{"pf", FlowSpec::pf(h)}}) {
        try {
          Trajectory traj =
              euler_simulate(spec, *model, ParameterState::real(vec1(theta0)), steps * h, opt);
          traj.seed = ctx.seed;
          emit_trajectory(ctx, std::string(name) + "_h" + tag(h), traj);
          piece[name] = {{"final_loss", traj.records.back().loss.real()},
                        {"diverged", traj.diverged}};
        } catch (const NumericalError& e) {
          piece[name] = {{"refused", e.what()}};
        }
      }
      pieces[i] = std::move(piece);
    });
  }
  run_parallel(std::move(jobs));

  Json summary = Json::array();
  for (Json& piece : pieces) summary.push_back(std::move(piece));
  emit_json(ctx, "summary", summary);
}

void scenario_mlp_error(RunContext& ctx) {
  const std::vector<std::uint64_t> seed_list = ctx.overrides.seeds("seed_list", {0, 1, 2});
  const std::vector<double> hs = ctx.overrides.numbers("h", {0.1, 0.2, 0.25});
  const int steps = ctx.overrides.integer("steps", 10);
  ctx.overrides.finish("mlp_error");
  echo_config(ctx, "run mlp_error", ctx.overrides.resolved());

  const std::vector<std::pair<std::string, FlowKind>> flows = {
      {"ngf", FlowKind::NGF},
      {"igr", FlowKind::IGR},
      {"third_order", FlowKind::ThirdOrder},
      {"pf", FlowKind::PF},
  };

  struct Config {
    std::uint64_t seed;
    double h;
  };
  std::vector<Config> configs;
  for (std::uint64_t s : seed_list)
    for (double h : hs) configs.push_back({s, h});

  std::vector<Json> pieces(configs.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    jobs.push_back([&, i, cfg = configs[i]] {
      MLPSpec spec;
      spec.seed = cfg.seed;
      const auto model = make_mlp(spec);
      const Vec theta0 = mlp_initial_parameters(spec);

      std::vector<Vec> gd_points;
      Vec theta = theta0;
      for (int k = 0; k <= steps; ++k) {
        gd_points.push_back(theta);
        theta -= cfg.h * model->grad(ParameterState::real(theta)).real();
      }

      SimOptions opt;
      opt.step = cfg.h / 400.0;
      opt.sample_every = 400;
      opt.spectrum_refresh = 10;

      Table table;
      table.columns = {"step"};
      std::vector<std::vector<double>> errors;
      Json piece;
      piece["seed"] = cfg.seed;
      piece["h"] = cfg.h;
      for (const auto& [name, kind] : flows) {
        table.columns.push_back(name);
        FlowSpec spec_f;
        spec_f.kind = kind;
        spec_f.h = cfg.h;
        std::vector<double> err;
        try {
          Trajectory traj =
              euler_simulate(spec_f, *model, ParameterState::real(theta0), steps * cfg.h, opt);
          const std::size_t n = std::min(traj.records.size(), gd_points.size());
          for (std::size_t k = 1; k < n; ++k)
            err.push_back((traj.records[k].theta - gd_points[k].cast<Cx>()).norm());
          piece[name] = err.empty() ? 0.0 : err.back();
        } catch (const NumericalError& e) {
          piece[name] = std::string("refused: ") + e.what();
        }
        errors.push_back(std::move(err));
      }
      for (int k = 0; k < steps; ++k) {
        std::vector<std::optional<double>> row{static_cast<double>(k + 1)};
        for (const auto& err : errors)
          row.push_back(k < static_cast<int>(err.size()) ? std::optional<double>(err[k])
                                                         : std::nullopt);
        table.row(std::move(row));
      }
      emit_table(ctx,
                 "errors_seed" + std::to_string(cfg.seed) + "_h" + tag(cfg.h), table);
      pieces[i] = std::move(piece);
    });
  }
  run_parallel(std::move(jobs));

  Json summary = Json::array();
  for (Json& piece : pieces) summary.push_back(std::move(piece));
  emit_json(ctx, "summary", summary);
}

void scenario_eos_mlp(RunContext& ctx) {
  const int iters = ctx.overrides.integer("steps", 150);
  const double h_override = ctx.overrides.number("h", 0.0);
  ctx.overrides.finish("eos_mlp");
  echo_config(ctx, "run eos_mlp", ctx.overrides.resolved());

  const EosSeries series = run_eos_series(ctx.seed, iters, h_override, /*with_probes=*/true);

  Table table;
  table.columns = {"step",      "t",      "loss",   "grad_norm",         "lambda0",
                   "sc0_re",    "sc0_im", "threshold", "de_ngf_probe",
                   "de_positive_gradient_probe"};
  for (const EosRow& row : series.rows) {
    table.row({static_cast<double>(row.step), row.t, row.loss, row.grad_norm, row.lambda0,
               row.sc0 ? std::optional<double>(row.sc0->real()) : std::nullopt,
               row.sc0 ? std::optional<double>(row.sc0->imag()) : std::nullopt,
               series.threshold, row.de_ngf, row.de_positive});
  }
  emit_table(ctx, "eos", table);

  int increases = 0, explained = 0;
  for (std::size_t k = 0; k + 1 < series.rows.size(); ++k) {
    if (series.rows[k + 1].loss > series.rows[k].loss) {
      ++increases;
      if (series.rows[k].lambda0 > series.threshold) ++explained;
    }
  }
  Json summary;
  summary["h"] = series.h;
  summary["threshold"] = series.threshold;
  summary["first_edge_step"] = first_edge_step(series);
  summary["loss_increases"] = increases;
  summary["fraction_preceded_by_sharp"] =
      increases > 0 ? static_cast<double>(explained) / increases : 0.0;
  emit_json(ctx, "summary", summary);
}

void scenario_flip_u0(RunContext& ctx) {
  const std::vector<std::uint64_t> seed_list = ctx.overrides.seeds("seed_list", {0, 1, 2});
  const int max_iters = ctx.overrides.integer("max_steps", 200);
  ctx.overrides.finish("flip_u0");
  echo_config(ctx, "run flip_u0", ctx.overrides.resolved());

  std::vector<Json> pieces(seed_list.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < seed_list.size(); ++i) {
    jobs.push_back([&, i, seed = seed_list[i]] {
      Json piece;
      piece["seed"] = seed;
      const EosSeries series = run_eos_series(seed, max_iters, 0.0, /*with_probes=*/false);
      const int edge = first_edge_step(series);
      piece["edge_step"] = edge;
      if (edge < 0) {
        piece["note"] = "edge of stability not reached within max_steps";
        pieces[i] = std::move(piece);
        return;
      }
      MLPSpec spec;
      spec.seed = seed;
      const auto model = make_mlp(spec);
      const ParameterState at = ParameterState::real(series.rows[edge].theta);
      const double before = series.rows[edge].loss;

      SimOptions opt;
      opt.step = series.h / 100.0;
      opt.sample_every = 10;
      for (const auto& [name, spec_f] :
           {std::pair{"flipped_top", FlowSpec::flipped_top(series.h)},
            std::pair{"ngf", FlowSpec::ngf(series.h)}}) {
        Trajectory traj = euler_simulate(spec_f, *model, at, series.h, opt);
        traj.seed = seed;
        emit_trajectory(ctx, std::string(name) + "_seed" + std::to_string(seed), traj);
        piece[std::string("de_") + name] = traj.records.back().loss.real() - before;
      }
      pieces[i] = std::move(piece);
    });
  }
  run_parallel(std::move(jobs));

  Json summary = Json::array();
  for (Json& piece : pieces) summary.push_back(std::move(piece));
  emit_json(ctx, "summary", summary);
}

void scenario_lr_drop(RunContext& ctx) {
  const int ride_steps = ctx.overrides.integer("steps_between", 10);
  const double factor = ctx.overrides.number("factor", 0.5);
  const int after_steps = ctx.overrides.integer("steps_after", 60);
  const int max_iters = ctx.overrides.integer("max_steps", 200);
  ctx.overrides.finish("lr_drop");
  echo_config(ctx, "run lr_drop", ctx.overrides.resolved());

  MLPSpec spec;
  spec.seed = ctx.seed;
  const auto model = make_mlp(spec);
  const std::uint64_t lanczos_seed = derive_seed(ctx.seed, 101);
  Vec theta = mlp_initial_parameters(spec);

  const double h1 =
      1.75 / hessian_spectrum_topk(*model, ParameterState::real(theta), 1, lanczos_seed)
                 .eigenvalues[0]
                 .real();
  double h = h1;
  int drop_step = -1, edge_step = -1;
  double t = 0.0;

  Table table;
  table.columns = {"step", "t", "h", "threshold", "loss", "grad_norm", "lambda0"};
  std::vector<double> losses, lambdas;
  std::vector<double> h_at;

  for (int k = 0; k < max_iters; ++k) {
    const ParameterState p = ParameterState::real(theta);
    const Spectrum s = hessian_spectrum_topk(*model, p, 1, lanczos_seed);
    const double lambda0 = s.eigenvalues[0].real();
    const double loss = model->eval(p).real();
    if (edge_step < 0 && lambda0 >= 2.0 / h) edge_step = k;
    if (edge_step >= 0 && drop_step < 0 && k >= edge_step + ride_steps) {
      h *= factor;
      drop_step = k;
    }
    table.row({static_cast<double>(k), t, h, 2.0 / h, loss,
               model->grad(p).norm(), lambda0});
    losses.push_back(loss);
    lambdas.push_back(lambda0);
    h_at.push_back(h);
    if (drop_step >= 0 && k >= drop_step + after_steps) break;
    theta = gd_step(*model, p, h).real_part();
    t += h;
  }
  emit_table(ctx, "run", table);

  Json summary;
  summary["h_initial"] = h1;
  summary["h_after_drop"] = h1 * factor;
  summary["edge_step"] = edge_step;
  summary["drop_step"] = drop_step;
  if (drop_step >= 0) {
    int before = 0, after = 0;
    for (std::size_t k = 0; k + 1 < losses.size(); ++k) {
      if (losses[k + 1] > losses[k]) (static_cast<int>(k) >= drop_step ? after : before)++;
    }
    summary["loss_increases_before_drop"] = before;
    summary["loss_increases_after_drop"] = after;
    summary["lambda0_final"] = lambdas.back();
    summary["threshold_final"] = 2.0 / h_at.back();
    summary["settled_below_new_threshold"] = lambdas.back() < 2.0 / h_at.back();
  }
  emit_json(ctx, "summary", summary);
}

void scenario_dotprod_pred(RunContext& ctx) {
  const double h_quad = ctx.overrides.number("h_quad", 0.9);
  const int quad_steps = ctx.overrides.integer("quad_steps", 20);
  const int mlp_steps = ctx.overrides.integer("mlp_steps", 120);
  ctx.overrides.finish("dotprod_pred");
  echo_config(ctx, "run dotprod_pred", ctx.overrides.resolved());

  // Quadratic leg: frozen top eigenpair is exact for every step.
  {
    const RealSymMatrix M = diag2(2.0, 0.02);
    const auto quad = make_quadratic(M, Vec::Zero(2), 0.0);
    const double lambda = 2.0;
    Vec theta = vec2(1, 1);
    double x = quad->grad(ParameterState::real(theta)).real()[0];
    Table table;
    table.columns = {"step", "x", "x_next_measured", "pred_pf", "pred_ngf", "pred_igr"};
    double worst = 0.0;
    for (int k = 0; k < quad_steps; ++k) {
      const double pf = predict_dot_product(x, lambda, h_quad, AlphaKind::PF);
      const double ngf = predict_dot_product(x, lambda, h_quad, AlphaKind::NGF);
      const double igr = predict_dot_product(x, lambda, h_quad, AlphaKind::IGR);
      theta -= h_quad * quad->grad(ParameterState::real(theta)).real();
      const double measured = quad->grad(ParameterState::real(theta)).real()[0];
      table.row({static_cast<double>(k), x, measured, pf, ngf, igr});
      worst = std::max(worst, std::abs(measured - pf));
      x = measured;
    }
    emit_table(ctx, "quad", table);
    Json note;
    note["max_abs_error_pf"] = worst;
    emit_json(ctx, "quad_summary", note);
  }

  // Network leg: freeze the eigenpair at each iterate, compare one step out.
  {
    const EosSeries series = run_eos_series(ctx.seed, mlp_steps, 0.0, /*with_probes=*/false);
    MLPSpec spec;
    spec.seed = ctx.seed;
    const auto model = make_mlp(spec);
    Table table;
    table.columns = {"step",    "lambda0", "x",       "x_next_measured",
                     "pred_pf", "pred_ngf", "pred_igr"};
    int agree = 0, total = 0;
    for (std::size_t k = 0; k + 1 < series.rows.size(); ++k) {
      const CVec& u = series.rows[k].top_dir;
      const double x =
          transposed_dot(model->grad(ParameterState::real(series.rows[k].theta)), u).real();
      const double x_next =
          transposed_dot(model->grad(ParameterState::real(series.rows[k + 1].theta)), u)
              .real();
      const double lambda = series.rows[k].lambda0;
      table.row({static_cast<double>(k), lambda, x, x_next,
                 predict_dot_product(x, lambda, series.h, AlphaKind::PF),
                 predict_dot_product(x, lambda, series.h, AlphaKind::NGF),
                 predict_dot_product(x, lambda, series.h, AlphaKind::IGR)});
      if (std::abs(x) > 1e-14) {
        const bool grew = std::abs(x_next) > std::abs(x);
        const bool predicted = lambda > series.threshold;
        agree += grew == predicted;
        ++total;
      }
    }
    emit_table(ctx, "mlp", table);
    Json note;
    note["h"] = series.h;
    note["growth_agreement_fraction"] =
        total > 0 ? static_cast<double>(agree) / total : 0.0;
    note["iterates_scored"] = total;
    emit_json(ctx, "mlp_summary", note);
  }
}

void scenario_drift_corr(RunContext& ctx) {
  const int n_h = ctx.overrides.integer("n_h", 8);
  const int n_theta = ctx.overrides.integer("n_theta", 8);
  const double h_ref = ctx.overrides.number("h_ref", 1e-3);
  ctx.overrides.finish("drift_corr");
  echo_config(ctx, "run drift_corr", ctx.overrides.resolved());

  const auto model = make_rosenbrock();
  Table table;
  table.columns = {"h_grid", "h", "theta0", "theta1", "measured", "estimated"};

  std::vector<double> mh, eh;
  for (int i = 0; i < n_h; ++i) {
    const double h = 3e-4 * std::pow(100.0, n_h == 1 ? 0.0 : i / double(n_h - 1));
    const ParameterState p = ParameterState::real(vec2(0, 0));
    const double measured = per_iteration_drift(*model, p, h, h / 1000.0);
    const double estimated = drift_estimate(*model, p, h);
    table.row({1.0, h, 0.0, 0.0, measured, estimated});
    mh.push_back(measured);
    eh.push_back(estimated);
  }

  std::vector<double> mt, et;
  Rng rng(derive_seed(ctx.seed, 55));
  for (int i = 0; i < n_theta; ++i) {
    const Vec theta = vec2(0.5 * rng.gaussian(), 0.5 * rng.gaussian());
    const ParameterState p = ParameterState::real(theta);
    const double measured = per_iteration_drift(*model, p, h_ref, h_ref / 1000.0);
    const double estimated = drift_estimate(*model, p, h_ref);
    table.row({0.0, h_ref, theta[0], theta[1], measured, estimated});
    mt.push_back(measured);
    et.push_back(estimated);
  }
  emit_table(ctx, "drift", table);

  Json summary;
  summary["spearman_h_grid"] = spearman(mh, eh);
  summary["spearman_theta_grid"] = spearman(mt, et);
  const ParameterState origin = ParameterState::real(vec2(0, 0));
  summary["ratio_at_h_ref"] = per_iteration_drift(*model, origin, h_ref, h_ref / 1000.0) /
                              drift_estimate(*model, origin, h_ref);
  emit_json(ctx, "summary", summary);
}

void scenario_dal_sweep(RunContext& ctx) {
  const std::vector<double> ps = ctx.overrides.numbers("p", {0.5, 1.0, 1.5, 2.0});
  const std::vector<double> sigmas = ctx.overrides.numbers("sigma", {1.0, 100.0, 10000.0});
  const int steps = ctx.overrides.integer("steps", 80);
  const double cap = ctx.overrides.number("cap", 5.0);
  ctx.overrides.finish("dal_sweep");
  echo_config(ctx, "run dal_sweep", ctx.overrides.resolved());

  struct Target {
    std::string name;
    LossModelPtr model;
    ParameterState theta0;
    double lambda0;
  };
  std::vector<Target> targets;
  for (double sigma : sigmas) {
    targets.push_back({"quad_sigma" + tag(sigma),
                       make_quadratic(diag2(sigma, 1.0), Vec::Zero(2), 0.0),
                       ParameterState::real(vec2(1, 1)), sigma});
  }
  {
    MLPSpec spec;
    spec.seed = ctx.seed;
    auto mlp = make_mlp(spec);
    const ParameterState init = ParameterState::real(mlp_initial_parameters(spec));
    const double lambda0 =
        hessian_spectrum_topk(*mlp, init, 1, derive_seed(ctx.seed, 101)).eigenvalues[0].real();
    targets.push_back({"mlp", std::move(mlp), init, lambda0});
  }

  struct Job {
    const Target* target;
    std::string method;
    double p = 0.0;     // dal only
    double h = 0.0;     // fixed-step only
  };
  std::vector<Job> plan;
  for (const Target& target : targets) {
    for (double p : ps) plan.push_back({&target, "dal", p, 0.0});
    plan.push_back({&target, "gd_fixed", 0.0, 2.5 / target.lambda0});
  }

  std::vector<Json> pieces(plan.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    jobs.push_back([&, i, job = plan[i]] {
      const LossModel& model = *job.target->model;
      Json piece;
      piece["target"] = job.target->name;
      std::string stem;
      OptRunLog log;
      log.model_name = model.name();
      log.seed = ctx.seed;
      bool diverged = false;
      bool monotone = true;
      double worst_increase = 0.0;

      if (job.method == "dal") {
        stem = "dal_p" + tag(job.p) + "_" + job.target->name;
        log.method = "dal(p=" + tag(job.p) + ")";
        piece["method"] = log.method;
        DalConfig cfg;
        cfg.p = job.p;
        cfg.lr_cap = cap;
        ParameterState theta = job.target->theta0;
        double prev = model.eval(theta).real();
        for (int k = 0; k < steps; ++k) {
          OptRecord rec;
          rec.base.t = k;
          rec.base.theta = theta.values();
          rec.base.loss = model.eval(theta);
          rec.base.grad_norm = model.grad(theta).norm();
          DalStep step;
          try {
            step = dal_step(model, theta, cfg);
          } catch (const ZeroGradient&) {
            log.records.push_back(std::move(rec));
            break;
          }
          rec.lr = step.lr;
          rec.drift_estimated = drift_estimate(model, theta, step.lr);
          log.records.push_back(std::move(rec));
          theta = step.theta;
          const double now = model.eval(theta).real();
          if (!std::isfinite(now) || theta.norm() > 1e12) {
            diverged = true;
            break;
          }
          if (k >= 5 && now > prev + 1e-12 * std::max(1.0, std::abs(prev))) {
            monotone = false;
            worst_increase = std::max(worst_increase, now - prev);
          }
          prev = now;
        }
      } else {
        stem = "gd_fixed_" + job.target->name;
        log.method = "gd";
        piece["method"] = "gd(h=" + tag(job.h) + ")";
        GdOptions opt;
        const GdRun run = gd_run(model, job.target->theta0, {{job.h, steps}}, opt);
        log = run.log;
        log.seed = ctx.seed;
        diverged = run.diverged;
        double prev = log.records.front().base.loss.real();
        for (std::size_t k = 1; k < log.records.size(); ++k) {
          const double now = log.records[k].base.loss.real();
          if (k >= 5 && now > prev + 1e-12 * std::max(1.0, std::abs(prev))) monotone = false;
          prev = now;
        }
      }
      emit_runlog(ctx, stem, log);
      piece["final_loss"] = log.records.back().base.loss.real();
      piece["diverged"] = diverged;
      piece["monotone_after_step_5"] = monotone && !diverged;
      pieces[i] = std::move(piece);
    });
  }
  run_parallel(std::move(jobs));

  Json summary = Json::array();
  for (Json& piece : pieces) summary.push_back(std::move(piece));
  emit_json(ctx, "summary", summary);
}

void scenario_escape_sharp(RunContext& ctx) {
  const double sigma = ctx.overrides.number("sigma", 100.0);
  const double grad_tol = ctx.overrides.number("grad_tol", 1e-3);
  const double raise = ctx.overrides.number("h2_lambda", 2.5);  // h2 = raise / lambda0
  const int after = ctx.overrides.integer("steps_after", 60);
  const int max_converge = ctx.overrides.integer("max_steps", 4000);
  ctx.overrides.finish("escape_sharp");
  echo_config(ctx, "run escape_sharp", ctx.overrides.resolved());

  Json summary;

  // Quadratic leg: curvature cannot change, so raising h above 2/lambda0
  // diverges instead of escaping.
  {
    const auto quad = make_quadratic(diag2(sigma, 1.0), Vec::Zero(2), 0.0);
    const double h1 = 0.9 / sigma;
    Vec theta = vec2(1, 1);
    int k1 = 0;
    while (k1 < max_converge &&
           quad->grad(ParameterState::real(theta)).norm() >= grad_tol) {
      theta -= h1 * quad->grad(ParameterState::real(theta)).real();
      ++k1;
    }
    const double h2 = raise / sigma;
    GdOptions opt;
    opt.record_spectrum = true;
    opt.record_every = std::max(1, k1 / 50);
    const GdRun run = gd_run(*quad, ParameterState::real(vec2(1, 1)),
                             {{h1, k1}, {h2, after}}, opt);
    emit_runlog(ctx, "quad", run.log);
    Json leg;
    leg["steps_to_converge"] = k1;
    leg["h1"] = h1;
    leg["h2"] = h2;
    leg["diverged_after_raise"] = run.diverged;
    summary["quad"] = std::move(leg);
  }

  // Network leg: the walk along the flat directions changes the curvature,
  // so the iterate can escape into a flatter basin instead.
  {
    MLPSpec spec;
    spec.seed = ctx.seed;
    const auto model = make_mlp(spec);
    const std::uint64_t lanczos_seed = derive_seed(ctx.seed, 101);
    Vec theta = mlp_initial_parameters(spec);
    auto top = [&](const Vec& at) {
      return hessian_spectrum_topk(*model, ParameterState::real(at), 1, lanczos_seed)
          .eigenvalues[0]
          .real();
    };
    const double h1 = 0.25 / top(theta);
    int k1 = 0;
    double gnorm = model->grad(ParameterState::real(theta)).norm();
    while (k1 < max_converge && gnorm >= grad_tol) {
      theta -= h1 * model->grad(ParameterState::real(theta)).real();
      gnorm = model->grad(ParameterState::real(theta)).norm();
      ++k1;
    }
    const double lambda_sharp = top(theta);
    const double h2 = raise / lambda_sharp;

    Table table;
    table.columns = {"step", "h", "loss", "grad_norm", "lambda0", "threshold"};
    double max_loss = 0.0;
    for (int k = 0; k <= after; ++k) {
      const ParameterState p = ParameterState::real(theta);
      const double loss = model->eval(p).real();
      max_loss = std::max(max_loss, loss);
      table.row({static_cast<double>(k), h2, loss,
                 model->grad(p).norm(), top(theta), 2.0 / h2});
      if (k < after) theta = gd_step(*model, p, h2).real_part();
    }
    emit_table(ctx, "mlp", table);

    Json leg;
    leg["steps_to_converge"] = k1;
    leg["grad_norm_reached"] = gnorm;
    leg["converged"] = gnorm < grad_tol;
    leg["h1"] = h1;
    leg["h2"] = h2;
    leg["lambda0_at_raise"] = lambda_sharp;
    leg["lambda0_final"] = top(theta);
    leg["threshold_after_raise"] = 2.0 / h2;
    leg["escaped_below_threshold"] = top(theta) < 2.0 / h2;
    leg["max_loss_during_escape"] = max_loss;
    summary["mlp"] = std::move(leg);
  }

  emit_json(ctx, "summary", summary);
}

}  // namespace

const std::vector<Scenario>& scenario_catalog() {
  static const std::vector<Scenario> catalog = {
      {"quad2d",
       "gradient descent on a stiff 2-D quadratic against the closed-form principal flow, "
       "with Euler cross-checks across stable, oscillatory, and collapse step sizes",
       scenario_quad2d},
      {"scalar1d",
       "1-D quadratic at h = 1.2: iterates oscillate about the minimum while hugging the "
       "closed-form principal-flow envelope",
       scenario_scalar1d},
      {"zsquare",
       "complex scalar square across the three step-size regimes: monotone contraction, "
       "alternating contraction, alternating divergence",
       scenario_zsquare},
      {"banana",
       "how far each backward-error flow tracks gradient descent on the banana valley as "
       "the step size grows",
       scenario_banana},
      {"cosbranch",
       "piecewise cosine branch loss: flows across a curvature jump, including step sizes "
       "where the principal field hits its singular coefficient",
       scenario_cosbranch},
      {"mlp_error",
       "flow-vs-GD tracking error on the five-example network for each modified flow, "
       "across seeds and step sizes",
       scenario_mlp_error},
      {"eos_mlp",
       "gradient descent driven to the edge of stability on the five-example network: "
       "per-iterate sharpness, top-direction contributions, and ascent/descent probes",
       scenario_eos_mlp},
      {"flip_u0",
       "flip the top eigendirection of the gradient at an edge-of-stability iterate: one "
       "unstable direction against the plain gradient flow",
       scenario_flip_u0},
      {"lr_drop",
       "halve the step size after reaching the edge of stability and watch sharpness "
       "settle against the new threshold",
       scenario_lr_drop},
      {"dotprod_pred",
       "frozen-eigenpair one-step predictions of top-direction gradient components, exact "
       "on quadratics and scored on the network at the edge",
       scenario_dotprod_pred},
      {"drift_corr",
       "measured per-iteration drift against the (h^2/2)||Hg|| estimate, with rank "
       "correlations across a step-size grid and a parameter grid",
       scenario_drift_corr},
      {"dal_sweep",
       "drift-adjusted learning rates across exponents against fixed-step baselines on "
       "stiff quadratics and the five-example network",
       scenario_dal_sweep},
      {"escape_sharp",
       "converge in a sharp basin at a small step, then raise the step above the "
       "stability threshold: quadratics diverge, the network escapes to a flatter basin",
       scenario_escape_sharp},
  };
  return catalog;
}

const Scenario* find_scenario(const std::string& name) {
  for (const Scenario& s : scenario_catalog())
    if (s.name == name) return &s;
  return nullptr;
}

std::string catalog_listing() {
  std::ostringstream out;
  out << scenario_catalog().size() << " scenarios:\n";
  for (const Scenario& s : scenario_catalog()) out << "  " << s.name << "  " << s.summary << "\n";
  return out.str();
}

}  // namespace flowlab::tool
