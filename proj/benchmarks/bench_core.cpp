#include <benchmark/benchmark.h>

#include <cstdint>

#include "flowlab/flows.hpp"
#include "flowlab/integrate.hpp"
#include "flowlab/losses.hpp"
#include "flowlab/numlin.hpp"
#include "flowlab/optimize.hpp"
#include "flowlab/rng.hpp"

namespace {

using namespace flowlab;

RealSymMatrix random_sym(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Mat m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = rng.gaussian();
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return RealSymMatrix(m);
}

struct MlpFixture {
  MLPSpec spec;
  LossModelPtr model = make_mlp(spec);
  ParameterState theta = ParameterState::real(mlp_initial_parameters(spec));
};

const MlpFixture& mlp() {
  static const MlpFixture f;
  return f;
}

}  // namespace

static void SymEigh(benchmark::State& state) {
  const RealSymMatrix m = random_sym(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sym_eigh(m));
  }
}
BENCHMARK(SymEigh)->Arg(2)->Arg(8)->Arg(41);

static void MlpGrad(benchmark::State& state) {
  const auto& f = mlp();
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.model->grad(f.theta));
  }
}
BENCHMARK(MlpGrad);

static void MlpHvp(benchmark::State& state) {
  const auto& f = mlp();
  const CVec g = f.model->grad(f.theta);
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.model->hvp(f.theta, g));
  }
}
BENCHMARK(MlpHvp);

static void MlpDenseSpectrum(benchmark::State& state) {
  const auto& f = mlp();
  for (auto _ : state) {
    benchmark::DoNotOptimize(hessian_spectrum(*f.model, f.theta));
  }
}
BENCHMARK(MlpDenseSpectrum);

static void MlpLanczosTop1(benchmark::State& state) {
  const auto& f = mlp();
  for (auto _ : state) {
    benchmark::DoNotOptimize(hessian_spectrum_topk(*f.model, f.theta, 1, 11));
  }
}
BENCHMARK(MlpLanczosTop1);

static void PfFieldQuad(benchmark::State& state) {
  Mat m(2, 2);
  m << 2, 0, 0, 0.02;
  const auto quad = make_quadratic(RealSymMatrix(m), Vec::Zero(2), 0.0);
  const ParameterState theta = ParameterState::real(Vec::Ones(2));
  const FlowSpec spec = FlowSpec::pf(0.9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(field(spec, *quad, theta));
  }
}
BENCHMARK(PfFieldQuad);

static void PfFieldMlp(benchmark::State& state) {
  const auto& f = mlp();
  const FlowSpec spec = FlowSpec::pf(0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(field(spec, *f.model, f.theta));
  }
}
BENCHMARK(PfFieldMlp);

static void PfFieldMlpCachedSpectrum(benchmark::State& state) {
  const auto& f = mlp();
  const FlowSpec spec = FlowSpec::pf(0.1);
  const Spectrum spectrum = hessian_spectrum(*f.model, f.theta);
  for (auto _ : state) {
    benchmark::DoNotOptimize(field(spec, *f.model, f.theta, spectrum));
  }
}
BENCHMARK(PfFieldMlpCachedSpectrum);

// One modeled GD step of the plain gradient flow at increasing substep
// counts; isolates integrator overhead from field cost.
static void EulerModeledStep(benchmark::State& state) {
  const auto& f = mlp();
  const double h = 0.1;
  SimOptions opt;
  opt.step = h / static_cast<double>(state.range(0));
  opt.sample_every = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(euler_simulate(FlowSpec::ngf(h), *f.model, f.theta, h, opt));
  }
}
BENCHMARK(EulerModeledStep)->Arg(100)->Arg(400)->Arg(1600);

static void GdStep(benchmark::State& state) {
  const auto& f = mlp();
  for (auto _ : state) {
    benchmark::DoNotOptimize(gd_step(*f.model, f.theta, 0.1));
  }
}
BENCHMARK(GdStep);

static void DalGlobalStep(benchmark::State& state) {
  const auto& f = mlp();
  DalConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dal_step(*f.model, f.theta, cfg));
  }
}
BENCHMARK(DalGlobalStep);

static void DalPerParamStep(benchmark::State& state) {
  const auto& f = mlp();
  for (auto _ : state) {
    benchmark::DoNotOptimize(per_param_dal_step(*f.model, f.theta, 1.0, 5.0));
  }
}
BENCHMARK(DalPerParamStep);

BENCHMARK_MAIN();
