#include <benchmark/benchmark.h>

#include "ccl/constraints.hpp"
#include "ccl/kinematics.hpp"
#include "ccl/learning.hpp"
#include "ccl/retarget.hpp"
#include "ccl/simulator.hpp"

namespace {

using namespace ccl;

void BM_PseudoInverse(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  Matrix a = Matrix::Random(n / 2 + 1, n);
  for (auto _ : state) benchmark::DoNotOptimize(pseudo_inverse(a));
}
BENCHMARK(BM_PseudoInverse)->Arg(3)->Arg(7)->Arg(20);

void BM_Projector(benchmark::State& state) {
  Matrix a = Matrix::Random(2, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Projector(a).nullspace());
}
BENCHMARK(BM_Projector);

void BM_ToyObjective(benchmark::State& state) {
  Dataset ds = generate_toy_dataset(static_cast<std::size_t>(state.range(0)), 1);
  auto obs = ds.observations();
  ConsistencyObjective f(obs, SphericalRepresentation{2}, 1);
  Vector p = Vector::Constant(1, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(f(p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ToyObjective)->Arg(150)->Arg(1000);

void BM_ThreeLinkObjective(benchmark::State& state) {
  auto setup = ArmDemoSetup::three_link_default();
  Dataset ds = generate_arm_dataset(setup, axis_selection(parse_axes("x,y")), 50, 1);
  auto obs = ds.observations();
  ConsistencyObjective f(obs, SelectionRepresentation{jacobian_features(setup.arm)}, 2);
  Vector p = Vector::Constant(f.parameter_count(), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(f(p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(obs.size()));
}
BENCHMARK(BM_ThreeLinkObjective);

void BM_LearnToy(benchmark::State& state) {
  Dataset ds = generate_toy_dataset(150, 2, default_linear_policy());
  auto obs = ds.observations();
  OptimizerConfig opt;
  opt.seed = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(learn_constraint(obs, 1, SphericalRepresentation{2}, opt));
  }
}
BENCHMARK(BM_LearnToy)->Unit(benchmark::kMillisecond);

void BM_ManipulabilityGradient(benchmark::State& state) {
  PlanarArm arm({10, 5, 5, 5, 5, 5, 10});
  ConstraintModel m = SelectionConstraint(Matrix::Identity(3, 3), jacobian_features(arm));
  Vector x = Vector::LinSpaced(7, 0.1, 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(manipulability_gradient(m, x));
}
BENCHMARK(BM_ManipulabilityGradient);

void BM_RetargetRollout(benchmark::State& state) {
  PlanarArm arm({10, 10, 10});
  ConstraintModel m = SelectionConstraint(axis_selection(parse_axes("x,y")), jacobian_features(arm));
  Vector target = Vector::Constant(3, 0.2);
  RetargetPlan plan{m, AttractorTask{arm, Eigen::Vector3d(-5, 15, 0), 1.0},
                    PointAttractor{1.0, target}, std::nullopt};
  Vector x0(3);
  x0 << 0.1, 1.6, 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(reproduce_trajectory(plan, x0, 0.02, 10.0));
}
BENCHMARK(BM_RetargetRollout)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
