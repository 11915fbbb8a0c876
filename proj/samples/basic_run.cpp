// Minimal library usage: synthesize a logistic problem, solve it, print the trace.

#include "sqnkit/sqnkit.hpp"

#include <iostream>

int main() {
  using namespace sqnkit;
  SynthSpec spec;
  spec.n = 500;
  spec.d = 20;
  spec.task = Task::classification;
  spec.seed = 1;
  const ErmProblem problem(synthesize(spec), Loss::logistic, 1.0 / 500);

  const auto ref = reference_optimum(problem, 1e-10);

  SolverConfig cfg = SolverConfig::defaults_for(problem.n());
  cfg.eta = 0.1;
  cfg.max_epochs = 15;
  const auto result = run(problem, cfg, ref.f_star);

  write_trace_csv(std::cout, result.trace);
  const auto theory = theory_report(problem, cfg);
  std::cout << "# gamma=" << theory.gamma << " Gamma=" << theory.Gamma
            << " rho=" << theory.rho.value << " (" << to_string(theory.rho.status) << ")\n";
}
