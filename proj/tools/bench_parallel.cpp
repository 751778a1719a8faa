// Times the experiment batch runner on the serial reference path (jobs = 1)
// against the OpenMP path (all threads) and checks the reductions agree bitwise.

#include <chrono>
#include <cstring>
#include <iostream>

#include "stackgda/harness.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace stackgda;

namespace {

harness::ExperimentConfig bench_config(bool quick) {
  harness::ExperimentConfig config;
  config.classes = {fisher::UtilityClass::Linear, fisher::UtilityClass::CobbDouglas};
  config.num_markets = quick ? 4 : 16;
  config.params[fisher::UtilityClass::Linear].horizon = quick ? 200 : 1000;
  config.params[fisher::UtilityClass::CobbDouglas].horizon = quick ? 200 : 500;
  config.oracle_iterations = quick ? 20000 : 100000;
  config.master_seed = 7;
  return config;
}

double run_timed(harness::ExperimentConfig config, int jobs, harness::RunReport& out) {
  config.parallelism = jobs;
  const auto t0 = std::chrono::steady_clock::now();
  out = harness::run_experiment(config);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  const harness::ExperimentConfig config = bench_config(quick);

#ifdef _OPENMP
  std::cout << "OpenMP enabled, max threads " << omp_get_max_threads() << "\n";
#else
  std::cout << "OpenMP not enabled; both runs are serial\n";
#endif

  harness::RunReport serial, parallel;
  const double t_serial = run_timed(config, 1, serial);
  const double t_parallel = run_timed(config, 0, parallel);

  bool identical = serial.series.size() == parallel.series.size();
  for (std::size_t s = 0; identical && s < serial.series.size(); ++s) {
    identical = serial.series[s].mean_exploitability == parallel.series[s].mean_exploitability;
  }

  std::cout << "markets per class: " << config.num_markets << "\n";
  std::cout << "serial reference : " << t_serial << " s\n";
  std::cout << "openmp           : " << t_parallel << " s\n";
  std::cout << "speedup          : " << t_serial / t_parallel << "x\n";
  std::cout << "bitwise identical: " << (identical ? "yes" : "NO") << "\n";
  return identical ? 0 : 1;
}
