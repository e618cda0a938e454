#include "ripple/sim.hpp"

#include <exception>

namespace ripple {

std::vector<RunResult> run_batch_serial(const std::vector<PreparedRun>& runs) {
  std::vector<RunResult> out;
  out.reserve(runs.size());
  for (const auto& pr : runs) {
    out.push_back(run(pr));
  }
  return out;
}

std::vector<RunResult> run_batch(const std::vector<PreparedRun>& runs) {
  std::vector<RunResult> out(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  const auto n = static_cast<long>(runs.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      out[i] = run(runs[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return out;
}

} // namespace ripple
