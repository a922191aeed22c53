#pragma once

namespace dialogrank::tools {

// Runs gradient checks and oracle suites, printing one PASS/FAIL line per
// check. Returns the number of failures. `inject_gradient_fault` corrupts
// the analytic gradients before checking, to prove the harness catches a
// broken backward pass.
int run_selftest(bool inject_gradient_fault);

}  // namespace dialogrank::tools
