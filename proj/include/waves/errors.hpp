#pragma once

#include <stdexcept>
#include <string>

namespace waves {

/// Process exit codes used by the CLI. Library errors carry one of these so
/// the tool can map failures to the documented contract without string
/// matching.
enum class ExitCode : int {
    Ok = 0,
    Verification = 1,
    Regime = 2,
    Parse = 3,
    Solver = 4,
};

class Error : public std::runtime_error {
  public:
    Error(ExitCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ExitCode exit_code() const { return code_; }

  private:
    ExitCode code_;
};

/// The requested Bernoulli constant admits no genuine wave (r outside the
/// bifurcation window, supercritical stream, and similar rejections).
struct RegimeError : Error {
    explicit RegimeError(const std::string& what) : Error(ExitCode::Regime, what) {}
};

/// Malformed input: config files, stored fields, branch logs, CLI usage.
struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(ExitCode::Parse, what) {}
};

/// Numerical failure: non-convergent quadrature, Newton breakdown,
/// stagnation breach, missing bifurcation point.
struct SolverError : Error {
    explicit SolverError(const std::string& what) : Error(ExitCode::Solver, what) {}
};

/// Discrete h_p reached zero or below at some grid cell. A SolverError
/// subtype so the exit-code mapping is unchanged; Newton damping catches it
/// to tell stagnation breaches apart from other numerical trouble.
struct StagnationError : SolverError {
    explicit StagnationError(const std::string& what) : SolverError(what) {}
};

/// A stored wave failed its certificates.
struct VerificationError : Error {
    explicit VerificationError(const std::string& what)
        : Error(ExitCode::Verification, what) {}
};

} // namespace waves
