#pragma once

#include <stdexcept>
#include <string>

namespace shuntflow {

/// Error categories surfaced by the library. The CLI maps these to exit codes.
enum class Errc {
    // network construction
    disconnected_graph,
    zero_series_admittance,
    duplicate_bus_id,
    dangling_endpoint,
    invalid_bus,
    // case files
    parse_error,
    schema_violation,
    io_error,
    // power flow
    non_convergence,
    singular_jacobian,
    // branch flow / equivalence
    degenerate_angle,
    antisymmetry_violation,
    cycle_mismatch,
    precondition_violated,
    not_zero_shunt,
    input_not_in_xtilde,
    magnitude_mismatch,
    // relaxation
    not_radial,
    cost_violates_a2,
    infeasible,
    numerical_failure,
    iteration_limit,
    // tightening step
    gap_not_positive,
    zero_current,
    c2_violated_on_line,
    negative_impedance,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::disconnected_graph: return "DisconnectedGraph";
        case Errc::zero_series_admittance: return "ZeroSeriesAdmittance";
        case Errc::duplicate_bus_id: return "DuplicateBusId";
        case Errc::dangling_endpoint: return "DanglingEndpoint";
        case Errc::invalid_bus: return "InvalidBus";
        case Errc::parse_error: return "ParseError";
        case Errc::schema_violation: return "SchemaViolation";
        case Errc::io_error: return "IoError";
        case Errc::non_convergence: return "NonConvergence";
        case Errc::singular_jacobian: return "SingularJacobian";
        case Errc::degenerate_angle: return "DegenerateAngle";
        case Errc::antisymmetry_violation: return "AntisymmetryViolation";
        case Errc::cycle_mismatch: return "CycleMismatch";
        case Errc::precondition_violated: return "PreconditionViolated";
        case Errc::not_zero_shunt: return "NotZeroShunt";
        case Errc::input_not_in_xtilde: return "InputNotInXtilde";
        case Errc::magnitude_mismatch: return "MagnitudeMismatch";
        case Errc::not_radial: return "NotRadial";
        case Errc::cost_violates_a2: return "CostViolatesA2";
        case Errc::infeasible: return "Infeasible";
        case Errc::numerical_failure: return "NumericalFailure";
        case Errc::iteration_limit: return "IterationLimit";
        case Errc::gap_not_positive: return "GapNotPositive";
        case Errc::zero_current: return "ZeroCurrent";
        case Errc::c2_violated_on_line: return "C2ViolatedOnLine";
        case Errc::negative_impedance: return "NegativeImpedance";
    }
    return "Unknown";
}

}  // namespace shuntflow
