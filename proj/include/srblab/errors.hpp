#pragma once

#include <stdexcept>
#include <string>

namespace srblab {

// Bad argument values (empty sets, out-of-range horizons, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A documented precondition of an operation does not hold.
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A guaranteed postcondition failed to hold: always a bug or a numerical breakdown.
struct InvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

// An orbit of a planar map left its declared domain.
struct EscapeError : DomainError {
    EscapeError(const std::string& what, long iterate, double partial)
        : DomainError(what), iterate(iterate), partial(partial) {}
    long iterate;
    double partial;
};

}  // namespace srblab
