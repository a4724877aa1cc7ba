#pragma once

#include <stdexcept>
#include <string>

namespace omega {

// Argument outside the mathematical domain of an operation.
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

// Root bracket or quadrature failed to produce a finite answer.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct degenerate_market : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct singular_transform : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation needs the power family (closed forms).
struct unsupported : std::logic_error {
    using std::logic_error::logic_error;
};

// A classifier state the case analysis says cannot happen.
struct invariant_violation : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace omega
