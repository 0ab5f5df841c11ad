#ifndef HARDCL_ERRORS_HPP
#define HARDCL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hardcl {

// Bad arguments, malformed files, malformed configs. CLI exit code 2.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// A tilted or filtered distribution has zero total mass (alpha = 0),
// including batches where an anchor has no eligible negatives.
class ZeroMassError : public std::runtime_error {
public:
    explicit ZeroMassError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite intermediate values. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// A verification check that must hold was violated. CLI exit code 1.
class CheckFailure : public std::runtime_error {
public:
    explicit CheckFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// The threshold counterexample construction does not apply at this anchor.
class ConstructionInapplicable : public std::runtime_error {
public:
    explicit ConstructionInapplicable(const std::string& msg) : std::runtime_error(msg) {}
};

// The similarity-gap assumption is undefined at an anchor (one of the
// conditional distributions has zero mass there).
class AssumptionUndefined : public std::runtime_error {
public:
    explicit AssumptionUndefined(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hardcl

#endif
