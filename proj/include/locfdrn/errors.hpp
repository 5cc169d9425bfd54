#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace locfdrn {

/// A model parameter lies outside its legal range.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed call: bad index, mismatched dimensions, non-finite input.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A factorization or quadrature failed. `index` is the 1-based position
/// (leading minor, window centre) where it happened, or 0 when not applicable.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::size_t index = 0)
        : std::runtime_error(what), index_(index) {}

    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// The request is well-formed but too large to honour (exponential blowup guards).
class RefusalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runs fn, rethrowing any library error with `context` prepended to its message.
template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) {
    try {
        return fn();
    } catch (const NumericalError& e) {
        throw NumericalError(context + ": " + e.what(), e.index());
    } catch (const DomainError& e) {
        throw DomainError(context + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw ArgumentError(context + ": " + e.what());
    } catch (const RefusalError& e) {
        throw RefusalError(context + ": " + e.what());
    }
}

}  // namespace locfdrn
