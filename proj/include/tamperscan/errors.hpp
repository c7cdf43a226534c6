#pragma once

#include <stdexcept>
#include <string>

namespace tamperscan {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad scan setup: unresolvable URLs, broken CLV descriptors, bad scenario names.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed action script or locator text.
class ParseError : public Error {
public:
    using Error::Error;
};

// Connection-level failure. Retriable; carries the workflow step when known.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& what, int step = 0)
        : Error(what), step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

// The live page no longer matches the recorded script.
class ReplayError : public Error {
public:
    ReplayError(const std::string& what, int step, std::string locator)
        : Error(what), step_(step), locator_(std::move(locator)) {}

    int step() const noexcept { return step_; }
    const std::string& locator() const noexcept { return locator_; }

private:
    int step_;
    std::string locator_;
};

class CaptureError : public Error {
public:
    using Error::Error;
};

class ScanError : public Error {
public:
    using Error::Error;
};

}  // namespace tamperscan
