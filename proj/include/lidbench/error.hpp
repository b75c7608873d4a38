#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lidbench {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument to an operation (out-of-range node, bad probability, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Invalid or incomplete configuration (unknown tokenizer id, missing key, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

/// A builder refused a candidate sample; the caller is expected to resample.
class RejectedSample : public Error {
public:
    using Error::Error;
};

/// Rejection sampling ran out of attempts before every cell reached its quota.
class PartialCorpusError : public Error {
public:
    PartialCorpusError(const std::string& what, std::vector<std::string> unfilled)
        : Error(what), unfilled_cells(std::move(unfilled)) {}

    std::vector<std::string> unfilled_cells;
};

/// The backend rejected our credentials; a run cannot continue.
class AuthError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

/// An upstream artifact no longer matches the hash recorded in the manifest.
class HashMismatchError : public Error {
public:
    using Error::Error;
};

}  // namespace lidbench
